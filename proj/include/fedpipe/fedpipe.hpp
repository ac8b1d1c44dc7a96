#pragma once

#include "fedpipe/aggregator.hpp"
#include "fedpipe/client.hpp"
#include "fedpipe/metrics.hpp"
#include "fedpipe/microbench.hpp"
#include "fedpipe/ring.hpp"
#include "fedpipe/rng.hpp"
#include "fedpipe/server.hpp"
#include "fedpipe/tcp_server.hpp"
#include "fedpipe/trainer.hpp"
#include "fedpipe/transport.hpp"
#include "fedpipe/wire.hpp"
