// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Runs real servers, clients and sockets in-process over loopback.
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "testutil.hpp"

using namespace fedpipe;
using namespace testutil;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Max relative mismatch between got and want (NaN entries in want skipped).
double max_rel_err(std::span<const float> got, std::span<const float> want) {
    double worst = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (std::isnan(want[i])) continue;
        const double denom = std::max(1.0, std::abs(static_cast<double>(want[i])));
        worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
    }
    return worst;
}

// --- criterion 1: lossless oracle equivalence at P=10,000, 20 rounds -------

Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    ServerConfig cfg;
    cfg.n_clients = 10;
    cfg.n_workers = 5;
    cfg.layout = ChunkLayout(10'000, 367);
    cfg.mode = AggMode::Exact;
    PipelineServer server(cfg);
    std::vector<ClientSession> sessions;
    for (unsigned i = 0; i < 10; ++i) sessions.push_back(make_session(server, i));

    double worst = 0;
    std::int64_t total_overlap_us = 0;
    for (int round = 0; round < 20; ++round) {
        std::vector<std::vector<float>> locals;
        for (unsigned i = 0; i < 10; ++i)
            locals.push_back(random_vector(10'000, derive_seed(101, round * 10 + i)));
        const RoundRun run = run_udp_round(server, sessions, locals, false, round);
        if (!run.ok())
            return {false, "round " + std::to_string(round) + " failed: " +
                               run.server.report.abort_reason};
        const OracleGlobals want =
            oracle_mean(locals, all_delivered(10, cfg.layout.num_chunks), cfg.layout);
        if (run.server.report.contrib_counts != want.counts)
            return {false, "contributor counts mismatch in round " + std::to_string(round)};
        worst = std::max(worst, max_rel_err(run.server.globals.values, want.values));
        if (worst > 1e-6)
            return {false, "relative error " + std::to_string(worst) + " in round " +
                               std::to_string(round)};
        total_overlap_us += run.server.report.overlapped_add_us;
    }
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "20/20 rounds, max rel err " << worst << ", add/receive overlap "
       << total_overlap_us << "us, " << secs << "s (< 30s)";
    return {secs < 30.0 && total_overlap_us > 0, os.str()};
}

// --- criterion 2: per-chunk divisors under seeded 5% upload loss -----------

Outcome criterion2() {
    ServerConfig cfg;
    cfg.n_clients = 10;
    cfg.n_workers = 5;
    cfg.layout = ChunkLayout(10'000, 367);
    cfg.mode = AggMode::Exact;
    PipelineServer server(cfg);

    constexpr double kRate = 0.05;
    double worst = 0;
    for (int round = 0; round < 20; ++round) {
        std::vector<ClientSession> sessions;
        std::vector<std::vector<float>> locals;
        std::vector<std::vector<std::uint8_t>> delivered;
        for (unsigned i = 0; i < 10; ++i) {
            ClientOptions opts;
            opts.loss_rate = kRate;
            opts.loss_dir = LossDirection::Outbound;
            opts.loss_seed = derive_seed(202, round * 100 + i);
            opts.retransmit = std::chrono::milliseconds(500);
            sessions.push_back(make_session(server, i, opts));
            locals.push_back(random_vector(10'000, derive_seed(303, round * 10 + i)));
            delivered.push_back(
                replay_upload_trace(opts.loss_seed, kRate, cfg.layout.num_chunks));
        }
        const RoundRun run = run_udp_round(server, sessions, locals, false, round);
        if (!run.ok())
            return {false, "round " + std::to_string(round) + " failed: " +
                               run.server.report.abort_reason};
        const OracleGlobals want = oracle_mean(locals, delivered, cfg.layout);
        if (run.server.report.contrib_counts != want.counts)
            return {false, "contributor counts differ from loss trace in round " +
                               std::to_string(round)};
        worst = std::max(worst, max_rel_err(run.server.globals.values, want.values));
        if (worst > 1e-6)
            return {false, "relative error " + std::to_string(worst) + " in round " +
                               std::to_string(round)};
    }
    std::ostringstream os;
    os << "20/20 rounds, contributor counts exact, max rel err " << worst;
    return {true, os.str()};
}

// --- criterion 3: liveness at 0/5/10/20% loss, 100 rounds each -------------

Outcome criterion3() {
    const double rates[] = {0.0, 0.05, 0.10, 0.20};
    double worst_round_s = 0;
    for (int tier = 0; tier < 4; ++tier) {
        ServerConfig cfg;
        cfg.n_clients = 10;
        cfg.n_workers = 5;
        cfg.layout = ChunkLayout(1'000, 367);
        cfg.retransmit_period = std::chrono::milliseconds(25);
        cfg.end_ack_window = std::chrono::milliseconds(250);
        cfg.round_deadline = std::chrono::milliseconds(30'000);
        PipelineServer server(cfg);
        std::vector<ClientSession> sessions;
        for (unsigned i = 0; i < 10; ++i) {
            ClientOptions opts;
            opts.loss_rate = rates[tier];
            opts.loss_dir = LossDirection::Both;
            opts.loss_seed = derive_seed(404, tier * 100 + i);
            opts.retransmit = std::chrono::milliseconds(25);
            sessions.push_back(make_session(server, i, opts));
        }
        for (int round = 0; round < 100; ++round) {
            std::vector<std::vector<float>> locals;
            for (unsigned i = 0; i < 10; ++i)
                locals.push_back(random_vector(1'000, derive_seed(505, round * 10 + i)));
            const auto r0 = std::chrono::steady_clock::now();
            const RoundRun run = run_udp_round(server, sessions, locals, false, round);
            const double secs = seconds_since(r0);
            worst_round_s = std::max(worst_round_s, secs);
            if (!run.ok()) {
                std::ostringstream os;
                os << "deadlock/abort at " << rates[tier] * 100 << "% loss, round " << round
                   << ": " << run.server.report.abort_reason;
                for (const auto& e : run.client_errors)
                    if (!e.empty()) os << "; client: " << e;
                return {false, os.str()};
            }
            if (secs > 30.0)
                return {false, "round exceeded 30s at tier " + std::to_string(tier)};
        }
    }
    std::ostringstream os;
    os << "400/400 rounds across {0,5,10,20}% loss, slowest round " << worst_round_s << "s";
    return {true, os.str()};
}

// --- criterion 4: single-worker approx == exact, bit for bit ---------------

Outcome criterion4() {
    SplitMix64 rng(4040);
    for (int round = 0; round < 10; ++round) {
        const unsigned n = 2 + static_cast<unsigned>(rng.next_below(5));
        const std::size_t p = 100 + rng.next_below(4'900);
        std::vector<std::vector<float>> locals;
        for (unsigned i = 0; i < n; ++i)
            locals.push_back(random_vector(p, derive_seed(606, round * 10 + i)));

        std::vector<float> out[2];
        for (int m = 0; m < 2; ++m) {
            ServerConfig cfg;
            cfg.n_clients = n;
            cfg.n_workers = 1;
            cfg.layout = ChunkLayout(p, 367);
            cfg.mode = m == 0 ? AggMode::Exact : AggMode::Approximate;
            PipelineServer server(cfg);
            std::vector<ClientSession> sessions;
            for (unsigned i = 0; i < n; ++i) sessions.push_back(make_session(server, i));
            const RoundRun run = run_udp_round(server, sessions, locals, true, round);
            if (!run.ok())
                return {false, "round " + std::to_string(round) + " failed: " +
                                   run.server.report.abort_reason};
            out[m] = run.server.globals.values;
        }
        if (out[0].size() != out[1].size()) return {false, "size mismatch"};
        for (std::size_t i = 0; i < out[0].size(); ++i) {
            if (std::bit_cast<std::uint32_t>(out[0][i]) != std::bit_cast<std::uint32_t>(out[1][i]))
                return {false, "bit mismatch at element " + std::to_string(i) + " in round " +
                                   std::to_string(round)};
        }
    }
    return {true, "10/10 random rounds bit-identical"};
}

// --- criterion 5: contention correctness & demonstrable lost updates -------

Outcome criterion5() {
    // Exact mode: 4 x 10,000 adds of 1.0 are exact in single precision.
    {
        Accumulator acc(ChunkLayout(1, 1), AggMode::Exact, 4);
        std::vector<std::thread> threads;
        const std::vector<float> one{1.0f};
        for (int t = 0; t < 4; ++t)
            threads.emplace_back([&] {
                for (int i = 0; i < 10'000; ++i) acc.add_chunk(0, one);
            });
        for (auto& t : threads) t.join();
        if (acc.sums()[0] != 40'000.0f)
            return {false, "exact mode produced " + std::to_string(acc.sums()[0])};
    }
    // Approximate mode: value stays in (0, 40000]; at least one of 20 trials
    // must actually lose an update.
    int lossy_trials = 0;
    float min_seen = 40'000.0f;
    for (int trial = 0; trial < 20; ++trial) {
        Accumulator acc(ChunkLayout(1, 1), AggMode::Approximate, 4);
        std::vector<std::thread> threads;
        const std::vector<float> one{1.0f};
        for (int t = 0; t < 4; ++t)
            threads.emplace_back([&] {
                for (int i = 0; i < 10'000; ++i) acc.add_chunk(0, one);
            });
        for (auto& t : threads) t.join();
        const float v = acc.sums()[0];
        if (!(v > 0.0f && v <= 40'000.0f))
            return {false, "approximate value out of range: " + std::to_string(v)};
        if (v < 40'000.0f) ++lossy_trials;
        min_seen = std::min(min_seen, v);
    }
    std::ostringstream os;
    os << "exact = 40000 exactly; approx lost updates in " << lossy_trials
       << "/20 trials (min " << min_seen << ")";
    return {lossy_trials >= 1, os.str()};
}

// --- criterion 6: convergence across modes and loss ------------------------

struct FlResult {
    double final_accuracy = 0;
    double final_loss = 0;
};

FlResult run_federated(AggMode mode, double loss_rate, std::uint64_t rep_seed,
                       std::string* error) {
    const ModelShape shape{32, 10};
    const SyntheticData data = gen_synthetic(rep_seed, 10'000, 2'000, 32, 10, 10);

    ServerConfig cfg;
    cfg.n_clients = 10;
    cfg.n_workers = 5;
    cfg.layout = ChunkLayout(shape.param_count(), 367);
    cfg.mode = mode;
    PipelineServer server(cfg);

    std::vector<ClientSession> sessions;
    std::vector<Dataset> shards;
    for (unsigned i = 0; i < 10; ++i) {
        ClientOptions opts;
        if (loss_rate > 0) {
            opts.loss_rate = loss_rate;
            opts.loss_dir = LossDirection::Both;
            opts.loss_seed = derive_seed(rep_seed, 777 + i);
        }
        sessions.push_back(make_session(server, i, opts));
        shards.push_back(data.shard(i));
    }

    std::vector<std::vector<float>> w(10, std::vector<float>(shape.param_count(), 0.0f));
    for (int round = 0; round < 20; ++round) {
        for (unsigned i = 0; i < 10; ++i) {
            HyperParams hp{1, 50, 0.1f, 1, derive_seed(rep_seed, round * 10 + i)};
            w[i] = client_update(w[i], shards[i], shape, hp);
        }
        const RoundRun run = run_udp_round(server, sessions, w, false, round);
        if (!run.ok()) {
            std::ostringstream os;
            os << "round " << round << ": " << run.server.report.abort_reason;
            for (unsigned i = 0; i < 10; ++i)
                if (!run.client_errors[i].empty()) os << " [c" << i << ": " << run.client_errors[i] << "]";
            *error = os.str();
            return {};
        }
        for (unsigned i = 0; i < 10; ++i) w[i] = run.recv_stats[i].merged;
    }
    const EvalResult eval = evaluate(w[0], shape, data.test);
    return {eval.accuracy, eval.loss};
}

double centralized_accuracy(std::uint64_t rep_seed) {
    const ModelShape shape{32, 10};
    const SyntheticData data = gen_synthetic(rep_seed, 10'000, 2'000, 32, 10, 10);
    std::vector<float> w(shape.param_count(), 0.0f);
    for (unsigned epoch = 0; epoch < 20; ++epoch) {
        HyperParams hp{1, 50, 0.1f, 1, derive_seed(rep_seed, 5000 + epoch)};
        w = client_update(w, data.train, shape, hp);
    }
    return evaluate(w, shape, data.test).accuracy;
}

Outcome criterion6() {
    const auto t0 = std::chrono::steady_clock::now();
    double centralized = 0, exact = 0, approx = 0, lossy = 0;
    for (unsigned rep = 0; rep < 5; ++rep) {
        const std::uint64_t rep_seed = 9000 + rep;
        std::string err;
        centralized += centralized_accuracy(rep_seed) / 5;
        const FlResult e = run_federated(AggMode::Exact, 0.0, rep_seed, &err);
        if (!err.empty()) return {false, "exact rep " + std::to_string(rep) + ": " + err};
        const FlResult a = run_federated(AggMode::Approximate, 0.0, rep_seed, &err);
        if (!err.empty()) return {false, "approx rep " + std::to_string(rep) + ": " + err};
        const FlResult l = run_federated(AggMode::Exact, 0.05, rep_seed, &err);
        if (!err.empty()) return {false, "lossy rep " + std::to_string(rep) + ": " + err};
        exact += e.final_accuracy / 5;
        approx += a.final_accuracy / 5;
        lossy += l.final_accuracy / 5;
    }
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << "centralized " << centralized << ", exact " << exact << ", approx " << approx
       << ", 5%-loss " << lossy << ", " << secs << "s (< 300s)";
    const bool pass = exact >= centralized - 0.05 && std::abs(approx - exact) <= 0.02 &&
                      std::abs(lossy - exact) <= 0.03 && secs < 300.0;
    return {pass, os.str()};
}

// --- criterion 7: TCP baseline matches UDP pipeline ------------------------

Outcome criterion7() {
    for (int round = 0; round < 10; ++round) {
        std::vector<std::vector<float>> locals;
        for (unsigned i = 0; i < 10; ++i)
            locals.push_back(random_vector(3'000, derive_seed(808, round * 10 + i)));
        const ChunkLayout layout(3'000, 367);

        ServerConfig ucfg;
        ucfg.n_clients = 10;
        ucfg.n_workers = 5;
        ucfg.layout = layout;
        PipelineServer udp_server(ucfg);
        std::vector<ClientSession> sessions;
        for (unsigned i = 0; i < 10; ++i) sessions.push_back(make_session(udp_server, i));
        const RoundRun udp_run = run_udp_round(udp_server, sessions, locals, false, round);
        if (!udp_run.ok()) return {false, "udp round failed"};

        TcpServerConfig tcfg;
        tcfg.n_clients = 10;
        tcfg.layout = layout;
        TcpBaselineServer tcp_server(tcfg);
        RoundResult tcp_result;
        std::thread server_thread([&] { tcp_result = tcp_server.run_round(round); });
        std::vector<std::thread> clients;
        for (unsigned i = 0; i < 10; ++i)
            clients.emplace_back(
                [&, i] { tcp_client_round(tcp_server.local_endpoint(), locals[i]); });
        for (auto& t : clients) t.join();
        server_thread.join();
        if (tcp_result.report.aborted) return {false, "tcp round failed"};

        const double err = max_rel_err(tcp_result.globals.values, udp_run.server.globals.values);
        if (err > 1e-6)
            return {false, "round " + std::to_string(round) + " rel err " + std::to_string(err)};
    }
    return {true, "10/10 lossless rounds element-wise equal within 1e-6"};
}

// --- criterion 8: paper-scale payload round (P = 2,000,000) ----------------

Outcome criterion8() {
    const auto t0 = std::chrono::steady_clock::now();
    ServerConfig cfg;
    cfg.n_clients = 10;
    cfg.n_workers = 5;
    cfg.layout = ChunkLayout(2'000'000, 367);
    cfg.mode = AggMode::Exact;
    cfg.ring_capacity = 4096;
    PipelineServer server(cfg);
    std::vector<ClientSession> sessions;
    std::vector<std::vector<float>> locals;
    for (unsigned i = 0; i < 10; ++i) {
        sessions.push_back(make_session(server, i));
        locals.push_back(random_vector(2'000'000, derive_seed(909, i)));
    }
    const RoundRun run = run_udp_round(server, sessions, locals, false, 0);
    if (!run.ok()) return {false, "round failed: " + run.server.report.abort_reason};
    const double secs = seconds_since(t0);

    const OracleGlobals want =
        oracle_mean(locals, all_delivered(10, cfg.layout.num_chunks), cfg.layout);
    if (run.server.report.contrib_counts != want.counts)
        return {false, "contributor counts not all 10 (packets were lost)"};
    const double err = max_rel_err(run.server.globals.values, want.values);
    std::ostringstream os;
    os << "5450 chunks x 10 clients, max rel err " << err << ", ring drops "
       << run.server.report.ring_drops << ", overlap "
       << run.server.report.overlapped_add_us << "us, " << secs << "s (< 60s)";
    return {secs < 60.0 && err <= 1e-6, os.str()};
}

// --- criterion 9: contention microbenchmark floor --------------------------

Outcome criterion9() {
    const ContentionResult r = contention_benchmark(4, 64, 2'000'000);
    std::ostringstream os;
    os << "exact " << r.exact_mops << " Madds/s, approx " << r.approx_mops
       << " Madds/s, ratio " << r.ratio() << " (floor 0.9)";
    return {r.ratio() >= 0.9, os.str()};
}

// --- criterion 10: analytic vs finite-difference gradients ------------------

Outcome criterion10() {
    SplitMix64 rng(10'010);
    int failures = 0;
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const ModelShape shape{static_cast<unsigned>(4 + rng.next_below(8)),
                               static_cast<unsigned>(2 + rng.next_below(6))};
        Dataset ds;
        ds.feature_dim = shape.feature_dim;
        ds.n_classes = shape.n_classes;
        ds.labels.push_back(static_cast<std::uint16_t>(rng.next_below(shape.n_classes)));
        for (unsigned i = 0; i < shape.feature_dim; ++i)
            ds.features.push_back(static_cast<float>(rng.next_unit() * 2 - 1));

        std::vector<float> w(shape.param_count());
        for (auto& x : w) x = static_cast<float>(rng.next_unit() - 0.5);
        const std::vector<std::uint32_t> batch{0};
        std::vector<float> grad(w.size());
        batch_gradient(w, shape, ds, batch, grad);

        auto loss_at = [&](const std::vector<float>& wx) {
            std::vector<double> logits(shape.n_classes), probs(shape.n_classes);
            fedpipe::detail::forward(wx, shape, ds.row(0), logits.data(), probs.data());
            return -std::log(std::max(probs[ds.labels[0]], 1e-300));
        };
        const double h = 1e-3;
        const std::size_t k = rng.next_below(w.size());
        auto wp = w;
        auto wm = w;
        wp[k] += static_cast<float>(h);
        wm[k] -= static_cast<float>(h);
        const double fd = (loss_at(wp) - loss_at(wm)) / (2 * h);
        const double rel = std::abs(grad[k] - fd) / std::max(std::abs(fd), 1e-4);
        worst = std::max(worst, rel);
        if (rel >= 1e-3) ++failures;
    }
    std::ostringstream os;
    os << (100 - failures) << "/100 cases below 1e-3 relative error (worst " << worst << ")";
    return {failures == 0, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    // Optional args: criterion numbers to run (default: all).
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<Criterion> criteria{
        {1, "oracle aggregation equivalence (lossless, P=10k, K=5)", criterion1},
        {2, "loss-aware divisor correctness (seeded 5% upload loss)", criterion2},
        {3, "protocol liveness (100 rounds at 0/5/10/20% loss)", criterion3},
        {4, "single-lane mode equivalence (K=1, bit-identical)", criterion4},
        {5, "exact-mode contention correctness + approximate lost updates", criterion5},
        {6, "convergence reproduction (blobs, T=20, 5 reps)", criterion6},
        {7, "cross-server equivalence (tcp vs udp, exact)", criterion7},
        {8, "paper-scale I/O smoke (P=2,000,000, 10 clients)", criterion8},
        {9, "contention microbenchmark (approx >= 0.9x exact)", criterion9},
        {10, "gradient check (analytic vs finite differences)", criterion10},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[C%d] %s %s: %s\n", c.id, outcome.pass ? "PASS" : "FAIL", c.name,
                    outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) FAILED\n", failures);
    else std::printf("all 10 criteria passed\n");
    return failures == 0 ? 0 : 1;
}
