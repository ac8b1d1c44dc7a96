#pragma once
#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fedpipe/aggregator.hpp"
#include "fedpipe/metrics.hpp"
#include "fedpipe/ring.hpp"
#include "fedpipe/transport.hpp"
#include "fedpipe/wire.hpp"

// Pipelined federated-averaging server. One RX thread demultiplexes incoming
// datagrams by source port into per-client SPSC rings, K worker threads pop
// and accumulate concurrently with reception, and one TX thread drains
// per-producer TX rings to the socket. After every client has sent END and
// the rings are drained, one worker divides while the others wait at a spin
// barrier; workers then stream the global parameters back to their own
// clients and retransmit END until each client acknowledges.
namespace fedpipe {

enum class PeerState : std::uint8_t { Idle = 0, Receiving = 1, Ended = 2 };

struct ServerConfig {
    unsigned n_clients = 1;
    unsigned n_workers = 1;
    ChunkLayout layout{kChunkCapacity, kChunkCapacity};
    AggMode mode = AggMode::Exact;
    Endpoint bind = Endpoint::loopback(0);
    // Static client identity map (index = ring id). Empty means clients are
    // registered dynamically at their first START.
    std::vector<std::uint16_t> client_ports;
    std::chrono::milliseconds end_ack_window{1000};
    std::chrono::milliseconds retransmit_period{100};
    std::chrono::milliseconds round_deadline{30000};
    std::size_t ring_capacity = 1024;
    std::size_t recv_buffer = 64u << 20;
    unsigned rx_batch = 64;
    LossPolicy loss;
};

// Worker i owns RX rings i, i+K, i+2K, ... so the K workers partition the
// client set evenly.
inline std::vector<unsigned> worker_poll_order(unsigned worker, unsigned n_workers,
                                               unsigned n_clients) {
    std::vector<unsigned> ids;
    for (unsigned c = worker; c < n_clients; c += n_workers) ids.push_back(c);
    return ids;
}

// Division may start only once every client has ended, every RX ring is
// empty, and no worker still holds a popped packet.
inline bool drain_complete(std::span<const PeerState> client_states,
                           std::span<const std::size_t> ring_sizes,
                           std::span<const std::uint8_t> workers_busy) {
    for (auto s : client_states)
        if (s != PeerState::Ended) return false;
    for (auto n : ring_sizes)
        if (n != 0) return false;
    for (auto b : workers_busy)
        if (b) return false;
    return true;
}

// Source-port -> client index map. Accessed only from the RX thread.
class ClientTable {
public:
    ClientTable(std::vector<std::uint16_t> ports, unsigned capacity, bool dynamic)
        : ports_(std::move(ports)), dynamic_(dynamic) {
        ports_.resize(capacity, 0);
    }

    std::optional<unsigned> lookup(std::uint16_t port) const {
        if (port == 0) return std::nullopt;
        for (unsigned i = 0; i < ports_.size(); ++i)
            if (ports_[i] == port) return i;
        return std::nullopt;
    }

    std::optional<unsigned> lookup_or_register(std::uint16_t port) {
        if (auto i = lookup(port)) return i;
        if (!dynamic_ || port == 0) return std::nullopt;
        for (unsigned i = 0; i < ports_.size(); ++i) {
            if (ports_[i] == 0) {
                ports_[i] = port;
                return i;
            }
        }
        return std::nullopt;
    }

    // The mapping is stable for a round; dynamic registrations are forgotten
    // between rounds so each round's STARTs claim fresh slots.
    void reset_dynamic() {
        if (dynamic_) std::fill(ports_.begin(), ports_.end(), 0);
    }

    std::uint16_t port_of(unsigned idx) const { return ports_[idx]; }

private:
    std::vector<std::uint16_t> ports_;
    bool dynamic_;
};

struct RoundResult {
    RoundReport report;
    GlobalParams globals;
};

namespace detail {

struct RxSlot {
    std::uint32_t chunk_index = 0;
    std::uint16_t count = 0;
    std::array<float, kChunkCapacity> values;
};

struct TxSlot {
    Endpoint dest;
    std::uint16_t len = 0;
    std::array<std::byte, kMaxDatagram> bytes;
};

struct RoundState {
    explicit RoundState(unsigned n_clients, unsigned n_workers)
        : n(n_clients),
          state(n_clients),
          first_end_us(n_clients),
          final_ack(n_clients),
          endpoint(n_clients),
          data_packets(n_clients),
          worker_busy(n_workers) {
        for (auto& t : first_end_us) t.store(-1, std::memory_order_relaxed);
    }

    unsigned n;
    std::vector<std::atomic<std::uint8_t>> state;        // PeerState
    std::vector<std::atomic<std::int64_t>> first_end_us;
    std::vector<std::atomic<std::uint8_t>> final_ack;    // END_ACK for globals
    std::vector<std::atomic<std::uint64_t>> endpoint;    // packed addr<<16 | port
    std::vector<std::atomic<std::uint32_t>> data_packets;
    std::vector<std::atomic<std::uint8_t>> worker_busy;

    std::atomic<unsigned> n_ended{0};
    std::atomic<std::uint8_t> phase{0};  // 0 receiving, 1 computing, 2 sending
    std::atomic<std::int64_t> t_first_start{-1};
    std::atomic<std::int64_t> t_all_ends{-1};
    std::atomic<std::int64_t> t_divide_done{-1};

    std::atomic<std::uint64_t> packets_received{0};
    std::atomic<std::uint64_t> malformed{0};
    std::atomic<std::uint64_t> ring_drops{0};
    std::atomic<std::uint64_t> late_drops{0};
    std::atomic<std::uint64_t> unknown_drops{0};
    std::atomic<std::uint64_t> stray{0};
    std::atomic<std::uint64_t> violations{0};
    std::atomic<std::int64_t> overlapped_add_us{0};

    std::atomic<unsigned> barrier_arrived{0};
    std::atomic<bool> divided{false};
    std::atomic<bool> abort{false};
    std::atomic<bool> done{false};

    std::mutex reason_mu;
    std::string reason;
    GlobalParams globals;

    bool all_ended() const { return n_ended.load(std::memory_order_acquire) == n; }

    void set_abort(const std::string& why) {
        {
            std::lock_guard lock(reason_mu);
            if (reason.empty()) reason = why;
        }
        abort.store(true, std::memory_order_release);
    }

    static std::uint64_t pack(const Endpoint& e) {
        return (static_cast<std::uint64_t>(e.addr) << 16) | e.port;
    }
    static Endpoint unpack(std::uint64_t v) {
        return {static_cast<std::uint32_t>(v >> 16), static_cast<std::uint16_t>(v & 0xffff)};
    }
};

}  // namespace detail

class PipelineServer {
public:
    explicit PipelineServer(ServerConfig cfg)
        : cfg_(validated(std::move(cfg))),
          sock_(UdpSocket(cfg_.bind, cfg_.recv_buffer), cfg_.loss),
          table_(cfg_.client_ports, cfg_.n_clients, cfg_.client_ports.empty()),
          acc_(cfg_.layout, cfg_.mode, cfg_.n_clients) {
        for (unsigned i = 0; i < cfg_.n_clients; ++i)
            rx_rings_.emplace_back(std::make_unique<SpscRing<detail::RxSlot>>(cfg_.ring_capacity));
        // Ring 0 belongs to RX (control replies); ring 1+w to worker w. TX is
        // the only stage with several producers, so it gets one SPSC ring per
        // producer and drains them round-robin.
        for (unsigned i = 0; i < cfg_.n_workers + 1; ++i)
            tx_rings_.emplace_back(std::make_unique<SpscRing<detail::TxSlot>>(cfg_.ring_capacity));
    }

    const ServerConfig& config() const { return cfg_; }
    Endpoint local_endpoint() const { return sock_.local_endpoint(); }
    const Accumulator& accumulator() const { return acc_; }
    const ClientTable& clients() const { return table_; }

    RoundResult run_round(int round_index) {
        acc_.reset();
        table_.reset_dynamic();
        for (auto& r : rx_rings_) r->clear();
        for (auto& r : tx_rings_) r->clear();
        rs_ = std::make_unique<detail::RoundState>(cfg_.n_clients, cfg_.n_workers);
        round_start_ = std::chrono::steady_clock::now();

        detail::RoundState& rs = *rs_;
        std::vector<std::thread> workers;
        std::thread rx([&] { guarded(rs, [&] { run_rx(rs); }); });
        std::thread tx([&] { guarded(rs, [&] { run_tx(rs); }); });
        for (unsigned w = 0; w < cfg_.n_workers; ++w)
            workers.emplace_back([&, w] { guarded(rs, [&] { run_worker(rs, w); }); });

        for (auto& t : workers) t.join();
        const std::int64_t send_done = rel_us();
        rs.done.store(true, std::memory_order_release);
        rx.join();
        tx.join();

        RoundResult result;
        RoundReport& rep = result.report;
        rep.round = round_index;
        rep.aborted = rs.abort.load();
        {
            std::lock_guard lock(rs.reason_mu);
            rep.abort_reason = rs.reason;
        }
        rep.t_first_start_us = rs.t_first_start.load();
        rep.t_all_ends_us = rs.t_all_ends.load();
        rep.t_divide_done_us = rs.t_divide_done.load();
        rep.t_send_done_us = rep.aborted ? -1 : send_done;
        if (rep.t_first_start_us >= 0 && rep.t_all_ends_us >= 0)
            rep.receive_us = rep.t_all_ends_us - rep.t_first_start_us;
        if (rep.t_all_ends_us >= 0 && rep.t_divide_done_us >= 0)
            rep.compute_us = rep.t_divide_done_us - rep.t_all_ends_us;
        if (rep.t_divide_done_us >= 0 && rep.t_send_done_us >= 0)
            rep.send_us = rep.t_send_done_us - rep.t_divide_done_us;
        rep.overlapped_add_us = rs.overlapped_add_us.load();
        rep.packets_received = rs.packets_received.load();
        rep.malformed = rs.malformed.load();
        rep.ring_drops = rs.ring_drops.load();
        rep.late_drops = rs.late_drops.load();
        rep.unknown_source_drops = rs.unknown_drops.load();
        rep.stray_control = rs.stray.load();
        rep.barrier_violations = rs.violations.load();
        rep.client_chunks_received.resize(cfg_.n_clients);
        for (unsigned i = 0; i < cfg_.n_clients; ++i)
            rep.client_chunks_received[i] = rs.data_packets[i].load();
        rep.contrib_counts = acc_.contrib_counts();
        result.globals = std::move(rs.globals);
        rs_.reset();
        return result;
    }

private:
    static ServerConfig validated(ServerConfig cfg) {
        if (cfg.n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
        if (cfg.n_workers < 1) throw std::invalid_argument("n_workers must be >= 1");
        if (cfg.layout.chunk_capacity > kChunkCapacity)
            throw std::invalid_argument("chunk capacity exceeds datagram limit");
        if (!cfg.client_ports.empty() && cfg.client_ports.size() != cfg.n_clients)
            throw std::invalid_argument("client_ports must list one port per client");
        if (cfg.rx_batch < 1 || cfg.rx_batch > 64)
            throw std::invalid_argument("rx_batch must be 1..64");
        return cfg;
    }

    template <typename F>
    void guarded(detail::RoundState& rs, F&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            rs.set_abort(std::string("stage failed: ") + e.what());
        }
    }

    std::int64_t rel_us() const {
        using namespace std::chrono;
        return duration_cast<microseconds>(steady_clock::now() - round_start_).count();
    }

    std::int64_t deadline_us() const {
        return std::chrono::duration_cast<std::chrono::microseconds>(cfg_.round_deadline).count();
    }

    void reply(detail::RoundState& rs, const Endpoint& dest, ControlKind kind) {
        detail::TxSlot slot;
        slot.dest = dest;
        slot.len = static_cast<std::uint16_t>(encode_control(kind, slot.bytes));
        push_tx(rs, 0, std::move(slot));
    }

    void push_tx(detail::RoundState& rs, unsigned ring, detail::TxSlot&& slot) {
        for (unsigned tries = 0;; ++tries) {
            if (tx_rings_[ring]->push(std::move(slot))) return;
            if (rs.abort.load(std::memory_order_relaxed) || rs.done.load(std::memory_order_relaxed))
                return;
            // Backpressure from TX; spin a little, then yield the core.
            if (tries > 64) std::this_thread::sleep_for(std::chrono::microseconds(10));
        }
    }

    void run_rx(detail::RoundState& rs) {
        std::vector<RawDatagram> batch(cfg_.rx_batch);
        while (!rs.done.load(std::memory_order_acquire)) {
            const std::size_t n = sock_.poll_recv_batch(batch.data(), batch.size());
            if (n == 0) {
                if (!rs.abort.load(std::memory_order_relaxed) && rel_us() > deadline_us())
                    rs.set_abort(deadline_diagnostic(rs));
                std::this_thread::sleep_for(std::chrono::microseconds(10));
                continue;
            }
            for (std::size_t i = 0; i < n; ++i) handle_datagram(rs, batch[i]);
        }
    }

    std::string deadline_diagnostic(detail::RoundState& rs) {
        std::ostringstream os;
        os << "round deadline exceeded;";
        if (rs.phase.load() == 0) {
            os << " clients missing END:";
            for (unsigned i = 0; i < rs.n; ++i)
                if (rs.state[i].load() != static_cast<std::uint8_t>(PeerState::Ended))
                    os << ' ' << i;
        } else {
            os << " clients missing final END_ACK:";
            for (unsigned i = 0; i < rs.n; ++i)
                if (!rs.final_ack[i].load()) os << ' ' << i;
        }
        return os.str();
    }

    void handle_datagram(detail::RoundState& rs, const RawDatagram& d) {
        rs.packets_received.fetch_add(1, std::memory_order_relaxed);
        ClassifyResult cls = classify(d.payload());
        if (std::holds_alternative<DecodeError>(cls)) {
            rs.malformed.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        if (auto* ctl = std::get_if<ControlPacket>(&cls)) {
            handle_control(rs, d.source, ctl->kind);
            return;
        }
        const DataView& view = std::get<DataView>(cls);
        const auto idx = table_.lookup(d.source.port);
        if (!idx) {
            rs.unknown_drops.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        if (rs.state[*idx].load(std::memory_order_acquire) !=
            static_cast<std::uint8_t>(PeerState::Receiving)) {
            rs.late_drops.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        if (!cfg_.layout.valid_index(view.index) ||
            view.count != cfg_.layout.chunk_len(view.index)) {
            rs.malformed.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        detail::RxSlot slot;
        slot.chunk_index = view.index;
        slot.count = static_cast<std::uint16_t>(view.count);
        view.copy_values(slot.values.data());
        SpscRing<detail::RxSlot>& ring = *rx_rings_[*idx];
        for (unsigned tries = 0;; ++tries) {
            if (ring.push(std::move(slot))) {
                rs.data_packets[*idx].fetch_add(1, std::memory_order_relaxed);
                return;
            }
            if (tries >= 512) {  // bounded retry, then drop: the divisor rule
                rs.ring_drops.fetch_add(1, std::memory_order_relaxed);
                return;  // already tolerates a missing chunk
            }
            if (tries % 64 == 63) std::this_thread::sleep_for(std::chrono::microseconds(10));
        }
    }

    void handle_control(detail::RoundState& rs, const Endpoint& src, ControlKind kind) {
        switch (kind) {
            case ControlKind::Start: {
                const auto idx = table_.lookup_or_register(src.port);
                if (!idx) {
                    rs.unknown_drops.fetch_add(1, std::memory_order_relaxed);
                    return;
                }
                rs.endpoint[*idx].store(detail::RoundState::pack(src), std::memory_order_relaxed);
                const auto cur = rs.state[*idx].load(std::memory_order_acquire);
                if (cur == static_cast<std::uint8_t>(PeerState::Idle)) {
                    rs.state[*idx].store(static_cast<std::uint8_t>(PeerState::Receiving),
                                         std::memory_order_release);
                    std::int64_t expected = -1;
                    rs.t_first_start.compare_exchange_strong(expected, rel_us(),
                                                             std::memory_order_relaxed);
                    reply(rs, src, ControlKind::StartAck);
                } else if (cur == static_cast<std::uint8_t>(PeerState::Receiving)) {
                    reply(rs, src, ControlKind::StartAck);  // duplicate START
                } else {
                    // A START from an ended client belongs to the next round.
                    // Leave it unanswered; the client retransmits after this
                    // round closes.
                    rs.stray.fetch_add(1, std::memory_order_relaxed);
                }
                return;
            }
            case ControlKind::End: {
                const auto idx = table_.lookup(src.port);
                if (!idx) {
                    rs.unknown_drops.fetch_add(1, std::memory_order_relaxed);
                    return;
                }
                const auto cur = rs.state[*idx].load(std::memory_order_acquire);
                if (cur == static_cast<std::uint8_t>(PeerState::Receiving)) {
                    rs.first_end_us[*idx].store(rel_us(), std::memory_order_relaxed);
                    rs.state[*idx].store(static_cast<std::uint8_t>(PeerState::Ended),
                                         std::memory_order_release);
                    const unsigned ended = rs.n_ended.fetch_add(1, std::memory_order_acq_rel) + 1;
                    if (ended == rs.n) rs.t_all_ends.store(rel_us(), std::memory_order_release);
                    reply(rs, src, ControlKind::EndAck);
                } else if (cur == static_cast<std::uint8_t>(PeerState::Ended)) {
                    // Retransmitted END: answer within the window, never
                    // re-enter the receiving state.
                    const std::int64_t first = rs.first_end_us[*idx].load(std::memory_order_relaxed);
                    const std::int64_t window =
                        std::chrono::duration_cast<std::chrono::microseconds>(cfg_.end_ack_window)
                            .count();
                    if (first >= 0 && rel_us() - first <= window)
                        reply(rs, src, ControlKind::EndAck);
                    else
                        rs.stray.fetch_add(1, std::memory_order_relaxed);
                } else {
                    rs.stray.fetch_add(1, std::memory_order_relaxed);
                }
                return;
            }
            case ControlKind::EndAck: {
                const auto idx = table_.lookup(src.port);
                if (!idx) {
                    rs.unknown_drops.fetch_add(1, std::memory_order_relaxed);
                    return;
                }
                // Only meaningful while this round is sending globals; an ack
                // arriving earlier is a leftover from the previous round.
                if (rs.phase.load(std::memory_order_acquire) == 2)
                    rs.final_ack[*idx].store(1, std::memory_order_release);
                else
                    rs.stray.fetch_add(1, std::memory_order_relaxed);
                return;
            }
            case ControlKind::StartAck:
                rs.stray.fetch_add(1, std::memory_order_relaxed);
                return;
        }
    }

    void run_worker(detail::RoundState& rs, unsigned w) {
        const std::vector<unsigned> mine = worker_poll_order(w, cfg_.n_workers, cfg_.n_clients);
        detail::RxSlot slot;
        for (;;) {
            bool any = false;
            for (const unsigned c : mine) {
                while (rx_rings_[c]->pop(slot)) {
                    any = true;
                    rs.worker_busy[w].store(1, std::memory_order_relaxed);
                    const std::int64_t t0 = rel_us();
                    if (!acc_.add_chunk(slot.chunk_index, {slot.values.data(), slot.count}))
                        rs.malformed.fetch_add(1, std::memory_order_relaxed);
                    if (rs.t_all_ends.load(std::memory_order_relaxed) < 0)
                        rs.overlapped_add_us.fetch_add(rel_us() - t0, std::memory_order_relaxed);
                }
            }
            rs.worker_busy[w].store(0, std::memory_order_release);
            if (rs.abort.load(std::memory_order_acquire)) return;
            if (!any) {
                if (rs.all_ended() && rings_empty(mine)) break;
                std::this_thread::sleep_for(std::chrono::microseconds(10));
            }
        }

        rs.barrier_arrived.fetch_add(1, std::memory_order_acq_rel);
        if (w == 0) {
            while (rs.barrier_arrived.load(std::memory_order_acquire) < cfg_.n_workers) {
                if (rs.abort.load(std::memory_order_acquire)) return;
                std::this_thread::sleep_for(std::chrono::microseconds(5));
            }
            if (!check_drain(rs)) rs.violations.fetch_add(1, std::memory_order_relaxed);
            rs.phase.store(1, std::memory_order_release);
            rs.globals = acc_.divide();
            rs.t_divide_done.store(rel_us(), std::memory_order_relaxed);
            rs.phase.store(2, std::memory_order_release);
            rs.divided.store(true, std::memory_order_release);
        } else {
            while (!rs.divided.load(std::memory_order_acquire)) {
                if (rs.abort.load(std::memory_order_acquire)) return;
                std::this_thread::sleep_for(std::chrono::microseconds(5));
            }
        }
        send_globals(rs, w, mine);
    }

    bool rings_empty(const std::vector<unsigned>& ids) const {
        for (const unsigned c : ids)
            if (!rx_rings_[c]->empty()) return false;
        return true;
    }

    bool check_drain(detail::RoundState& rs) const {
        std::vector<PeerState> states(rs.n);
        for (unsigned i = 0; i < rs.n; ++i)
            states[i] = static_cast<PeerState>(rs.state[i].load(std::memory_order_acquire));
        std::vector<std::size_t> sizes(rs.n);
        for (unsigned i = 0; i < rs.n; ++i) sizes[i] = rx_rings_[i]->size();
        std::vector<std::uint8_t> busy(rs.worker_busy.size());
        for (std::size_t i = 0; i < busy.size(); ++i)
            busy[i] = rs.worker_busy[i].load(std::memory_order_acquire);
        return drain_complete(states, sizes, busy);
    }

    void send_globals(detail::RoundState& rs, unsigned w, const std::vector<unsigned>& mine) {
        const unsigned ring = 1 + w;
        std::vector<unsigned> pending;
        for (const unsigned c : mine) {
            const Endpoint dest =
                detail::RoundState::unpack(rs.endpoint[c].load(std::memory_order_acquire));
            if (dest.port == 0) continue;  // never registered (aborted rounds)
            for (std::uint32_t i = 0; i < cfg_.layout.num_chunks; ++i) {
                if (!rs.globals.chunk_present(i)) continue;  // absent chunks stay local
                detail::TxSlot slot;
                slot.dest = dest;
                const std::size_t off = cfg_.layout.chunk_offset(i);
                const std::size_t len = cfg_.layout.chunk_len(i);
                slot.len = static_cast<std::uint16_t>(
                    encode_data(i, {rs.globals.values.data() + off, len}, slot.bytes));
                push_tx(rs, ring, std::move(slot));
                if (rs.abort.load(std::memory_order_relaxed)) return;
            }
            pending.push_back(c);
        }
        // END per client, retransmitted until the client's END_ACK arrives.
        while (!pending.empty()) {
            if (rs.abort.load(std::memory_order_acquire)) return;
            if (rel_us() > deadline_us()) {
                std::ostringstream os;
                os << "send phase deadline; clients missing final END_ACK:";
                for (const unsigned c : pending) os << ' ' << c;
                rs.set_abort(os.str());
                return;
            }
            for (const unsigned c : pending) {
                detail::TxSlot slot;
                slot.dest = detail::RoundState::unpack(rs.endpoint[c].load(std::memory_order_acquire));
                slot.len = static_cast<std::uint16_t>(encode_control(ControlKind::End, slot.bytes));
                push_tx(rs, ring, std::move(slot));
            }
            const std::int64_t sent_at = rel_us();
            const std::int64_t period =
                std::chrono::duration_cast<std::chrono::microseconds>(cfg_.retransmit_period)
                    .count();
            while (rel_us() - sent_at < period) {
                pending.erase(std::remove_if(pending.begin(), pending.end(),
                                             [&](unsigned c) {
                                                 return rs.final_ack[c].load(
                                                            std::memory_order_acquire) != 0;
                                             }),
                              pending.end());
                if (pending.empty() || rs.abort.load(std::memory_order_acquire)) break;
                std::this_thread::sleep_for(std::chrono::microseconds(100));
            }
            pending.erase(std::remove_if(pending.begin(), pending.end(),
                                         [&](unsigned c) {
                                             return rs.final_ack[c].load(
                                                        std::memory_order_acquire) != 0;
                                         }),
                          pending.end());
        }
    }

    void run_tx(detail::RoundState& rs) {
        detail::TxSlot slot;
        while (!rs.done.load(std::memory_order_acquire)) {
            bool any = false;
            for (auto& ring : tx_rings_) {
                unsigned burst = 0;
                while (burst < 64 && ring->pop(slot)) {
                    sock_.send_to({slot.bytes.data(), slot.len}, slot.dest);
                    any = true;
                    ++burst;
                }
            }
            if (!any) std::this_thread::sleep_for(std::chrono::microseconds(10));
        }
    }

    ServerConfig cfg_;
    LossyUdpSocket sock_;
    ClientTable table_;
    Accumulator acc_;
    std::vector<std::unique_ptr<SpscRing<detail::RxSlot>>> rx_rings_;
    std::vector<std::unique_ptr<SpscRing<detail::TxSlot>>> tx_rings_;
    std::unique_ptr<detail::RoundState> rs_;
    std::chrono::steady_clock::time_point round_start_;
};

}  // namespace fedpipe
