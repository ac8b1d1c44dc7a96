#pragma once
#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fedpipe/metrics.hpp"
#include "fedpipe/transport.hpp"
#include "fedpipe/wire.hpp"

// Client half of the protocol. One round walks
// Idle -> SendingLocals -> ReceivingGlobals -> Done:
//
//   START (retransmit 100ms) -> START_ACK
//   data chunks in index order, then END (retransmit 100ms) -> END_ACK
//   collect global chunks until the server's END -> reply END_ACK
//
// The client's fixed source port is its identity at the server. Global
// chunks lost on the way back are left as the local parameters.
namespace fedpipe {

enum class ClientState { Idle, SendingLocals, ReceivingGlobals, Done };

struct ClientConfig {
    unsigned id = 0;
    Endpoint server;
    std::uint16_t source_port = 0;  // 0 = ephemeral (server must allow dynamic registration)
    ChunkLayout layout{kChunkCapacity, kChunkCapacity};
    LossPolicy loss;
    std::chrono::milliseconds retransmit_period{100};
    std::chrono::milliseconds deadline{30000};
    std::size_t recv_buffer = 64u << 20;
    // Upload pacing: a burst of datagrams, then a pause, so N unpaced senders
    // cannot overrun the server's receive buffer on loopback.
    unsigned send_burst = 32;
    std::chrono::microseconds send_interval{500};
};

struct RoundTimeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SendStats {
    std::int64_t t_start_sent_us = 0;  // steady clock, first START
    std::int64_t t_end_acked_us = 0;
    unsigned starts_sent = 0;
    unsigned ends_sent = 0;
    std::uint32_t data_packets_sent = 0;
};

struct ReceiveStats {
    std::int64_t t_end_received_us = 0;  // server END observed (response-time stop)
    std::vector<float> merged;
    std::vector<std::uint8_t> chunk_received;  // per chunk
    std::uint32_t chunks_received = 0;
};

class ClientSession {
public:
    explicit ClientSession(ClientConfig cfg)
        : cfg_(cfg),
          sock_(UdpSocket(Endpoint::loopback(cfg.source_port), cfg.recv_buffer), cfg.loss) {}

    ClientState state() const { return state_; }
    Endpoint local_endpoint() const { return sock_.local_endpoint(); }
    const LossyUdpSocket& socket() const { return sock_; }

    void reset() { state_ = ClientState::Idle; }

    // Upload the local parameters. Returns after the server acknowledged the
    // END, i.e. once the server has finished receiving this client.
    SendStats send_locals(std::span<const float> params) {
        if (state_ != ClientState::Idle)
            throw std::logic_error("send_locals requires Idle state");
        if (params.size() != cfg_.layout.param_count)
            throw std::invalid_argument("parameter count does not match layout");
        state_ = ClientState::SendingLocals;
        pending_.clear();
        pending_end_us_ = -1;

        SendStats stats;
        const std::int64_t t0 = now_us();
        const std::int64_t deadline = t0 + us(cfg_.deadline);
        std::array<std::byte, kMaxDatagram> buf;

        // START until START_ACK.
        stats.t_start_sent_us = t0;
        send_control(ControlKind::Start, buf);
        stats.starts_sent = 1;
        std::int64_t last_tx = now_us();
        for (;;) {
            const auto pkt = poll_packet();
            if (pkt) {
                if (auto* ctl = std::get_if<ControlPacket>(&*pkt)) {
                    if (ctl->kind == ControlKind::StartAck) break;
                    // A late END retransmission from the previous round: the
                    // server is still waiting for our final ack, answer it.
                    if (ctl->kind == ControlKind::End) send_control(ControlKind::EndAck, buf);
                }
                continue;  // stale data chunks are dropped
            }
            const std::int64_t now = now_us();
            if (now > deadline) {
                state_ = ClientState::Idle;
                throw RoundTimeout("client " + std::to_string(cfg_.id) + ": no START_ACK");
            }
            if (now - last_tx >= us(cfg_.retransmit_period)) {
                send_control(ControlKind::Start, buf);
                ++stats.starts_sent;
                last_tx = now;
            }
            std::this_thread::sleep_for(std::chrono::microseconds(50));
        }

        // All data chunks in index order, paced.
        unsigned in_burst = 0;
        for (std::uint32_t i = 0; i < cfg_.layout.num_chunks; ++i) {
            const std::size_t off = cfg_.layout.chunk_offset(i);
            const std::size_t len = cfg_.layout.chunk_len(i);
            const std::size_t n = encode_data(i, params.subspan(off, len), buf);
            sock_.send_to({buf.data(), n}, cfg_.server);
            ++stats.data_packets_sent;
            if (++in_burst >= cfg_.send_burst) {
                in_burst = 0;
                std::this_thread::sleep_for(cfg_.send_interval);
            }
        }

        // END until END_ACK.
        send_control(ControlKind::End, buf);
        stats.ends_sent = 1;
        last_tx = now_us();
        for (;;) {
            const auto pkt = poll_packet();
            if (pkt) {
                if (auto* ctl = std::get_if<ControlPacket>(&*pkt)) {
                    if (ctl->kind == ControlKind::EndAck) break;
                    if (ctl->kind == ControlKind::End) {
                        // Past the START_ACK the flow is ordered, so an END
                        // here is this round's global-phase END: our END_ACK
                        // and every global chunk for us were lost. It both
                        // implies the upload ack and closes the (for us
                        // empty) global transfer.
                        pending_end_us_ = now_us();
                        break;
                    }
                } else if (auto* chunk = std::get_if<DataChunk>(&*pkt)) {
                    // Global data implies the server finished receiving us
                    // even though the END_ACK was lost; keep the chunk.
                    pending_.push_back(std::move(*chunk));
                    break;
                }
                continue;
            }
            const std::int64_t now = now_us();
            if (now > deadline) {
                state_ = ClientState::Idle;
                throw RoundTimeout("client " + std::to_string(cfg_.id) + ": no END_ACK");
            }
            if (now - last_tx >= us(cfg_.retransmit_period)) {
                send_control(ControlKind::End, buf);
                ++stats.ends_sent;
                last_tx = now;
            }
            std::this_thread::sleep_for(std::chrono::microseconds(50));
        }
        stats.t_end_acked_us = now_us();
        state_ = ClientState::ReceivingGlobals;
        return stats;
    }

    // After the final round: keep acknowledging retransmitted server ENDs
    // (our END_ACK may have been lost; the server's round only closes once
    // an ack gets through). Returns when `stop` turns true.
    void answer_server_ends(const std::atomic<bool>& stop) {
        std::array<std::byte, kMaxDatagram> buf;
        while (!stop.load(std::memory_order_acquire)) {
            const auto pkt = poll_packet();
            if (pkt) {
                if (auto* ctl = std::get_if<ControlPacket>(&*pkt);
                    ctl && ctl->kind == ControlKind::End)
                    send_control(ControlKind::EndAck, buf);
                continue;
            }
            std::this_thread::sleep_for(std::chrono::microseconds(200));
        }
    }

    // Duration-based variant for standalone processes: returns once no END
    // has arrived for `quiet`.
    void answer_server_ends_for(std::chrono::milliseconds quiet) {
        std::array<std::byte, kMaxDatagram> buf;
        std::int64_t last = now_us();
        while (now_us() - last < us(quiet)) {
            const auto pkt = poll_packet();
            if (pkt) {
                if (auto* ctl = std::get_if<ControlPacket>(&*pkt);
                    ctl && ctl->kind == ControlKind::End) {
                    send_control(ControlKind::EndAck, buf);
                    last = now_us();
                }
                continue;
            }
            std::this_thread::sleep_for(std::chrono::microseconds(200));
        }
    }

    // Collect global chunks until the server's END; chunks that never arrive
    // keep the local values. Replies END_ACK and finishes the round.
    ReceiveStats receive_globals(std::span<const float> local) {
        if (state_ != ClientState::ReceivingGlobals)
            throw std::logic_error("receive_globals requires ReceivingGlobals state");
        if (local.size() != cfg_.layout.param_count)
            throw std::invalid_argument("parameter count does not match layout");

        ReceiveStats stats;
        stats.merged.assign(local.begin(), local.end());
        stats.chunk_received.assign(cfg_.layout.num_chunks, 0);
        const std::int64_t deadline = now_us() + us(cfg_.deadline);
        std::array<std::byte, kMaxDatagram> buf;

        for (DataChunk& chunk : pending_) apply_chunk(stats, chunk);
        pending_.clear();

        if (pending_end_us_ >= 0) {
            // The global END already arrived during the upload tail.
            stats.t_end_received_us = pending_end_us_;
            pending_end_us_ = -1;
            send_control(ControlKind::EndAck, buf);
            state_ = ClientState::Done;
            return stats;
        }

        for (;;) {
            const auto pkt = poll_packet();
            if (pkt) {
                if (auto* chunk = std::get_if<DataChunk>(&*pkt)) {
                    apply_chunk(stats, *chunk);
                } else if (auto* ctl = std::get_if<ControlPacket>(&*pkt)) {
                    if (ctl->kind == ControlKind::End) {
                        stats.t_end_received_us = now_us();
                        send_control(ControlKind::EndAck, buf);
                        break;
                    }
                    // Duplicate START_ACK/END_ACK: stale, ignore.
                }
                continue;
            }
            if (now_us() > deadline) {
                state_ = ClientState::Idle;
                throw RoundTimeout("client " + std::to_string(cfg_.id) + ": no END from server");
            }
            std::this_thread::sleep_for(std::chrono::microseconds(50));
        }
        state_ = ClientState::Done;
        return stats;
    }

private:
    static std::int64_t us(std::chrono::milliseconds ms) {
        return std::chrono::duration_cast<std::chrono::microseconds>(ms).count();
    }
    static std::int64_t us(std::chrono::microseconds u) { return u.count(); }

    void send_control(ControlKind kind, std::array<std::byte, kMaxDatagram>& buf) {
        const std::size_t n = encode_control(kind, buf);
        sock_.send_to({buf.data(), n}, cfg_.server);
    }

    std::optional<Packet> poll_packet() {
        std::array<std::byte, kMaxDatagram> buf;
        Endpoint src;
        const auto n = sock_.poll_recv(buf, &src);
        if (!n) return std::nullopt;
        if (src != cfg_.server) return std::nullopt;  // not our server, drop
        DecodeResult r = decode({buf.data(), *n});
        if (std::holds_alternative<DecodeError>(r)) return std::nullopt;
        if (auto* chunk = std::get_if<DataChunk>(&r)) return Packet{std::move(*chunk)};
        return Packet{std::get<ControlPacket>(r)};
    }

    void apply_chunk(ReceiveStats& stats, const DataChunk& chunk) {
        if (!cfg_.layout.valid_index(chunk.index)) return;
        if (chunk.values.size() != cfg_.layout.chunk_len(chunk.index)) return;
        const std::size_t off = cfg_.layout.chunk_offset(chunk.index);
        std::copy(chunk.values.begin(), chunk.values.end(), stats.merged.begin() + off);
        if (!stats.chunk_received[chunk.index]) {
            stats.chunk_received[chunk.index] = 1;
            ++stats.chunks_received;
        }
    }

    ClientConfig cfg_;
    LossyUdpSocket sock_;
    ClientState state_ = ClientState::Idle;
    std::vector<DataChunk> pending_;   // globals that arrived before our END_ACK
    std::int64_t pending_end_us_ = -1;  // global END seen during the upload tail
};

}  // namespace fedpipe
