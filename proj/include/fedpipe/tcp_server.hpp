#pragma once
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "fedpipe/aggregator.hpp"
#include "fedpipe/metrics.hpp"
#include "fedpipe/server.hpp"
#include "fedpipe/transport.hpp"

// Baseline server: one handler thread per TCP connection, the whole vector
// as a single length-prefixed frame, lock-free accumulation under the same
// mode discipline as the UDP pipeline, and a mutex/condition_variable wait
// for the single divider. TCP handles loss itself, so every completed
// connection contributes to every chunk's divisor; a client that resets
// mid-transfer is excluded entirely.
namespace fedpipe {

namespace tcpio {

// 4-byte little-endian length prefix, then the body.
inline bool write_all(int fd, const std::byte* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        const ssize_t n = ::send(fd, data + off, len - off, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK)) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

inline bool write_frame(int fd, std::span<const std::byte> body) {
    std::byte prefix[4];
    put_u32le(prefix, static_cast<std::uint32_t>(body.size()));
    return write_all(fd, prefix, 4) && write_all(fd, body.data(), body.size());
}

inline bool read_all(int fd, std::byte* data, std::size_t len, std::int64_t deadline_us_abs) {
    std::size_t off = 0;
    while (off < len) {
        const std::int64_t remain = deadline_us_abs - now_us();
        if (remain <= 0) return false;
        pollfd pfd{fd, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(remain / 1000 + 1, 1000)));
        if (pr < 0 && errno != EINTR) return false;
        if (pr <= 0) continue;
        const ssize_t n = ::recv(fd, data + off, len - off, 0);
        if (n == 0) return false;  // peer closed: partial frame, drop
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

inline bool read_frame(int fd, std::vector<std::byte>& body, std::size_t max_len,
                       std::int64_t deadline_us_abs) {
    std::byte prefix[4];
    if (!read_all(fd, prefix, 4, deadline_us_abs)) return false;
    const std::uint32_t len = get_u32le(prefix);
    if (len > max_len) return false;
    body.resize(len);
    return read_all(fd, body.data(), len, deadline_us_abs);
}

inline std::vector<std::byte> pack_params(std::span<const float> params) {
    std::vector<std::byte> body(params.size() * 4);
    for (std::size_t i = 0; i < params.size(); ++i) put_f32le(body.data() + 4 * i, params[i]);
    return body;
}

inline std::vector<float> unpack_params(std::span<const std::byte> body) {
    std::vector<float> params(body.size() / 4);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] = get_f32le(body.data() + 4 * i);
    return params;
}

}  // namespace tcpio

struct TcpServerConfig {
    unsigned n_clients = 1;
    ChunkLayout layout{kChunkCapacity, kChunkCapacity};
    AggMode mode = AggMode::Exact;
    Endpoint bind = Endpoint::loopback(0);
    std::chrono::milliseconds round_deadline{30000};
};

class TcpBaselineServer {
public:
    explicit TcpBaselineServer(TcpServerConfig cfg)
        : cfg_(cfg), acc_(cfg.layout, cfg.mode, cfg.n_clients) {
        fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK, 0);
        if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in sa = cfg.bind.to_sockaddr();
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
            const int e = errno;
            ::close(fd_);
            throw std::system_error(e, std::generic_category(), "bind " + cfg.bind.to_string());
        }
        if (::listen(fd_, static_cast<int>(cfg.n_clients) + 8) != 0) {
            const int e = errno;
            ::close(fd_);
            throw std::system_error(e, std::generic_category(), "listen");
        }
    }

    ~TcpBaselineServer() {
        if (fd_ >= 0) ::close(fd_);
    }

    Endpoint local_endpoint() const {
        sockaddr_in sa{};
        socklen_t len = sizeof(sa);
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
        return Endpoint::from_sockaddr(sa);
    }

    const Accumulator& accumulator() const { return acc_; }

    RoundResult run_round(int round_index) {
        acc_.reset();
        Shared sh;
        sh.expected = cfg_.n_clients;
        const std::int64_t t_round_start = now_us();
        const std::int64_t deadline = t_round_start +
            std::chrono::duration_cast<std::chrono::microseconds>(cfg_.round_deadline).count();

        std::vector<std::thread> handlers;
        unsigned accepted = 0;
        while (accepted < cfg_.n_clients && now_us() < deadline) {
            sockaddr_in peer{};
            socklen_t plen = sizeof(peer);
            const int cfd = ::accept(fd_, reinterpret_cast<sockaddr*>(&peer), &plen);
            if (cfd < 0) {
                if (errno == EAGAIN || errno == EWOULDBLOCK) {
                    std::this_thread::sleep_for(std::chrono::microseconds(100));
                    continue;
                }
                throw std::system_error(errno, std::generic_category(), "accept");
            }
            if (accepted == 0) sh.t_first_accept.store(now_us() - t_round_start);
            ++accepted;
            handlers.emplace_back([this, cfd, &sh, t_round_start, deadline] {
                handle_connection(cfd, sh, t_round_start, deadline);
            });
        }
        const bool all_accepted = accepted == cfg_.n_clients;
        if (!all_accepted) {
            // Missing connections never contribute; let the present ones run.
            std::lock_guard lock(sh.mu);
            sh.expected -= cfg_.n_clients - accepted;
            sh.cv.notify_all();
        }
        for (auto& t : handlers) t.join();

        RoundResult result;
        RoundReport& rep = result.report;
        rep.round = round_index;
        rep.aborted = !all_accepted && accepted == 0;
        if (!all_accepted)
            rep.abort_reason = "accepted " + std::to_string(accepted) + "/" +
                               std::to_string(cfg_.n_clients) + " connections";
        rep.t_first_start_us = sh.t_first_accept.load();
        rep.t_all_ends_us = sh.t_all_received.load();
        rep.t_divide_done_us = sh.t_divide_done.load();
        rep.t_send_done_us = now_us() - t_round_start;
        if (rep.t_first_start_us >= 0 && rep.t_all_ends_us >= 0)
            rep.receive_us = rep.t_all_ends_us - rep.t_first_start_us;
        if (rep.t_all_ends_us >= 0 && rep.t_divide_done_us >= 0)
            rep.compute_us = rep.t_divide_done_us - rep.t_all_ends_us;
        if (rep.t_divide_done_us >= 0) rep.send_us = rep.t_send_done_us - rep.t_divide_done_us;
        rep.contrib_counts = acc_.contrib_counts();
        rep.client_chunks_received.assign(cfg_.n_clients, 0);
        {
            std::lock_guard lock(sh.mu);
            result.globals = std::move(sh.globals);
        }
        return result;
    }

private:
    struct Shared {
        std::mutex mu;
        std::condition_variable cv;
        unsigned expected = 0;  // live connections; failures decrement
        unsigned added = 0;     // handlers that finished accumulating
        bool divider_claimed = false;
        bool divided = false;
        GlobalParams globals;
        std::atomic<std::int64_t> t_first_accept{-1};
        std::atomic<std::int64_t> t_all_received{-1};
        std::atomic<std::int64_t> t_divide_done{-1};
    };

    void handle_connection(int cfd, Shared& sh, std::int64_t t_round_start,
                           std::int64_t deadline) {
        std::vector<std::byte> body;
        const bool got =
            tcpio::read_frame(cfd, body, cfg_.layout.param_count * 4 + 16, deadline) &&
            body.size() == cfg_.layout.param_count * 4;
        if (got) {
            const std::vector<float> params = tcpio::unpack_params(body);
            for (std::uint32_t i = 0; i < cfg_.layout.num_chunks; ++i) {
                acc_.add_chunk(i, {params.data() + cfg_.layout.chunk_offset(i),
                                   cfg_.layout.chunk_len(i)});
            }
        }
        if (!got) {
            // Reset or partial frame: this client is excluded from every
            // chunk's divisor; wake waiters so the barrier count drops.
            std::lock_guard lock(sh.mu);
            --sh.expected;
            sh.cv.notify_all();
            ::close(cfd);
            return;
        }
        // Reception barrier: exactly one handler claims the division once
        // every live handler has finished adding, the rest wait.
        bool divider = false;
        {
            std::unique_lock lock(sh.mu);
            ++sh.added;
            sh.cv.notify_all();
            sh.cv.wait(lock, [&] { return sh.added >= sh.expected; });
            if (!sh.divider_claimed) {
                sh.divider_claimed = true;
                divider = true;
                sh.t_all_received.store(now_us() - t_round_start);
            }
        }
        if (divider) {
            GlobalParams g = acc_.divide();
            std::lock_guard lock(sh.mu);
            sh.globals = std::move(g);
            sh.t_divide_done.store(now_us() - t_round_start);
            sh.divided = true;
            sh.cv.notify_all();
        } else {
            std::unique_lock lock(sh.mu);
            sh.cv.wait(lock, [&] { return sh.divided; });
        }
        std::vector<std::byte> out;
        {
            std::lock_guard lock(sh.mu);
            out = tcpio::pack_params(sh.globals.values);
        }
        tcpio::write_frame(cfd, out);
        ::close(cfd);
    }

    TcpServerConfig cfg_;
    Accumulator acc_;
    int fd_ = -1;
};

// Client side of one TCP round: connect, upload the vector as one frame,
// block for the averaged vector.
inline std::optional<std::vector<float>> tcp_client_round(const Endpoint& server,
                                                          std::span<const float> params,
                                                          std::chrono::milliseconds deadline =
                                                              std::chrono::milliseconds(30000)) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return std::nullopt;
    sockaddr_in sa = server.to_sockaddr();
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        ::close(fd);
        return std::nullopt;
    }
    const std::int64_t abs_deadline =
        now_us() + std::chrono::duration_cast<std::chrono::microseconds>(deadline).count();
    std::vector<std::byte> frame = tcpio::pack_params(params);
    if (!tcpio::write_frame(fd, frame)) {
        ::close(fd);
        return std::nullopt;
    }
    std::vector<std::byte> reply;
    if (!tcpio::read_frame(fd, reply, params.size() * 4 + 16, abs_deadline) ||
        reply.size() != params.size() * 4) {
        ::close(fd);
        return std::nullopt;
    }
    ::close(fd);
    return tcpio::unpack_params(reply);
}

}  // namespace fedpipe
