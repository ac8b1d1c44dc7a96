#pragma once
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <system_error>

#include "fedpipe/rng.hpp"
#include "fedpipe/wire.hpp"

// Datagram endpoint over plain nonblocking UDP sockets. The receive side is
// meant to be busy-polled by a single stage; a large receive buffer stands
// in for NIC-queue polling so the kernel does not drop bursts between polls.
namespace fedpipe {

struct Endpoint {
    std::uint32_t addr = 0;  // IPv4, host order
    std::uint16_t port = 0;

    bool operator==(const Endpoint&) const = default;

    static Endpoint loopback(std::uint16_t port) { return {0x7f000001u, port}; }

    static Endpoint parse(const std::string& s) {
        const auto colon = s.rfind(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("endpoint must be addr:port, got '" + s + "'");
        in_addr a{};
        const std::string host = s.substr(0, colon);
        if (inet_pton(AF_INET, host.c_str(), &a) != 1)
            throw std::invalid_argument("bad IPv4 address '" + host + "'");
        const long port = std::stol(s.substr(colon + 1));
        if (port < 0 || port > 65535)
            throw std::invalid_argument("bad port in '" + s + "'");
        return {ntohl(a.s_addr), static_cast<std::uint16_t>(port)};
    }

    std::string to_string() const {
        char buf[INET_ADDRSTRLEN];
        in_addr a{htonl(addr)};
        inet_ntop(AF_INET, &a, buf, sizeof(buf));
        return std::string(buf) + ":" + std::to_string(port);
    }

    sockaddr_in to_sockaddr() const {
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_addr.s_addr = htonl(addr);
        sa.sin_port = htons(port);
        return sa;
    }

    static Endpoint from_sockaddr(const sockaddr_in& sa) {
        return {ntohl(sa.sin_addr.s_addr), ntohs(sa.sin_port)};
    }
};

struct RawDatagram {
    Endpoint source;
    std::uint16_t len = 0;
    std::array<std::byte, kMaxDatagram> bytes;

    std::span<const std::byte> payload() const { return {bytes.data(), len}; }
};

class UdpSocket {
public:
    UdpSocket() = default;

    explicit UdpSocket(const Endpoint& bind_to, std::size_t recv_buffer = 4u << 20) {
        fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_NONBLOCK, 0);
        if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
        int buf = static_cast<int>(recv_buffer);
        // FORCE (root) may exceed rmem_max; fall back to the capped request.
        if (::setsockopt(fd_, SOL_SOCKET, SO_RCVBUFFORCE, &buf, sizeof(buf)) != 0)
            ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
        sockaddr_in sa = bind_to.to_sockaddr();
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
            const int e = errno;
            ::close(fd_);
            fd_ = -1;
            throw std::system_error(e, std::generic_category(),
                                    "bind " + bind_to.to_string());
        }
    }

    ~UdpSocket() { reset(); }

    UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    UdpSocket& operator=(UdpSocket&& other) noexcept {
        if (this != &other) {
            reset();
            fd_ = other.fd_;
            other.fd_ = -1;
        }
        return *this;
    }

    bool valid() const { return fd_ >= 0; }

    Endpoint local_endpoint() const {
        sockaddr_in sa{};
        socklen_t len = sizeof(sa);
        if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) != 0)
            throw std::system_error(errno, std::generic_category(), "getsockname");
        return Endpoint::from_sockaddr(sa);
    }

    // Fire-and-forget. Buffer-full and ICMP-unreachable feedback are treated
    // like loss, which is what the protocol already tolerates.
    void send_to(std::span<const std::byte> datagram, const Endpoint& dest) {
        sockaddr_in sa = dest.to_sockaddr();
        const ssize_t n = ::sendto(fd_, datagram.data(), datagram.size(), 0,
                                   reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
        if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != ECONNREFUSED &&
            errno != ENOBUFS && errno != EPERM)
            throw std::system_error(errno, std::generic_category(), "sendto");
    }

    // Nonblocking receive of one datagram.
    std::optional<std::size_t> poll_recv(std::span<std::byte> buf, Endpoint* source = nullptr) {
        sockaddr_in sa{};
        socklen_t salen = sizeof(sa);
        const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), MSG_DONTWAIT,
                                     reinterpret_cast<sockaddr*>(&sa), &salen);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == ECONNREFUSED)
                return std::nullopt;
            throw std::system_error(errno, std::generic_category(), "recvfrom");
        }
        if (source) *source = Endpoint::from_sockaddr(sa);
        return static_cast<std::size_t>(n);
    }

    // Batched receive (recvmmsg); returns number of datagrams filled.
    std::size_t poll_recv_batch(RawDatagram* out, std::size_t max) {
        if (max == 0) return 0;
        constexpr std::size_t kBatchCap = 64;
        if (max > kBatchCap) max = kBatchCap;
        mmsghdr msgs[kBatchCap];
        iovec iovs[kBatchCap];
        sockaddr_in addrs[kBatchCap];
        std::memset(msgs, 0, sizeof(mmsghdr) * max);
        for (std::size_t i = 0; i < max; ++i) {
            iovs[i] = {out[i].bytes.data(), out[i].bytes.size()};
            msgs[i].msg_hdr.msg_iov = &iovs[i];
            msgs[i].msg_hdr.msg_iovlen = 1;
            msgs[i].msg_hdr.msg_name = &addrs[i];
            msgs[i].msg_hdr.msg_namelen = sizeof(sockaddr_in);
        }
        const int n = ::recvmmsg(fd_, msgs, static_cast<unsigned>(max), MSG_DONTWAIT, nullptr);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == ECONNREFUSED) return 0;
            throw std::system_error(errno, std::generic_category(), "recvmmsg");
        }
        for (int i = 0; i < n; ++i) {
            out[i].len = static_cast<std::uint16_t>(msgs[i].msg_len);
            out[i].source = Endpoint::from_sockaddr(addrs[i]);
        }
        return static_cast<std::size_t>(n);
    }

private:
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

    int fd_ = -1;
};

enum class LossDirection { Outbound, Inbound, Both };

// Deterministic Bernoulli loss: the decision for packet ordinal n is a pure
// function of (seed, n), so a trace can be replayed offline to reconstruct
// exactly which packets were delivered.
struct LossPolicy {
    double drop_rate = 0.0;
    std::uint64_t seed = 0;
    LossDirection direction = LossDirection::Both;

    static constexpr std::uint64_t kInboundSalt = 0xd1b54a32d192ed03ull;
    static constexpr double kResolution = 16777216.0;  // 2^24

    static bool drops(std::uint64_t seed, std::uint64_t ordinal, double rate) {
        const std::uint64_t z = SplitMix64::at(seed, ordinal);
        return static_cast<double>(z & 0xffffffu) / kResolution < rate;
    }

    bool enabled() const { return drop_rate > 0.0; }
    bool applies_outbound() const {
        return enabled() && direction != LossDirection::Inbound;
    }
    bool applies_inbound() const {
        return enabled() && direction != LossDirection::Outbound;
    }
};

// Socket wrapper that drops packets per LossPolicy. Outbound decisions use
// the seed directly (ordinal = send count); inbound uses seed ^ kInboundSalt
// so the two streams are independent. Delivered packets keep their order.
class LossyUdpSocket {
public:
    LossyUdpSocket() = default;
    LossyUdpSocket(UdpSocket socket, LossPolicy policy)
        : sock_(std::move(socket)), policy_(policy) {}

    UdpSocket& raw() { return sock_; }
    const LossPolicy& policy() const { return policy_; }
    Endpoint local_endpoint() const { return sock_.local_endpoint(); }

    void send_to(std::span<const std::byte> datagram, const Endpoint& dest) {
        if (policy_.applies_outbound() &&
            LossPolicy::drops(policy_.seed, out_ordinal_++, policy_.drop_rate)) {
            ++dropped_out_;
            return;
        }
        sock_.send_to(datagram, dest);
    }

    std::optional<std::size_t> poll_recv(std::span<std::byte> buf, Endpoint* source = nullptr) {
        for (;;) {
            auto n = sock_.poll_recv(buf, source);
            if (!n) return std::nullopt;
            if (policy_.applies_inbound() &&
                LossPolicy::drops(policy_.seed ^ LossPolicy::kInboundSalt, in_ordinal_++,
                                  policy_.drop_rate)) {
                ++dropped_in_;
                continue;
            }
            return n;
        }
    }

    std::size_t poll_recv_batch(RawDatagram* out, std::size_t max) {
        const std::size_t n = sock_.poll_recv_batch(out, max);
        if (!policy_.applies_inbound()) return n;
        std::size_t kept = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (LossPolicy::drops(policy_.seed ^ LossPolicy::kInboundSalt, in_ordinal_++,
                                  policy_.drop_rate)) {
                ++dropped_in_;
                continue;
            }
            if (kept != i) out[kept] = out[i];
            ++kept;
        }
        return kept;
    }

    std::uint64_t sent_ordinals() const { return out_ordinal_; }
    std::uint64_t dropped_outbound() const { return dropped_out_; }
    std::uint64_t dropped_inbound() const { return dropped_in_; }

private:
    UdpSocket sock_;
    LossPolicy policy_;
    std::uint64_t out_ordinal_ = 0;
    std::uint64_t in_ordinal_ = 0;
    std::uint64_t dropped_out_ = 0;
    std::uint64_t dropped_in_ = 0;
};

}  // namespace fedpipe
