#pragma once
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

// UDP payload format. Two packet shapes share one decode path keyed on the
// leading 4-byte word:
//
//   data:    [index u32le][values f32le x 1..367]      (<= 1472 bytes)
//   control: [0xFFFFFFFF][kind u32le]                  (exactly 8 bytes)
//
// Index words at or above 0xFFFFFF00 are reserved for control, so a data
// chunk index never collides with the sentinel. 367 values of 4 bytes plus
// the index word fill a 1500-byte MTU minus 20B IP and 8B UDP headers.
// All words little-endian.
namespace fedpipe {

inline constexpr std::size_t kChunkCapacity = 367;
inline constexpr std::size_t kMaxDatagram = 4 + 4 * kChunkCapacity;  // 1472
inline constexpr std::size_t kControlPacketSize = 8;
inline constexpr std::uint32_t kControlIndexBase = 0xffffff00u;
inline constexpr std::uint32_t kControlSentinel = 0xffffffffu;

enum class ControlKind : std::uint32_t {
    Start = 0,
    StartAck = 1,
    End = 2,
    EndAck = 3,
};

struct DataChunk {
    std::uint32_t index = 0;
    std::vector<float> values;
    bool operator==(const DataChunk&) const = default;
};

struct ControlPacket {
    ControlKind kind = ControlKind::Start;
    bool operator==(const ControlPacket&) const = default;
};

using Packet = std::variant<DataChunk, ControlPacket>;

enum class DecodeError {
    TooShort,          // fewer than 4 bytes
    BadDataLength,     // not 4 + 4k, k in 1..367
    BadControlLength,  // control word but size != 8
    BadSentinel,       // index in control range but not the sentinel
    UnknownControlKind,
};

using DecodeResult = std::variant<DataChunk, ControlPacket, DecodeError>;

inline void put_u32le(std::byte* p, std::uint32_t v) {
    p[0] = static_cast<std::byte>(v & 0xff);
    p[1] = static_cast<std::byte>((v >> 8) & 0xff);
    p[2] = static_cast<std::byte>((v >> 16) & 0xff);
    p[3] = static_cast<std::byte>((v >> 24) & 0xff);
}

inline std::uint32_t get_u32le(const std::byte* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32le(std::byte* p, float v) { put_u32le(p, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32le(const std::byte* p) { return std::bit_cast<float>(get_u32le(p)); }

// Encodes a data chunk into `out`; returns bytes written.
inline std::size_t encode_data(std::uint32_t index, std::span<const float> values,
                               std::span<std::byte> out) {
    if (values.empty() || values.size() > kChunkCapacity)
        throw std::invalid_argument("encode_data: value count must be 1..367");
    if (index >= kControlIndexBase)
        throw std::invalid_argument("encode_data: index in control range");
    const std::size_t n = 4 + 4 * values.size();
    if (out.size() < n) throw std::invalid_argument("encode_data: buffer too small");
    put_u32le(out.data(), index);
    for (std::size_t i = 0; i < values.size(); ++i)
        put_f32le(out.data() + 4 + 4 * i, values[i]);
    return n;
}

inline std::vector<std::byte> encode_data(const DataChunk& chunk) {
    std::vector<std::byte> buf(4 + 4 * chunk.values.size());
    encode_data(chunk.index, chunk.values, buf);
    return buf;
}

inline std::size_t encode_control(ControlKind kind, std::span<std::byte> out) {
    if (out.size() < kControlPacketSize)
        throw std::invalid_argument("encode_control: buffer too small");
    put_u32le(out.data(), kControlSentinel);
    put_u32le(out.data() + 4, static_cast<std::uint32_t>(kind));
    return kControlPacketSize;
}

inline std::vector<std::byte> encode_control(ControlKind kind) {
    std::vector<std::byte> buf(kControlPacketSize);
    encode_control(kind, buf);
    return buf;
}

// Zero-copy classification used on the receive path. `payload` aliases the
// datagram, so it is only valid while the datagram buffer lives.
struct DataView {
    std::uint32_t index;
    std::size_t count;
    const std::byte* payload;

    float value(std::size_t i) const { return get_f32le(payload + 4 * i); }
    void copy_values(float* out) const {
        for (std::size_t i = 0; i < count; ++i) out[i] = value(i);
    }
};

using ClassifyResult = std::variant<DataView, ControlPacket, DecodeError>;

inline ClassifyResult classify(std::span<const std::byte> datagram) {
    if (datagram.size() < 4) return DecodeError::TooShort;
    const std::uint32_t head = get_u32le(datagram.data());
    if (head >= kControlIndexBase) {
        if (datagram.size() != kControlPacketSize) return DecodeError::BadControlLength;
        if (head != kControlSentinel) return DecodeError::BadSentinel;
        const std::uint32_t kind = get_u32le(datagram.data() + 4);
        if (kind > static_cast<std::uint32_t>(ControlKind::EndAck))
            return DecodeError::UnknownControlKind;
        return ControlPacket{static_cast<ControlKind>(kind)};
    }
    const std::size_t body = datagram.size() - 4;
    if (body == 0 || body % 4 != 0 || body / 4 > kChunkCapacity)
        return DecodeError::BadDataLength;
    return DataView{head, body / 4, datagram.data() + 4};
}

inline DecodeResult decode(std::span<const std::byte> datagram) {
    ClassifyResult c = classify(datagram);
    if (auto* err = std::get_if<DecodeError>(&c)) return *err;
    if (auto* ctl = std::get_if<ControlPacket>(&c)) return *ctl;
    const DataView& view = std::get<DataView>(c);
    DataChunk chunk;
    chunk.index = view.index;
    chunk.values.resize(view.count);
    view.copy_values(chunk.values.data());
    return chunk;
}

// Maps a flat parameter vector of `param_count` elements onto fixed-size
// chunks. Chunk i covers elements [i*capacity, min((i+1)*capacity, P)).
struct ChunkLayout {
    std::size_t param_count = 0;
    std::size_t chunk_capacity = kChunkCapacity;
    std::size_t num_chunks = 0;
    std::size_t last_chunk_len = 0;

    ChunkLayout() = default;
    ChunkLayout(std::size_t params, std::size_t capacity = kChunkCapacity)
        : param_count(params), chunk_capacity(capacity) {
        if (params < 1) throw std::invalid_argument("ChunkLayout: param_count must be >= 1");
        if (capacity < 1) throw std::invalid_argument("ChunkLayout: capacity must be >= 1");
        num_chunks = (params + capacity - 1) / capacity;
        last_chunk_len = params - capacity * (num_chunks - 1);
    }

    std::size_t chunk_offset(std::uint32_t i) const { return std::size_t{i} * chunk_capacity; }
    std::size_t chunk_len(std::uint32_t i) const {
        return i + 1 == num_chunks ? last_chunk_len : chunk_capacity;
    }
    bool valid_index(std::uint32_t i) const { return i < num_chunks; }

    bool operator==(const ChunkLayout&) const = default;
};

inline ChunkLayout chunk_layout(std::size_t param_count,
                                std::size_t capacity = kChunkCapacity) {
    return ChunkLayout(param_count, capacity);
}

}  // namespace fedpipe
