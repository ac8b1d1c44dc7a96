#include "fedpipe/wire.hpp"

#include <gtest/gtest.h>

#include "fedpipe/rng.hpp"

using namespace fedpipe;

TEST(Wire, FullChunkFillsMtu) {
    DataChunk chunk;
    chunk.index = 0;
    chunk.values.assign(367, 1.25f);
    const auto bytes = encode_data(chunk);
    EXPECT_EQ(bytes.size(), 1472u);
    EXPECT_EQ(bytes.size(), kMaxDatagram);
}

TEST(Wire, SingleValueRoundTrip) {
    DataChunk chunk;
    chunk.index = 5;
    chunk.values = {1.0f};
    const auto bytes = encode_data(chunk);
    EXPECT_EQ(bytes.size(), 8u);
    const DecodeResult r = decode(bytes);
    ASSERT_TRUE(std::holds_alternative<DataChunk>(r));
    EXPECT_EQ(std::get<DataChunk>(r), chunk);
}

TEST(Wire, ControlSentinelBytes) {
    // Literal wire layout: sentinel word then kind word, little-endian.
    const std::uint8_t raw[8] = {0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x00};
    const DecodeResult r = decode(std::as_bytes(std::span(raw)));
    ASSERT_TRUE(std::holds_alternative<ControlPacket>(r));
    EXPECT_EQ(std::get<ControlPacket>(r).kind, ControlKind::Start);
}

TEST(Wire, ControlKindsBijective) {
    for (const ControlKind kind : {ControlKind::Start, ControlKind::StartAck,
                                   ControlKind::End, ControlKind::EndAck}) {
        const auto bytes = encode_control(kind);
        EXPECT_EQ(bytes.size(), kControlPacketSize);
        const DecodeResult r = decode(bytes);
        ASSERT_TRUE(std::holds_alternative<ControlPacket>(r));
        EXPECT_EQ(std::get<ControlPacket>(r).kind, kind);
    }
}

TEST(Wire, DecodeErrors) {
    auto expect_err = [](std::span<const std::uint8_t> raw, DecodeError want) {
        const DecodeResult r = decode(std::as_bytes(raw));
        ASSERT_TRUE(std::holds_alternative<DecodeError>(r));
        EXPECT_EQ(std::get<DecodeError>(r), want);
    };
    const std::uint8_t short3[3] = {1, 2, 3};
    expect_err(short3, DecodeError::TooShort);
    const std::uint8_t five[5] = {0, 0, 0, 0, 9};
    expect_err(five, DecodeError::BadDataLength);
    const std::uint8_t index_only[4] = {1, 0, 0, 0};
    expect_err(index_only, DecodeError::BadDataLength);
    const std::uint8_t ctl_long[12] = {0xff, 0xff, 0xff, 0xff, 0, 0, 0, 0, 0, 0, 0, 0};
    expect_err(ctl_long, DecodeError::BadControlLength);
    const std::uint8_t bad_sentinel[8] = {0x00, 0xff, 0xff, 0xff, 0, 0, 0, 0};
    expect_err(bad_sentinel, DecodeError::BadSentinel);
    const std::uint8_t bad_kind[8] = {0xff, 0xff, 0xff, 0xff, 4, 0, 0, 0};
    expect_err(bad_kind, DecodeError::UnknownControlKind);
    // An oversize data payload never comes out of encode, but the network
    // can hand us anything; 368 values exceeds the chunk capacity.
    std::vector<std::uint8_t> oversize(4 + 4 * 368, 0);
    expect_err(oversize, DecodeError::BadDataLength);
}

TEST(Wire, EncodeRejectsBadChunks) {
    std::array<std::byte, kMaxDatagram> buf;
    const std::vector<float> one(1, 0.0f);
    const std::vector<float> oversize(368, 0.0f);
    EXPECT_THROW(encode_data(0, {one.data(), 0}, buf), std::invalid_argument);
    EXPECT_THROW(encode_data(0, oversize, buf), std::invalid_argument);
    EXPECT_THROW(encode_data(kControlIndexBase, one, buf), std::invalid_argument);
}

TEST(Wire, FuzzRoundTrip) {
    SplitMix64 rng(0x5eed);
    for (int iter = 0; iter < 5000; ++iter) {
        if (rng.next_below(8) == 0) {
            const auto kind = static_cast<ControlKind>(rng.next_below(4));
            const DecodeResult r = decode(encode_control(kind));
            ASSERT_TRUE(std::holds_alternative<ControlPacket>(r));
            EXPECT_EQ(std::get<ControlPacket>(r).kind, kind);
            continue;
        }
        DataChunk chunk;
        chunk.index = static_cast<std::uint32_t>(rng.next_below(kControlIndexBase));
        chunk.values.resize(1 + rng.next_below(367));
        for (auto& v : chunk.values)
            v = std::bit_cast<float>(static_cast<std::uint32_t>(rng.next()));
        const auto bytes = encode_data(chunk);
        ASSERT_LE(bytes.size(), kMaxDatagram);
        const DecodeResult r = decode(bytes);
        ASSERT_TRUE(std::holds_alternative<DataChunk>(r));
        const DataChunk& back = std::get<DataChunk>(r);
        EXPECT_EQ(back.index, chunk.index);
        ASSERT_EQ(back.values.size(), chunk.values.size());
        for (std::size_t i = 0; i < chunk.values.size(); ++i) {
            // Bit-exact, including NaN payloads.
            EXPECT_EQ(std::bit_cast<std::uint32_t>(back.values[i]),
                      std::bit_cast<std::uint32_t>(chunk.values[i]));
        }
    }
}

TEST(ChunkLayoutTest, ExactFit) {
    const ChunkLayout l(367, 367);
    EXPECT_EQ(l.num_chunks, 1u);
    EXPECT_EQ(l.last_chunk_len, 367u);
}

TEST(ChunkLayoutTest, OneElementSpill) {
    const ChunkLayout l(368, 367);
    EXPECT_EQ(l.num_chunks, 2u);
    EXPECT_EQ(l.last_chunk_len, 1u);
}

TEST(ChunkLayoutTest, PaperScale) {
    const ChunkLayout l(2'000'000, 367);
    EXPECT_EQ(l.num_chunks, 5450u);
    EXPECT_EQ(l.last_chunk_len, 217u);
}

TEST(ChunkLayoutTest, Preconditions) {
    EXPECT_THROW(ChunkLayout(0, 367), std::invalid_argument);
    EXPECT_THROW(ChunkLayout(10, 0), std::invalid_argument);
}

TEST(ChunkLayoutTest, CoveragePartitionsRange) {
    SplitMix64 rng(17);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t p = 1 + rng.next_below(100'000);
        const std::size_t cap = 1 + rng.next_below(367);
        const ChunkLayout l(p, cap);
        std::size_t covered = 0;
        for (std::uint32_t i = 0; i < l.num_chunks; ++i) {
            EXPECT_EQ(l.chunk_offset(i), covered);
            EXPECT_GE(l.chunk_len(i), 1u);
            EXPECT_LE(l.chunk_len(i), cap);
            covered += l.chunk_len(i);
        }
        EXPECT_EQ(covered, p);
    }
}
