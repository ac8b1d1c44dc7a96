#pragma once
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "fedpipe/wire.hpp"

namespace fedpipe {

// Exact: every element update is an atomic read-modify-write, so concurrent
// adds never lose a contribution. Approximate: read, add and write are
// separate relaxed word accesses; concurrent adds to the same element may
// lose updates but values are never torn.
enum class AggMode { Exact, Approximate };

struct GlobalParams {
    ChunkLayout layout;
    std::vector<float> values;           // length P; absent chunks stay 0
    std::vector<std::uint8_t> present;   // per chunk: contributor count > 0
    std::vector<std::uint16_t> counts;   // per chunk contributor count

    bool chunk_present(std::uint32_t i) const { return present[i] != 0; }
};

// Shared accumulation state for one round: a flat float sum array plus one
// contributor counter per chunk. A chunk's counter is its divisor; a chunk
// whose packet was lost for some client simply never gets that client's
// add, so the element-wise mean stays correct over the delivered set.
class Accumulator {
public:
    Accumulator(ChunkLayout layout, AggMode mode, unsigned n_clients)
        : layout_(layout),
          mode_(mode),
          n_clients_(n_clients),
          sums_(layout.param_count, 0.0f),
          counts_(layout.num_chunks, 0) {}

    const ChunkLayout& layout() const { return layout_; }
    AggMode mode() const { return mode_; }
    unsigned n_clients() const { return n_clients_; }

    // Single-threaded, between rounds.
    void reset() {
        std::fill(sums_.begin(), sums_.end(), 0.0f);
        std::fill(counts_.begin(), counts_.end(), 0);
    }

    // Callable concurrently from any number of worker threads. Returns false
    // (and leaves the state untouched) for an invalid index or length.
    bool add_chunk(std::uint32_t chunk_index, std::span<const float> values) {
        if (!layout_.valid_index(chunk_index)) return false;
        if (values.size() != layout_.chunk_len(chunk_index)) return false;
        float* dst = sums_.data() + layout_.chunk_offset(chunk_index);
        if (mode_ == AggMode::Exact) {
            for (std::size_t i = 0; i < values.size(); ++i)
                std::atomic_ref<float>(dst[i]).fetch_add(values[i], std::memory_order_relaxed);
        } else {
            for (std::size_t i = 0; i < values.size(); ++i) {
                std::atomic_ref<float> cell(dst[i]);
                cell.store(cell.load(std::memory_order_relaxed) + values[i],
                           std::memory_order_relaxed);
            }
        }
        // The divisor is bookkeeping, not parameter data: a corrupted count
        // would bias a whole chunk, so it is indivisible in both modes.
        std::atomic_ref<std::uint16_t>(counts_[chunk_index])
            .fetch_add(1, std::memory_order_relaxed);
        return true;
    }

    // Call from exactly one thread, after all adds happened-before it.
    GlobalParams divide() const {
        GlobalParams g;
        g.layout = layout_;
        g.values.assign(layout_.param_count, 0.0f);
        g.present.assign(layout_.num_chunks, 0);
        g.counts.assign(counts_.begin(), counts_.end());
        for (std::uint32_t c = 0; c < layout_.num_chunks; ++c) {
            const std::uint16_t k = counts_[c];
            if (k == 0) continue;
            g.present[c] = 1;
            const std::size_t off = layout_.chunk_offset(c);
            const std::size_t len = layout_.chunk_len(c);
            const float divisor = static_cast<float>(k);
            for (std::size_t i = 0; i < len; ++i) g.values[off + i] = sums_[off + i] / divisor;
        }
        return g;
    }

    std::uint16_t contrib_count(std::uint32_t chunk_index) const {
        return std::atomic_ref<const std::uint16_t>(counts_[chunk_index])
            .load(std::memory_order_relaxed);
    }

    std::vector<std::uint16_t> contrib_counts() const {
        std::vector<std::uint16_t> out(counts_.size());
        for (std::size_t i = 0; i < counts_.size(); ++i)
            out[i] = contrib_count(static_cast<std::uint32_t>(i));
        return out;
    }

    // Post-barrier inspection only.
    std::span<const float> sums() const { return sums_; }

private:
    ChunkLayout layout_;
    AggMode mode_;
    unsigned n_clients_;
    std::vector<float> sums_;
    std::vector<std::uint16_t> counts_;
};

}  // namespace fedpipe
