#pragma once
#include <atomic>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <utility>

namespace fedpipe {

// Bounded single-producer/single-consumer FIFO connecting pipeline stages.
// push never blocks: a full ring refuses the item and the caller decides
// (retry, drop and count). Exactly one thread may push and one may pop.
template <typename T>
class SpscRing {
public:
    explicit SpscRing(std::size_t capacity)
        : capacity_(checked(capacity)), mask_(capacity - 1), slots_(new T[capacity]) {}

    SpscRing(const SpscRing&) = delete;
    SpscRing& operator=(const SpscRing&) = delete;

    bool push(T&& item) {
        const std::size_t head = head_.load(std::memory_order_relaxed);
        if (head - tail_.load(std::memory_order_acquire) == capacity_) return false;
        slots_[head & mask_] = std::move(item);
        head_.store(head + 1, std::memory_order_release);
        return true;
    }

    bool push(const T& item) {
        T copy(item);
        return push(std::move(copy));
    }

    bool pop(T& out) {
        const std::size_t tail = tail_.load(std::memory_order_relaxed);
        if (tail == head_.load(std::memory_order_acquire)) return false;
        out = std::move(slots_[tail & mask_]);
        tail_.store(tail + 1, std::memory_order_release);
        return true;
    }

    bool empty() const {
        return tail_.load(std::memory_order_acquire) ==
               head_.load(std::memory_order_acquire);
    }

    std::size_t size() const {
        return head_.load(std::memory_order_acquire) -
               tail_.load(std::memory_order_acquire);
    }

    std::size_t capacity() const { return capacity_; }

    // Single-threaded use only (between rounds).
    void clear() {
        T sink;
        while (pop(sink)) {}
    }

private:
    static std::size_t checked(std::size_t capacity) {
        if (capacity == 0 || (capacity & (capacity - 1)) != 0)
            throw std::invalid_argument("SpscRing: capacity must be a power of two");
        return capacity;
    }

    alignas(64) std::atomic<std::size_t> head_{0};
    alignas(64) std::atomic<std::size_t> tail_{0};
    const std::size_t capacity_;
    const std::size_t mask_;
    std::unique_ptr<T[]> slots_;
};

}  // namespace fedpipe
