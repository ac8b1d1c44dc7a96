#pragma once
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

// Deterministic RNG utilities. Everything here is a pure function of the
// seed so that loss traces, datasets and shuffles replay identically across
// runs and across implementations (std::shuffle / std::normal_distribution
// are implementation-defined and therefore avoided).
namespace fedpipe {

// splitmix64 (Vigna). State advances by a fixed gamma, so the n-th output
// is computable in O(1) from (seed, n).
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // n-th output of the stream started at `seed`, without advancing state.
    static std::uint64_t at(std::uint64_t seed, std::uint64_t n) {
        return mix(seed + (n + 1) * kGamma);
    }

    std::uint64_t next() { return mix(state_ += kGamma); }

    // Uniform double in [0, 1), 53 significant bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    std::uint64_t next_below(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t state_;
};

// Stable seed derivation for independent substreams (per client, per epoch...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return SplitMix64::mix(base ^ SplitMix64::mix(tag + 0x632be59bd9b4e019ull));
}

// Box-Muller. One gaussian per call; the cached second value is dropped to
// keep the stream a simple function of consecutive uniforms.
inline float next_gaussian(SplitMix64& rng) {
    double u1 = rng.next_unit();
    while (u1 <= 0.0) u1 = rng.next_unit();
    const double u2 = rng.next_unit();
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                              std::cos(2.0 * 3.141592653589793 * u2));
}

// Fisher-Yates with an explicit stream.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.next_below(i)]);
    }
}

}  // namespace fedpipe
