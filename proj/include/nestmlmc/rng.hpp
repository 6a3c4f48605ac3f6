#pragma once

#include <cstdint>

#include "nestmlmc/math.hpp"

namespace nestmlmc {

namespace detail {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}
}  // namespace detail

// Counter-based splittable stream key. A key is the running hash of
// (seed, path components); extending the path never aliases sibling keys
// in practice and derivation is O(1) per component.
struct StreamKey {
    std::uint64_t state;

    static StreamKey from_seed(std::uint64_t seed) {
        return {detail::mix64(seed + detail::kGamma)};
    }
    StreamKey child(std::uint64_t index) const {
        return {detail::mix64(state ^ (index + detail::kGamma) * 0xd1342543de82ef95ULL)};
    }
};

// SplitMix64 sequence rooted at the key hash. Draw order is fixed, so a
// stream is reproducible across runs and worker schedules.
class Stream {
public:
    explicit Stream(StreamKey key) : state_(key.state) {}

    std::uint64_t next_u64() {
        state_ += detail::kGamma;
        return detail::mix64(state_);
    }
    // Uniform on (0,1), never returning either endpoint.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }
    double next_gaussian() { return norm_quantile(next_uniform()); }

private:
    std::uint64_t state_;
};

}  // namespace nestmlmc
