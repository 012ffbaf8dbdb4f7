#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fedsim {

namespace detail {

// SplitMix64 finalizer. Used both as the generator step and to mix stream ids
// into seeds, so derived streams stay decorrelated.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Self-contained deterministic generator. All distributions are implemented
// here rather than with <random> adaptors so that sequences are identical
// across standard libraries, which keeps frozen test values portable.
class Rng {
public:
    Rng() : state_(0) {}
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Standard normal via Box-Muller; one spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Named per-component streams derived from the master seed. Adding a stream
// id never perturbs the sequences of existing ones.
enum class Stream : std::uint64_t {
    DataGen = 1,
    Split = 2,
    Partition = 3,
    ModelInit = 4,
    EdTrain = 5,
    EdSchedule = 6,
    AttackNoise = 7,
    LabelFlip = 8,
    AgentInit = 9,
    AgentSample = 10,
    Exploration = 11,
    RandomSelect = 12,
    AuxSubsample = 13,
};

inline Rng derive_rng(std::uint64_t master_seed, Stream stream,
                      std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = detail::mix64(master_seed);
    s = detail::mix64(s ^ static_cast<std::uint64_t>(stream));
    s = detail::mix64(s ^ a);
    s = detail::mix64(s ^ b);
    return Rng(s);
}

}  // namespace fedsim
