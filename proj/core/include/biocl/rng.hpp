#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace biocl {

/// Seeded xoshiro256** generator with splitmix64 stream derivation.
/// Identical seed + identical call sequence gives bit-identical draws on
/// every platform. Distinct purposes (init / dropout / reservoir / ...)
/// get independent substreams derived from the master seed, so toggling
/// one mechanism never perturbs draws consumed by another.
class Rng {
public:
    enum Stream : std::uint64_t {
        kInit = 1,
        kDropout = 2,
        kReservoir = 3,
        kShuffle = 4,
        kSampling = 5,
        kStream = 6,
    };

    explicit Rng(std::uint64_t seed);

    /// Independent generator for a named purpose (or any numeric tag).
    Rng substream(std::uint64_t purpose) const;

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform();

    /// Standard normal via Box-Muller (two draws per value; no caching,
    /// so the draw sequence is position-independent).
    double normal();

    /// Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates in descending index order.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Random permutation of {0, ..., n-1}.
    std::vector<int> permutation(int n);

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

private:
    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace biocl
