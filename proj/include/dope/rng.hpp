#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dope {

namespace detail {

// SplitMix64, used for seeding and label mixing.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

inline std::uint64_t mix_label(std::uint64_t seed, std::uint64_t label) {
    SplitMix64 sm(seed ^ (0xA0761D6478BD642FULL + label));
    std::uint64_t a = sm.next();
    std::uint64_t b = sm.next();
    return a ^ (b >> 17);
}

inline std::uint64_t hash_label(std::string_view label) {
    // FNV-1a
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace detail

/**
 * Deterministic random stream (xoshiro256**) with labeled sub-stream
 * derivation. Same seed gives the same sequence on every platform; all
 * sampling primitives are implemented locally so results do not depend on
 * the standard library's distribution implementations.
 *
 * A stream is single-owner: never share one instance across threads.
 * Independent work items should each derive their own substream.
 */
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {
        detail::SplitMix64 sm(seed);
        for (auto& word : state_)
            word = sm.next();
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }

    /// Child stream derived from this stream's seed (not its state), so
    /// derivation order does not depend on how much the parent consumed.
    RngStream substream(std::uint64_t label) const {
        return RngStream(detail::mix_label(seed_, label));
    }
    RngStream substream(std::string_view label) const {
        return substream(detail::hash_label(label));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5ULL, 7) * 9ULL;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t reject_below = (-bound) % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x < reject_below);
        return static_cast<std::size_t>(x % bound);
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v[i] = normal();
        return v;
    }

    /// Index draw from an explicit probability vector (inverse CDF walk).
    int categorical(const Eigen::VectorXd& probs) {
        const double u = uniform();
        double acc = 0.0;
        for (Eigen::Index k = 0; k + 1 < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(probs.size() - 1);
    }

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(values[i - 1], values[j]);
        }
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace dope
