#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace bimodal {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stateless derivation of a sub-stream seed from (master seed, purpose tag, index).
// Used everywhere instead of sequentially splitting one engine, so resumed runs
// draw the exact same randomness as uninterrupted ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master ^ h) ^ index);
}

// mt19937_64 has a standard-specified sequence; the uniform/normal transforms
// below are written out so the draw sequence is ours, not the stdlib's
// (std::normal_distribution is implementation-defined).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n), n >= 1. Rejection-free modulo is fine here:
    // n is always tiny relative to 2^64, the bias is unobservable.
    std::uint64_t below(std::uint64_t n) { return eng_() % n; }

    template <class T>
    void shuffle(std::vector<T>& v) { // Fisher-Yates
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    // Sattolo's algorithm: a uniformly random cyclic permutation. Every cycle
    // of length >= 2 is a derangement, which is exactly what the unpaired view
    // needs.
    void cyclic_permutation(std::vector<std::size_t>& perm, std::size_t n) {
        perm.resize(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::swap(perm[i - 1], perm[below(i - 1)]);
        }
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace bimodal
