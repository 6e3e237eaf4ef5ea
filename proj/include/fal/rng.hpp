#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

#include "fal/errors.hpp"

namespace fal {

// splitmix64 finalizer; the basis for all seed derivation.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_tag(std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Counter-based seed split: a stream seed is a pure function of the master
// seed and the tag path, so call order and parallelism never matter.
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
    uint64_t s = mix64(master);
    for (uint64_t p : path) s = mix64(s ^ mix64(p));
    return s;
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag) {
    return derive_seed(master, {hash_tag(tag)});
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a) {
    return derive_seed(master, {hash_tag(tag), a});
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a, uint64_t b) {
    return derive_seed(master, {hash_tag(tag), a, b});
}

// mt19937_64 core with hand-rolled distributions. The standard engine is
// bit-exact everywhere; the standard distributions are not, so we sample
// uniforms, normals and gammas ourselves.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, bound) via rejection.
    uint64_t uniform_u64(uint64_t bound) {
        require(bound > 0, "uniform_u64: bound must be positive");
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    size_t uniform_index(size_t n) { return static_cast<size_t>(uniform_u64(n)); }

    // [0, 1) with 53 random bits.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

    // Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform_real();
        } while (u1 <= 0.0);
        u2 = uniform_real();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    // Marsaglia-Tsang for shape >= 1, boosted for shape < 1. Unit scale.
    double gamma(double shape) {
        require(shape > 0.0, "gamma: shape must be positive");
        if (shape < 1.0) {
            double u;
            do {
                u = uniform_real();
            } while (u <= 0.0);
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform_real();
            if (u <= 0.0) continue;
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    // Proportions on the C-simplex, concentration alpha on every coordinate.
    std::vector<double> dirichlet(double alpha, int dim) {
        require(dim >= 1, "dirichlet: dim must be >= 1");
        std::vector<double> p(dim);
        double sum = 0.0;
        for (int i = 0; i < dim; ++i) {
            p[i] = gamma(alpha);
            sum += p[i];
        }
        if (sum <= 0.0) {
            // Total underflow: collapse onto one coordinate.
            std::fill(p.begin(), p.end(), 0.0);
            p[uniform_index(static_cast<size_t>(dim))] = 1.0;
            return p;
        }
        for (double& v : p) v /= sum;
        return p;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from {0, ..., n-1}, order randomized.
    std::vector<int> sample_without_replacement(int n, int k) {
        require(k >= 0 && k <= n, "sample_without_replacement: need 0 <= k <= n");
        std::vector<int> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < k; ++i) {
            size_t j = i + uniform_index(static_cast<size_t>(n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

    // Index drawn with probability weights[i] / sum(weights). Requires a
    // positive total mass.
    size_t weighted_index(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) {
            require(w >= 0.0, "weighted_index: negative weight");
            total += w;
        }
        require(total > 0.0, "weighted_index: zero total mass");
        double r = uniform_real() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fal
