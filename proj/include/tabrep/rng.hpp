#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <variant>
#include <vector>

#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"

namespace tabrep::numkit {

/// Splittable counter-style RNG (splitmix64 core). Identical seed gives a
/// bit-exact sample sequence; derive() hashes a label into an independent
/// child stream so the harness can key streams by (fold, model, candidate).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_uniform(double lo, double hi) {
        if (!(lo < hi)) throw ParamError("uniform: requires lo < hi");
        return lo + (hi - lo) * next_unit();
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        // guard against log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double next_gaussian(double mu, double sigma) {
        if (!(sigma > 0.0)) throw ParamError("gaussian: requires sigma > 0");
        return mu + sigma * next_gaussian();
    }

    /// Uniform integer in [0, n), n >= 1.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    /// Child stream keyed by an integer label; independent of this stream's position.
    RngStream derive(std::uint64_t label) const {
        std::uint64_t z = seed_ ^ (0x9E3779B97F4A7C15ULL + label * 0xD1B54A32D192ED03ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return RngStream(z ^ (z >> 31));
    }

    RngStream derive(std::string_view label) const { return derive(fnv1a(label)); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        return h;
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct Gaussian {
    double mu = 0.0;
    double sigma = 1.0;
};

struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
};

using Dist = std::variant<Gaussian, Uniform>;

/// rows x cols matrix of i.i.d. draws. Deterministic under a fixed stream state.
inline Matrix sample(RngStream& rng, const Dist& dist, std::size_t rows, std::size_t cols) {
    if (const auto* g = std::get_if<Gaussian>(&dist)) {
        if (!(g->sigma > 0.0)) throw ParamError("sample: gaussian sigma must be > 0");
    } else {
        const auto& u = std::get<Uniform>(dist);
        if (!(u.lo < u.hi)) throw ParamError("sample: uniform requires lo < hi");
    }
    Matrix out(rows, cols);
    for (double& v : out.data()) {
        if (const auto* g = std::get_if<Gaussian>(&dist))
            v = g->mu + g->sigma * rng.next_gaussian();
        else {
            const auto& u = std::get<Uniform>(dist);
            v = u.lo + (u.hi - u.lo) * rng.next_unit();
        }
    }
    return out;
}

} // namespace tabrep::numkit
