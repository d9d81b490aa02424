#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mistfed/digest.hpp"
#include "mistfed/errors.hpp"

namespace mistfed {

/// Deterministic seeded random stream.
///
/// The generator is xoshiro256++ with its state expanded from
/// (seed, stream_id) by splitmix64, both algorithms fixed here rather than
/// taken from the platform, so a given (seed, stream_id) replays the same
/// draw sequence on every build. Integer and uniform draws are bit-exact
/// everywhere; gaussian/gamma draws call libm's log, so their last ulp
/// follows the host libm.
///
/// Streams are value types: copying one and advancing the copy never
/// disturbs the original, and distinct stream_ids give unrelated sequences.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ull * (stream_id + 1));
        for (auto& s : state_) s = splitmix64(z);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Derives an independent child stream. Depends only on the identity of
    /// this stream and `child_id`, never on how far this stream has advanced.
    RngStream split(std::uint64_t child_id) const {
        std::uint64_t h = fnv1a64_u64(seed_);
        h = fnv1a64_u64(stream_id_, h);
        h = fnv1a64_u64(child_id, h);
        return RngStream(h, child_id);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
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
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) without modulo bias (Lemire's method).
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) throw UsageError("RngStream::next_below: bound must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t cutoff = (0 - bound) % bound;
            while (lo < cutoff) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal draw (Marsaglia's polar method).
    double next_gaussian() {
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    /// n standard-normal draws; advances the stream deterministically.
    std::vector<double> gaussians(std::size_t n) {
        std::vector<double> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(next_gaussian());
        return out;
    }

    /// Gamma(shape, 1) via Marsaglia–Tsang, with the usual shape<1 boost.
    double next_gamma(double shape) {
        if (!(shape > 0.0)) throw UsageError("RngStream::next_gamma: shape must be positive");
        if (shape < 1.0) {
            double u = next_double();
            while (u <= 0.0) u = next_double();
            return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = next_gaussian();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = next_double();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u <= 0.0 || std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Symmetric Dirichlet(alpha) draw over n components.
    std::vector<double> dirichlet(double alpha, std::size_t n) {
        if (n == 0) throw UsageError("RngStream::dirichlet: need at least one component");
        std::vector<double> out(n);
        double total = 0.0;
        for (auto& p : out) {
            p = next_gamma(alpha);
            total += p;
        }
        if (total <= 0.0) {
            for (auto& p : out) p = 1.0 / static_cast<double>(n);
        } else {
            for (auto& p : out) p /= total;
        }
        return out;
    }

    /// Deterministic Fisher–Yates shuffle.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t state_[4];
};

/// Deterministic seed derivation for named substreams: a FNV-1a chain over
/// the parts, so (seed, purpose, a, b) tuples map to well-separated streams.
inline RngStream derive_stream(std::uint64_t seed, std::uint64_t purpose,
                               std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = fnv1a64_u64(seed);
    h = fnv1a64_u64(purpose, h);
    h = fnv1a64_u64(a, h);
    h = fnv1a64_u64(b, h);
    return RngStream(h, purpose);
}

}  // namespace mistfed
