#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mistfed/digest.hpp"
#include "mistfed/errors.hpp"

namespace mistfed {

/// Flat 64-bit parameter vector. Length is fixed by construction; all
/// binary arithmetic requires equal lengths and throws ConfigError otherwise.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t n, double fill = 0.0) : v_(n, fill) {}
    ParamVector(std::initializer_list<double> init) : v_(init) { check_finite("ParamVector"); }
    explicit ParamVector(std::vector<double> values) : v_(std::move(values)) {
        check_finite("ParamVector");
    }

    static ParamVector zeros(std::size_t n) { return ParamVector(n); }

    std::size_t size() const noexcept { return v_.size(); }
    bool empty() const noexcept { return v_.empty(); }

    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }

    std::span<const double> values() const noexcept { return v_; }
    std::span<double> values() noexcept { return v_; }
    const std::vector<double>& vec() const noexcept { return v_; }

    bool all_finite() const noexcept {
        for (double x : v_) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    /// Throws NumericError naming the first offending index.
    void check_finite(const char* what) const {
        for (std::size_t i = 0; i < v_.size(); ++i) {
            if (!std::isfinite(v_[i])) {
                throw NumericError(std::string(what) + ": non-finite value at index " +
                                   std::to_string(i));
            }
        }
    }

    ParamVector& operator+=(const ParamVector& o) {
        require_same_length(o, "operator+=");
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }

    ParamVector& operator-=(const ParamVector& o) {
        require_same_length(o, "operator-=");
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }

    ParamVector& operator*=(double s) {
        for (auto& x : v_) x *= s;
        return *this;
    }

    /// *this += a * x
    void axpy(double a, const ParamVector& x) {
        require_same_length(x, "axpy");
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
    }

    double dot(const ParamVector& o) const {
        require_same_length(o, "dot");
        double acc = 0.0;
        for (std::size_t i = 0; i < v_.size(); ++i) acc += v_[i] * o.v_[i];
        return acc;
    }

    double norm2() const { return std::sqrt(dot(*this)); }

    friend ParamVector operator+(ParamVector a, const ParamVector& b) {
        a += b;
        return a;
    }
    friend ParamVector operator-(ParamVector a, const ParamVector& b) {
        a -= b;
        return a;
    }
    friend ParamVector operator*(ParamVector a, double s) {
        a *= s;
        return a;
    }
    friend ParamVector operator*(double s, ParamVector a) {
        a *= s;
        return a;
    }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    void require_same_length(const ParamVector& o, const char* op) const {
        if (v_.size() != o.v_.size()) {
            throw ConfigError(std::string("ParamVector::") + op + ": length mismatch (" +
                              std::to_string(v_.size()) + " vs " + std::to_string(o.v_.size()) +
                              ")");
        }
    }

    std::vector<double> v_;
};

/// FNV-1a 64 over the vector's little-endian byte image. Endianness is fixed
/// in the fold, so the digest is platform-independent.
inline std::uint64_t param_digest(const ParamVector& p) {
    std::uint64_t h = kFnvOffset;
    for (double x : p.values()) h = fnv1a64_f64(x, h);
    return h;
}

}  // namespace mistfed
