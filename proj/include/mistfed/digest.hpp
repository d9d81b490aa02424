#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace mistfed {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                             std::uint64_t h = kFnvOffset) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

/// Folds a u64 into the hash low-byte-first, so the result is independent of
/// host endianness.
inline std::uint64_t fnv1a64_u64(std::uint64_t value, std::uint64_t h = kFnvOffset) {
    for (int shift = 0; shift < 64; shift += 8) {
        h ^= (value >> shift) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64_f64(double value, std::uint64_t h = kFnvOffset) {
    return fnv1a64_u64(std::bit_cast<std::uint64_t>(value), h);
}

inline std::string digest_hex(std::uint64_t d) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kHex[d & 0xfu];
        d >>= 4;
    }
    return out;
}

}  // namespace mistfed
