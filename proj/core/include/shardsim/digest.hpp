#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>

#include "shardsim/bytes.hpp"

namespace shardsim {

// 32-byte hash value. Equality is byte equality; ordering is lexicographic.
struct Digest {
    std::array<uint8_t, 32> bytes{};

    static constexpr size_t size() { return 32; }

    auto operator<=>(const Digest&) const = default;

    ByteSpan span() const { return ByteSpan(bytes.data(), bytes.size()); }
    std::string hex() const { return to_hex(span()); }

    static Digest from_hex(std::string_view hex);
    static Digest from_span(ByteSpan data);  // throws unless exactly 32 bytes

    // Integer value of the k trailing (least significant) bits, read from the
    // tail of the digest.
    uint64_t trailing_bits(unsigned k) const;

    // Number of leading zero bits, scanning from bytes[0] downward.
    unsigned leading_zero_bits() const;
};

struct DigestHash {
    size_t operator()(const Digest& d) const {
        size_t v;
        std::memcpy(&v, d.bytes.data(), sizeof(v));
        return v;
    }
};

}  // namespace shardsim
