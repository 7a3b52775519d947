#include "shardsim/digest.hpp"

#include <bit>
#include <cstring>

#include "shardsim/error.hpp"

namespace shardsim {

Digest Digest::from_hex(std::string_view hex) {
    return from_span(as_span(shardsim::from_hex(hex)));
}

Digest Digest::from_span(ByteSpan data) {
    if (data.size() != 32) throw Error("digest: expected 32 bytes");
    Digest d;
    std::memcpy(d.bytes.data(), data.data(), 32);
    return d;
}

uint64_t Digest::trailing_bits(unsigned k) const {
    if (k == 0) return 0;
    if (k > 64) throw Error("digest: trailing_bits > 64");
    uint64_t tail = 0;
    for (size_t i = 24; i < 32; ++i) tail = (tail << 8) | bytes[i];
    return k == 64 ? tail : (tail & ((uint64_t(1) << k) - 1));
}

unsigned Digest::leading_zero_bits() const {
    unsigned count = 0;
    for (uint8_t b : bytes) {
        if (b == 0) {
            count += 8;
            continue;
        }
        count += std::countl_zero(b);
        break;
    }
    return count;
}

}  // namespace shardsim
