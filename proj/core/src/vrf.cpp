#include "shardsim/vrf.hpp"

namespace shardsim::crypto {

VrfOutput vrf_eval(const KeyPair& key, ByteSpan seed) {
    VrfOutput out;
    out.proof = sign(key, seed);
    out.value = hash256(as_span(out.proof.bytes));
    return out;
}

bool vrf_verify(ByteSpan public_key, ByteSpan seed, const VrfOutput& out) {
    if (!verify_sig(public_key, seed, out.proof)) return false;
    return out.value == hash256(as_span(out.proof.bytes));
}

}  // namespace shardsim::crypto
