#pragma once

#include "shardsim/bytes.hpp"
#include "shardsim/crypto.hpp"
#include "shardsim/digest.hpp"

namespace shardsim::crypto {

// Verifiable random function built from the deterministic signature scheme:
// proof = sign(secret, seed), value = hash256(proof bytes). Anyone holding
// the public key can check both the proof and the value derivation.
struct VrfOutput {
    Digest value;
    Signature proof;
};

VrfOutput vrf_eval(const KeyPair& key, ByteSpan seed);

bool vrf_verify(ByteSpan public_key, ByteSpan seed, const VrfOutput& out);

}  // namespace shardsim::crypto
