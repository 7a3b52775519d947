#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

#include "shardsim/bytes.hpp"
#include "shardsim/digest.hpp"

namespace shardsim::crypto {

// SHA-256.
Digest hash256(ByteSpan data);
Digest hash256(std::initializer_list<ByteSpan> parts);

// HMAC-SHA256 (RFC 2104 over hash256).
Digest hmac_sha256(ByteSpan key, ByteSpan message);

// Signature scheme. Both are deterministic: identical (key, message) yields
// identical bytes, which the VRF construction and replayable simulation
// depend on.
//
//  ed25519    real signatures (libsodium); the default.
//  hmac_stub  structural stand-in: sig = HMAC(public key, message). Fast and
//             reproducible but offers no unforgeability; only meaningful in
//             honest-model runs.
enum class SigScheme : uint8_t { ed25519 = 0, hmac_stub = 1 };

struct Signature {
    SigScheme scheme = SigScheme::ed25519;
    Bytes bytes;
    Bytes signer;  // public key of the signing party

    bool empty() const { return bytes.empty(); }
};

struct KeyPair {
    SigScheme scheme = SigScheme::ed25519;
    Bytes secret;      // never serialized into simulation outputs
    Bytes public_key;
    Digest address;    // hash256(public_key)
};

using Seed32 = std::array<uint8_t, 32>;

KeyPair keygen(SigScheme scheme, const Seed32& seed);

Signature sign(const KeyPair& key, ByteSpan message);

// True iff sig was produced over exactly this message by the secret half of
// public_key. Malformed signature bytes yield false, never an exception.
bool verify_sig(ByteSpan public_key, ByteSpan message, const Signature& sig);

Digest address_of(ByteSpan public_key);

SigScheme sig_scheme_from_name(const std::string& name);  // throws on unknown
const char* sig_scheme_name(SigScheme scheme);

}  // namespace shardsim::crypto
