#include "shardsim/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>
#include <string>

#include "shardsim/error.hpp"

namespace shardsim::crypto {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw Error("libsodium initialization failed");
    });
}

}  // namespace

Digest hash256(ByteSpan data) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

Digest hash256(std::initializer_list<ByteSpan> parts) {
    ensure_sodium();
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    for (const auto& p : parts) crypto_hash_sha256_update(&st, p.data(), p.size());
    Digest d;
    crypto_hash_sha256_final(&st, d.bytes.data());
    return d;
}

Digest hmac_sha256(ByteSpan key, ByteSpan message) {
    // RFC 2104 with B = 64.
    std::array<uint8_t, 64> block{};
    if (key.size() > block.size()) {
        Digest kd = hash256(key);
        std::memcpy(block.data(), kd.bytes.data(), kd.bytes.size());
    } else {
        std::memcpy(block.data(), key.data(), key.size());
    }
    std::array<uint8_t, 64> ipad, opad;
    for (size_t i = 0; i < 64; ++i) {
        ipad[i] = block[i] ^ 0x36;
        opad[i] = block[i] ^ 0x5c;
    }
    Digest inner = hash256({ByteSpan(ipad.data(), ipad.size()), message});
    return hash256({ByteSpan(opad.data(), opad.size()), inner.span()});
}

Digest address_of(ByteSpan public_key) { return hash256(public_key); }

KeyPair keygen(SigScheme scheme, const Seed32& seed) {
    ensure_sodium();
    KeyPair kp;
    kp.scheme = scheme;
    switch (scheme) {
        case SigScheme::ed25519: {
            kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
            kp.secret.resize(crypto_sign_SECRETKEYBYTES);
            crypto_sign_seed_keypair(kp.public_key.data(), kp.secret.data(), seed.data());
            break;
        }
        case SigScheme::hmac_stub: {
            kp.secret.assign(seed.begin(), seed.end());
            Digest pub = hash256({str_span("stub-pub"), ByteSpan(seed.data(), seed.size())});
            kp.public_key.assign(pub.bytes.begin(), pub.bytes.end());
            break;
        }
    }
    kp.address = address_of(as_span(kp.public_key));
    return kp;
}

Signature sign(const KeyPair& key, ByteSpan message) {
    ensure_sodium();
    Signature sig;
    sig.scheme = key.scheme;
    sig.signer = key.public_key;
    switch (key.scheme) {
        case SigScheme::ed25519: {
            sig.bytes.resize(crypto_sign_BYTES);
            unsigned long long len = 0;
            crypto_sign_detached(sig.bytes.data(), &len, message.data(), message.size(),
                                 key.secret.data());
            sig.bytes.resize(len);
            break;
        }
        case SigScheme::hmac_stub: {
            Digest mac = hmac_sha256(as_span(key.public_key), message);
            sig.bytes.assign(mac.bytes.begin(), mac.bytes.end());
            break;
        }
    }
    return sig;
}

bool verify_sig(ByteSpan public_key, ByteSpan message, const Signature& sig) {
    ensure_sodium();
    switch (sig.scheme) {
        case SigScheme::ed25519: {
            if (sig.bytes.size() != crypto_sign_BYTES) return false;
            if (public_key.size() != crypto_sign_PUBLICKEYBYTES) return false;
            return crypto_sign_verify_detached(sig.bytes.data(), message.data(), message.size(),
                                               public_key.data()) == 0;
        }
        case SigScheme::hmac_stub: {
            if (sig.bytes.size() != 32) return false;
            Digest mac = hmac_sha256(public_key, message);
            return std::memcmp(mac.bytes.data(), sig.bytes.data(), 32) == 0;
        }
    }
    return false;
}

SigScheme sig_scheme_from_name(const std::string& name) {
    if (name == "ed25519") return SigScheme::ed25519;
    if (name == "hmac_stub") return SigScheme::hmac_stub;
    throw Error("unknown signature scheme: " + name);
}

const char* sig_scheme_name(SigScheme scheme) {
    return scheme == SigScheme::ed25519 ? "ed25519" : "hmac_stub";
}

}  // namespace shardsim::crypto
