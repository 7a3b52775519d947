#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "shardsim/crypto.hpp"
#include "shardsim/digest.hpp"
#include "shardsim/ledger.hpp"
#include "shardsim/vrf.hpp"

namespace shardsim::sharding {

using IpAddress = std::array<uint8_t, 4>;

// Proof-of-work identity: pow_hash = hash256(randomness || ip || pubkey || nonce)
// with at least `difficulty` leading zero bits.
struct NodeIdentity {
    Bytes public_key;
    IpAddress ip{};
    uint64_t nonce = 0;
    Digest pow_hash{};
    uint64_t epoch = 0;

    Digest address() const { return crypto::address_of(as_span(public_key)); }
};

Digest pow_digest(const Digest& epoch_randomness, const IpAddress& ip, ByteSpan public_key,
                  uint64_t nonce);

// Searches nonce = 0, 1, 2, ... until the leading-zero condition is met.
NodeIdentity establish_identity(const Digest& epoch_randomness, const IpAddress& ip,
                                const crypto::KeyPair& key, uint32_t difficulty_bits,
                                uint64_t epoch);

bool verify_identity(const NodeIdentity& id, const Digest& epoch_randomness,
                     uint32_t difficulty_bits);

// Index = integer value of the k trailing bits of the digest; shard_count
// must be a power of two.
uint32_t trailing_index(const Digest& d, uint32_t shard_count);
uint32_t assign_shard(const NodeIdentity& id, uint32_t shard_count);

// Home shard of an address-routed transaction.
uint32_t home_shard(const Digest& address, uint32_t shard_count);

struct VrfTicket {
    Digest address{};
    Bytes public_key;
    crypto::VrfOutput output;
};

// Winner holds the lexicographically smallest verified VRF value; forged or
// unverifiable tickets are excluded. Ties break on the smaller address.
Digest elect_coordinator(std::span<const VrfTicket> tickets, const Digest& epoch_randomness);

// Unbiased random string: hash of all verified VRF values sorted ascending.
Digest compute_urs(std::vector<Digest> vrf_values);

uint32_t select_dss(const Digest& urs, uint32_t shard_count);

struct EpochContext {
    uint64_t epoch_number = 0;
    Digest randomness{};          // the (possibly salted) randomness identities bind to
    Digest base_randomness{};     // before salting
    uint32_t salt = 0;            // re-draw counter for the min-shard-size rule
    uint32_t shard_count = 1;
    std::vector<NodeIdentity> identities;
    std::vector<std::vector<Digest>> membership;  // shard -> member addresses, sorted
    Digest coordinator{};
    Digest urs{};
    uint32_t dss_index = 0;
};

struct EpochSummary {
    uint64_t epoch_number = 0;
    std::vector<Digest> shard_roots;  // final block hash per shard, index order
    Digest global_root{};
};

// Merkle root over shard roots in shard-index order. A missing root throws,
// naming the shard.
EpochSummary finalize_epoch(uint64_t epoch,
                            std::span<const std::optional<Digest>> shard_roots);

// Randomness for epoch e+1 binds both the URS and the synchronized state.
Digest next_epoch_randomness(const Digest& urs, const Digest& global_root);

struct FormationParams {
    uint32_t shard_count = 1;  // power of two
    uint32_t difficulty = 0;
    uint32_t min_shard_size = 4;
};

using IdentityFn = std::function<NodeIdentity(const Digest& randomness, size_t node_index)>;
using VrfFn = std::function<VrfTicket(const Digest& randomness, size_t node_index)>;

// Full epoch formation: identities, assignment, coordinator election, URS
// and DSS selection. When any shard falls below min_shard_size the whole
// formation re-draws with a salted randomness (identities recomputed), up to
// kMaxFormationSalts attempts.
EpochContext form_epoch(uint64_t epoch, const Digest& base_randomness, size_t node_count,
                        const IdentityFn& make_identity, const VrfFn& make_vrf,
                        const FormationParams& params);

// ---------------------------------------------------------------------------
// Transaction routing (directory service shard)
// ---------------------------------------------------------------------------

struct RefLocation {
    uint32_t shard = 0;
    Digest validator_hash{};
    bool is_contract = false;
};

// The DSS's view of where every live output sits, maintained from committed
// block broadcasts.
class RoutingTable {
  public:
    void add(const ledger::OutputRef& ref, RefLocation loc) { map_[ref] = loc; }
    void remove(const ledger::OutputRef& ref) { map_.erase(ref); }
    const RefLocation* lookup(const ledger::OutputRef& ref) const {
        auto it = map_.find(ref);
        return it == map_.end() ? nullptr : &it->second;
    }
    size_t size() const { return map_.size(); }

  private:
    std::unordered_map<ledger::OutputRef, RefLocation, ledger::OutputRefHash> map_;
};

// A transaction spending any contract output routes to the shard of the
// (lowest) spent validator hash; otherwise to the sender's home shard.
uint32_t route_tx(const ledger::Transaction& tx, uint32_t shard_count,
                  const RoutingTable& table);

// Owning shards of a transaction's inputs, per the routing table. Unknown
// refs resolve to the output shard (they will fail validation there).
std::vector<uint32_t> input_shards_of(const ledger::Transaction& tx, uint32_t shard_count,
                                      const RoutingTable& table);

}  // namespace shardsim::sharding
