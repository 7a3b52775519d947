#include "shardsim/sharding.hpp"

#include <algorithm>
#include <bit>

#include "shardsim/constants.hpp"
#include "shardsim/error.hpp"
#include "shardsim/merkle.hpp"
#include "shardsim/serial.hpp"

namespace shardsim::sharding {

Digest pow_digest(const Digest& epoch_randomness, const IpAddress& ip, ByteSpan public_key,
                  uint64_t nonce) {
    Writer w;
    w.digest(epoch_randomness);
    w.raw(ByteSpan(ip.data(), ip.size()));
    w.var_bytes(public_key);
    w.u64(nonce);
    return crypto::hash256(as_span(w.bytes()));
}

NodeIdentity establish_identity(const Digest& epoch_randomness, const IpAddress& ip,
                                const crypto::KeyPair& key, uint32_t difficulty_bits,
                                uint64_t epoch) {
    if (difficulty_bits > kPowMaxDifficulty)
        throw Error("identity: difficulty above desk-scale bound");
    NodeIdentity id;
    id.public_key = key.public_key;
    id.ip = ip;
    id.epoch = epoch;
    for (uint64_t nonce = 0; nonce < kPowMaxAttempts; ++nonce) {
        Digest h = pow_digest(epoch_randomness, ip, as_span(key.public_key), nonce);
        if (h.leading_zero_bits() >= difficulty_bits) {
            id.nonce = nonce;
            id.pow_hash = h;
            return id;
        }
    }
    throw Error("identity: nonce search exhausted");
}

bool verify_identity(const NodeIdentity& id, const Digest& epoch_randomness,
                     uint32_t difficulty_bits) {
    Digest h = pow_digest(epoch_randomness, id.ip, as_span(id.public_key), id.nonce);
    if (h != id.pow_hash) return false;
    return h.leading_zero_bits() >= difficulty_bits;
}

uint32_t trailing_index(const Digest& d, uint32_t shard_count) {
    if (shard_count == 0 || !std::has_single_bit(shard_count))
        throw Error("shard count must be a power of two");
    unsigned k = static_cast<unsigned>(std::countr_zero(shard_count));
    return static_cast<uint32_t>(d.trailing_bits(k));
}

uint32_t assign_shard(const NodeIdentity& id, uint32_t shard_count) {
    return trailing_index(id.pow_hash, shard_count);
}

uint32_t home_shard(const Digest& address, uint32_t shard_count) {
    return trailing_index(address, shard_count);
}

Digest elect_coordinator(std::span<const VrfTicket> tickets, const Digest& epoch_randomness) {
    const VrfTicket* best = nullptr;
    for (const auto& t : tickets) {
        if (!crypto::vrf_verify(as_span(t.public_key), epoch_randomness.span(), t.output))
            continue;
        if (crypto::address_of(as_span(t.public_key)) != t.address) continue;
        if (!best || t.output.value < best->output.value ||
            (t.output.value == best->output.value && t.address < best->address))
            best = &t;
    }
    if (!best) throw Error("elect_coordinator: no valid VRF tickets");
    return best->address;
}

Digest compute_urs(std::vector<Digest> vrf_values) {
    if (vrf_values.empty()) throw Error("compute_urs: empty VRF list");
    std::sort(vrf_values.begin(), vrf_values.end());
    Writer w;
    for (const auto& v : vrf_values) w.digest(v);
    return crypto::hash256(as_span(w.bytes()));
}

uint32_t select_dss(const Digest& urs, uint32_t shard_count) {
    return trailing_index(urs, shard_count);
}

EpochSummary finalize_epoch(uint64_t epoch,
                            std::span<const std::optional<Digest>> shard_roots) {
    EpochSummary summary;
    summary.epoch_number = epoch;
    summary.shard_roots.reserve(shard_roots.size());
    for (size_t i = 0; i < shard_roots.size(); ++i) {
        if (!shard_roots[i])
            throw Error("finalize_epoch: missing root for shard " + std::to_string(i));
        summary.shard_roots.push_back(*shard_roots[i]);
    }
    summary.global_root = crypto::merkle_root(summary.shard_roots);
    return summary;
}

Digest next_epoch_randomness(const Digest& urs, const Digest& global_root) {
    return crypto::hash256({urs.span(), global_root.span()});
}

namespace {

Digest salted_randomness(const Digest& base, uint32_t salt) {
    if (salt == 0) return base;
    Writer w;
    w.digest(base);
    w.u32(salt);
    return crypto::hash256(as_span(w.bytes()));
}

}  // namespace

EpochContext form_epoch(uint64_t epoch, const Digest& base_randomness, size_t node_count,
                        const IdentityFn& make_identity, const VrfFn& make_vrf,
                        const FormationParams& params) {
    if (params.shard_count == 0 || !std::has_single_bit(params.shard_count))
        throw Error("form_epoch: shard count must be a power of two");
    for (uint32_t salt = 0; salt < kMaxFormationSalts; ++salt) {
        Digest randomness = salted_randomness(base_randomness, salt);
        EpochContext ctx;
        ctx.epoch_number = epoch;
        ctx.randomness = randomness;
        ctx.base_randomness = base_randomness;
        ctx.salt = salt;
        ctx.shard_count = params.shard_count;
        ctx.identities.reserve(node_count);
        ctx.membership.assign(params.shard_count, {});
        for (size_t i = 0; i < node_count; ++i) {
            NodeIdentity id = make_identity(randomness, i);
            if (!verify_identity(id, randomness, params.difficulty))
                throw Error("form_epoch: node produced an unverifiable identity");
            uint32_t shard = assign_shard(id, params.shard_count);
            ctx.membership[shard].push_back(id.address());
            ctx.identities.push_back(std::move(id));
        }
        bool undersized = false;
        for (const auto& members : ctx.membership)
            if (members.size() < params.min_shard_size) undersized = true;
        if (undersized) continue;  // re-draw with the next salt

        for (auto& members : ctx.membership) std::sort(members.begin(), members.end());

        std::vector<VrfTicket> tickets;
        tickets.reserve(node_count);
        std::vector<Digest> values;
        values.reserve(node_count);
        for (size_t i = 0; i < node_count; ++i) {
            VrfTicket t = make_vrf(randomness, i);
            if (!crypto::vrf_verify(as_span(t.public_key), randomness.span(), t.output))
                continue;
            values.push_back(t.output.value);
            tickets.push_back(std::move(t));
        }
        ctx.coordinator = elect_coordinator(tickets, randomness);
        ctx.urs = compute_urs(values);
        ctx.dss_index = select_dss(ctx.urs, params.shard_count);
        return ctx;
    }
    throw Error("form_epoch: could not satisfy min shard size after " +
                std::to_string(kMaxFormationSalts) + " re-draws");
}

uint32_t route_tx(const ledger::Transaction& tx, uint32_t shard_count,
                  const RoutingTable& table) {
    const Digest* lowest_validator = nullptr;
    for (const auto& in : tx.inputs) {
        const RefLocation* loc = table.lookup(in.ref);
        if (!loc || !loc->is_contract) continue;
        if (!lowest_validator || loc->validator_hash < *lowest_validator)
            lowest_validator = &loc->validator_hash;
    }
    if (lowest_validator) return trailing_index(*lowest_validator, shard_count);
    return home_shard(tx.sender, shard_count);
}

std::vector<uint32_t> input_shards_of(const ledger::Transaction& tx, uint32_t shard_count,
                                      const RoutingTable& table) {
    uint32_t fallback = route_tx(tx, shard_count, table);
    std::vector<uint32_t> shards;
    shards.reserve(tx.inputs.size());
    for (const auto& in : tx.inputs) {
        const RefLocation* loc = table.lookup(in.ref);
        shards.push_back(loc ? loc->shard : fallback);
    }
    return shards;
}

}  // namespace shardsim::sharding
