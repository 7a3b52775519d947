// Internal JSON encodings shared by the transcript writer, the auditor and
// the inspector. Not installed; the public headers stay vendor-free.
#pragma once

#include <json.hpp>

#include "shardsim/chain.hpp"
#include "shardsim/crossshard.hpp"
#include "shardsim/ledger.hpp"

namespace shardsim::codec {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

inline ordered_json sig_to_json(const crypto::Signature& sig) {
    return ordered_json{{"scheme", crypto::sig_scheme_name(sig.scheme)},
                        {"bytes", to_hex(as_span(sig.bytes))},
                        {"signer", to_hex(as_span(sig.signer))}};
}

inline crypto::Signature sig_from_json(const json& j) {
    crypto::Signature sig;
    sig.scheme = crypto::sig_scheme_from_name(j.at("scheme").get<std::string>());
    sig.bytes = from_hex(j.at("bytes").get<std::string>());
    sig.signer = from_hex(j.at("signer").get<std::string>());
    return sig;
}

inline ordered_json ref_to_json(const ledger::OutputRef& ref) {
    return ordered_json{{"txId", ref.tx_id.hex()}, {"index", ref.index}};
}

inline ledger::OutputRef ref_from_json(const json& j) {
    return {Digest::from_hex(j.at("txId").get<std::string>()), j.at("index").get<uint32_t>()};
}

inline ordered_json output_to_json(const ledger::Output& out) {
    Writer w;
    ledger::serialize_script(w, out.validator);
    return ordered_json{{"validator", to_hex(as_span(w.bytes()))},
                        {"value", out.value},
                        {"datum", to_hex(as_span(out.datum))}};
}

inline ledger::Output output_from_json(const json& j) {
    ledger::Output out;
    Bytes script = from_hex(j.at("validator").get<std::string>());
    Reader r(as_span(script));
    out.validator = ledger::parse_script(r);
    out.value = j.at("value").get<uint64_t>();
    out.datum = from_hex(j.at("datum").get<std::string>());
    return out;
}

inline ordered_json tx_to_json(const ledger::Transaction& tx) {
    ordered_json inputs = ordered_json::array();
    for (const auto& in : tx.inputs) {
        ordered_json o;
        o["ref"] = ref_to_json(in.ref);
        o["redeemer"] = to_hex(as_span(in.redeemer));
        if (!in.signature.empty()) o["signature"] = sig_to_json(in.signature);
        inputs.push_back(std::move(o));
    }
    ordered_json outputs = ordered_json::array();
    for (const auto& out : tx.outputs) outputs.push_back(output_to_json(out));
    return ordered_json{{"inputs", std::move(inputs)}, {"outputs", std::move(outputs)},
                        {"fee", tx.fee},           {"validFrom", tx.valid_from},
                        {"validTo", tx.valid_to},  {"sender", tx.sender.hex()}};
}

inline ledger::Transaction tx_from_json(const json& j) {
    ledger::Transaction tx;
    for (const auto& i : j.at("inputs")) {
        ledger::TxInput in;
        in.ref = ref_from_json(i.at("ref"));
        in.redeemer = from_hex(i.at("redeemer").get<std::string>());
        if (i.contains("signature")) in.signature = sig_from_json(i.at("signature"));
        tx.inputs.push_back(std::move(in));
    }
    for (const auto& o : j.at("outputs")) tx.outputs.push_back(output_from_json(o));
    tx.fee = j.at("fee").get<uint64_t>();
    tx.valid_from = j.at("validFrom").get<uint64_t>();
    tx.valid_to = j.at("validTo").get<uint64_t>();
    tx.sender = Digest::from_hex(j.at("sender").get<std::string>());
    return tx;
}

inline ordered_json block_to_json(const chain::Block& b) {
    ordered_json txs = ordered_json::array();
    for (const auto& tx : b.transactions) txs.push_back(tx_to_json(tx));
    ordered_json votes = ordered_json::array();
    for (const auto& v : b.votes)
        votes.push_back(ordered_json{{"voter", v.voter.hex()}, {"sig", sig_to_json(v.sig)}});
    return ordered_json{{"timestamp", b.header.timestamp},
                        {"nonce", b.header.nonce},
                        {"txRoot", b.header.tx_root.hex()},
                        {"prevHash", b.header.prev_hash.hex()},
                        {"producer", b.header.producer.hex()},
                        {"blockHash", b.header.block_hash.hex()},
                        {"transactions", std::move(txs)},
                        {"votes", std::move(votes)}};
}

inline chain::Block block_from_json(const json& j) {
    chain::Block b;
    b.header.timestamp = j.at("timestamp").get<uint64_t>();
    b.header.nonce = j.at("nonce").get<uint64_t>();
    b.header.tx_root = Digest::from_hex(j.at("txRoot").get<std::string>());
    b.header.prev_hash = Digest::from_hex(j.at("prevHash").get<std::string>());
    b.header.producer = Digest::from_hex(j.at("producer").get<std::string>());
    b.header.block_hash = Digest::from_hex(j.at("blockHash").get<std::string>());
    for (const auto& t : j.at("transactions")) b.transactions.push_back(tx_from_json(t));
    for (const auto& v : j.at("votes"))
        b.votes.push_back({Digest::from_hex(v.at("voter").get<std::string>()),
                           sig_from_json(v.at("sig"))});
    return b;
}

inline ordered_json proof_to_json(const crossshard::ShardProof& p) {
    ordered_json sigs = ordered_json::array();
    for (const auto& v : p.signatures)
        sigs.push_back(ordered_json{{"voter", v.voter.hex()}, {"sig", sig_to_json(v.sig)}});
    return ordered_json{{"sessionId", p.session_id.hex()},
                        {"shard", p.shard},
                        {"epoch", p.epoch},
                        {"verdict", p.verdict == crossshard::Verdict::accept ? "accept" : "reject"},
                        {"lockedValue", p.locked_value},
                        {"reason", crossshard::reject_reason_name(p.reason)},
                        {"signatures", std::move(sigs)}};
}

inline crossshard::ShardProof proof_from_json(const json& j) {
    crossshard::ShardProof p;
    p.session_id = Digest::from_hex(j.at("sessionId").get<std::string>());
    p.shard = j.at("shard").get<uint32_t>();
    p.epoch = j.at("epoch").get<uint64_t>();
    p.verdict = j.at("verdict").get<std::string>() == "accept" ? crossshard::Verdict::accept
                                                               : crossshard::Verdict::reject;
    p.locked_value = j.at("lockedValue").get<uint64_t>();
    for (const auto& v : j.at("signatures"))
        p.signatures.push_back({Digest::from_hex(v.at("voter").get<std::string>()),
                                sig_from_json(v.at("sig"))});
    return p;
}

}  // namespace shardsim::codec
