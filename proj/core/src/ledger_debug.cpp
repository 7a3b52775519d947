#include "json_codec.hpp"
#include "shardsim/ledger.hpp"

namespace shardsim::ledger {

std::string debug_json(const Transaction& tx) { return codec::tx_to_json(tx).dump(2); }

std::string debug_json(const UtxoSet& utxo) {
    codec::ordered_json entries = codec::ordered_json::array();
    for (const auto& [ref, out] : utxo.sorted_entries())
        entries.push_back(codec::ordered_json{{"ref", codec::ref_to_json(ref)},
                                              {"output", codec::output_to_json(out)}});
    codec::ordered_json j;
    j["size"] = utxo.size();
    j["totalValue"] = utxo.total_value();
    j["entries"] = std::move(entries);
    return j.dump(2);
}

}  // namespace shardsim::ledger
