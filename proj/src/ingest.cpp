#include "rbacchain/ingest.hpp"

#include <fstream>

#include "rbacchain/policy.hpp"

namespace rbacchain::datastore {

std::vector<std::uint64_t> ingest_records(ledger::Chain& chain, const std::vector<DataRecord>& records,
                                          const crypto::KeyPair& owner_key) {
    const auto& state = chain.state();
    std::set<std::string> batch_ids;
    for (const auto& rec : records) {
        check_schema(state.catalog, rec);
        if (state.records.contains(rec.record_id) || !batch_ids.insert(rec.record_id).second) {
            throw SchemaError("duplicate record id " + rec.record_id);
        }
    }
    auto owner = crypto::actor_id_of(owner_key.public_key);
    std::vector<std::uint64_t> heights;
    heights.reserve(records.size());
    for (const auto& rec : records) {
        auto tx = ledger::make_record_tx(rec, owner_key, state.authorities.bdm, state.next_nonce(owner),
                                         chain.schedule());
        heights.push_back(chain.mine_block(tx).height);
    }
    return heights;
}

DataRecord record_from_json(const nlohmann::json& j) {
    try {
        DataRecord rec;
        rec.record_id = j.at("record_id").get<std::string>();
        for (const auto& [att, val] : j.at("attributes").items()) rec.attributes.emplace(att, policy::value_from_json(val));
        return rec;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed record: ") + e.what());
    }
}

std::vector<DataRecord> load_records_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<DataRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace rbacchain::datastore
