#pragma once

#include <filesystem>
#include <set>
#include <vector>

#include "rbacchain/datastore.hpp"
#include "rbacchain/ledger.hpp"

#include <json.hpp>

namespace rbacchain::datastore {

/// Appends one owner-signed record transaction per record and returns the
/// heights they landed at. The whole batch is schema-checked first, so a bad
/// record (SchemaError) leaves the chain untouched.
std::vector<std::uint64_t> ingest_records(ledger::Chain& chain, const std::vector<DataRecord>& records,
                                          const crypto::KeyPair& owner_key);

/// One JSON object per line: {"record_id": ..., "attributes": {...}}.
std::vector<DataRecord> load_records_jsonl(const std::filesystem::path& path);
DataRecord record_from_json(const nlohmann::json& j);

}  // namespace rbacchain::datastore
