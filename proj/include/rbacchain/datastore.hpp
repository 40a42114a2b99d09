#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "rbacchain/crypto.hpp"
#include "rbacchain/rbac.hpp"

namespace rbacchain::datastore {

using rbac::Value;

struct DataRecord {
    std::string record_id;
    std::map<std::string, Value> attributes;
    crypto::ActorId owner;
    std::uint64_t created_at_height = 0;

    bool operator==(const DataRecord&) const = default;
};

/// record_id and attributes; owner and height come from the enclosing block.
void write_record_body(ByteWriter& w, const DataRecord& record);
DataRecord read_record_body(ByteReader& r);

/// Throws SchemaError if the record is empty or names an attribute outside the catalog.
void check_schema(const rbac::AttributeCatalog& catalog, const DataRecord& record);

/// In-memory hash index over the chain's records. Rebuilt from blocks on load.
class DataIndex {
public:
    /// Throws SchemaError on a duplicate record id.
    void insert(DataRecord record);

    bool contains(const std::string& record_id) const { return records_.contains(record_id); }
    const DataRecord* find(const std::string& record_id) const;
    std::size_t size() const { return records_.size(); }
    const std::map<std::string, DataRecord>& records() const { return records_; }

    /// Conjunctive exact match; ids in ascending order.
    std::vector<std::string> evaluate_query(const std::vector<rbac::AccessRequest::Param>& params) const;

private:
    static std::string key_of(const Value& v);

    std::map<std::string, DataRecord> records_;
    std::unordered_map<std::string, std::unordered_map<std::string, std::set<std::string>>> postings_;
};

struct RecordView {
    std::string record_id;
    std::map<std::string, Value> attributes;

    bool operator==(const RecordView&) const = default;
};

/// Keeps exactly the attributes whose mask bit is set. Throws MaskLengthError
/// if the mask does not cover the catalog.
std::vector<RecordView> mask_result(const std::vector<DataRecord>& records, const rbac::AttributeCatalog& catalog,
                                    const rbac::Mask& mask);

struct QueryResult {
    std::string user_id;
    std::vector<RecordView> records;
    rbac::EffectiveRights mask;
    crypto::Signature signature;

    /// Everything except the signature.
    Bytes canonical_bytes() const;
    Bytes encode() const;
    static QueryResult decode(ByteView bytes);
};

/// Matches, masks and signs with the BDM key.
QueryResult execute_query(const DataIndex& index, const rbac::AttributeCatalog& catalog,
                          const rbac::AccessRequest& request, const rbac::EffectiveRights& rights,
                          ByteView bdm_private_key);

bool verify_result(const QueryResult& result, ByteView bdm_public_key);

}  // namespace rbacchain::datastore
