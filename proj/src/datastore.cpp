#include "rbacchain/datastore.hpp"

#include <algorithm>

namespace rbacchain::datastore {

void write_record_body(ByteWriter& w, const DataRecord& record) {
    w.str(record.record_id).u32(static_cast<std::uint32_t>(record.attributes.size()));
    for (const auto& [att, val] : record.attributes) {
        w.str(att);
        rbac::write_value(w, val);
    }
}

DataRecord read_record_body(ByteReader& r) {
    DataRecord rec;
    rec.record_id = r.str();
    auto n = r.u32();
    std::string prev;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto att = r.str();
        if (i > 0 && att <= prev) throw DecodeError("record attributes out of canonical order");
        prev = att;
        rec.attributes.emplace(std::move(att), rbac::read_value(r));
    }
    return rec;
}

void check_schema(const rbac::AttributeCatalog& catalog, const DataRecord& record) {
    if (record.record_id.empty()) throw SchemaError("record id is empty");
    if (record.attributes.empty()) throw SchemaError("record " + record.record_id + " has no attributes");
    for (const auto& [att, _] : record.attributes) {
        if (!catalog.index_of(att)) {
            throw SchemaError("record " + record.record_id + " uses unknown attribute " + att);
        }
    }
}

std::string DataIndex::key_of(const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return "i:" + std::to_string(*i);
    return "s:" + std::get<std::string>(v);
}

void DataIndex::insert(DataRecord record) {
    if (records_.contains(record.record_id)) throw SchemaError("duplicate record id " + record.record_id);
    for (const auto& [att, val] : record.attributes) postings_[att][key_of(val)].insert(record.record_id);
    auto id = record.record_id;
    records_.emplace(std::move(id), std::move(record));
}

const DataRecord* DataIndex::find(const std::string& record_id) const {
    auto it = records_.find(record_id);
    return it == records_.end() ? nullptr : &it->second;
}

std::vector<std::string> DataIndex::evaluate_query(const std::vector<rbac::AccessRequest::Param>& params) const {
    std::vector<const std::set<std::string>*> lists;
    for (const auto& [att, val] : params) {
        auto a = postings_.find(att);
        if (a == postings_.end()) return {};
        auto v = a->second.find(key_of(val));
        if (v == a->second.end()) return {};
        lists.push_back(&v->second);
    }
    if (lists.empty()) {
        std::vector<std::string> all;
        for (const auto& [id, _] : records_) all.push_back(id);
        return all;
    }
    std::sort(lists.begin(), lists.end(), [](auto* a, auto* b) { return a->size() < b->size(); });
    std::vector<std::string> out(lists[0]->begin(), lists[0]->end());
    for (std::size_t i = 1; i < lists.size() && !out.empty(); ++i) {
        std::erase_if(out, [&](const std::string& id) { return !lists[i]->contains(id); });
    }
    return out;
}

std::vector<RecordView> mask_result(const std::vector<DataRecord>& records, const rbac::AttributeCatalog& catalog,
                                    const rbac::Mask& mask) {
    if (mask.size() != catalog.size()) {
        throw MaskLengthError("mask length " + std::to_string(mask.size()) + " does not match catalog length " +
                              std::to_string(catalog.size()));
    }
    std::vector<RecordView> views;
    views.reserve(records.size());
    for (const auto& rec : records) {
        RecordView view{rec.record_id, {}};
        for (const auto& [att, val] : rec.attributes) {
            auto idx = catalog.index_of(att);
            if (idx && mask[*idx]) view.attributes.emplace(att, val);
        }
        views.push_back(std::move(view));
    }
    return views;
}

Bytes QueryResult::canonical_bytes() const {
    ByteWriter w;
    w.str("query-result").str(user_id);
    rbac::write_mask(w, mask.mask);
    w.u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& v : records) {
        w.str(v.record_id).u32(static_cast<std::uint32_t>(v.attributes.size()));
        for (const auto& [att, val] : v.attributes) {
            w.str(att);
            rbac::write_value(w, val);
        }
    }
    return std::move(w).take();
}

Bytes QueryResult::encode() const {
    ByteWriter w;
    w.bytes(canonical_bytes());
    crypto::write_signature(w, signature);
    return std::move(w).take();
}

QueryResult QueryResult::decode(ByteView bytes) {
    ByteReader outer(bytes);
    auto body = outer.bytes();
    QueryResult q;
    q.signature = crypto::read_signature(outer);
    outer.expect_end();

    ByteReader r(body);
    if (r.str() != "query-result") throw DecodeError("not a query result");
    q.user_id = r.str();
    q.mask.mask = rbac::read_mask(r);
    auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        RecordView v;
        v.record_id = r.str();
        auto m = r.u32();
        for (std::uint32_t k = 0; k < m; ++k) {
            auto att = r.str();
            v.attributes.emplace(std::move(att), rbac::read_value(r));
        }
        q.records.push_back(std::move(v));
    }
    r.expect_end();
    return q;
}

QueryResult execute_query(const DataIndex& index, const rbac::AttributeCatalog& catalog,
                          const rbac::AccessRequest& request, const rbac::EffectiveRights& rights,
                          ByteView bdm_private_key) {
    std::vector<DataRecord> matched;
    for (const auto& id : index.evaluate_query(request.params())) matched.push_back(*index.find(id));
    QueryResult out;
    out.user_id = request.user_id();
    out.records = mask_result(matched, catalog, rights.mask);
    out.mask = rights;
    out.signature = crypto::sign(out.canonical_bytes(), bdm_private_key);
    return out;
}

bool verify_result(const QueryResult& result, ByteView bdm_public_key) {
    return crypto::verify(result.canonical_bytes(), result.signature, bdm_public_key);
}

}  // namespace rbacchain::datastore
