#include "rbacchain/contract.hpp"

#include <fstream>

#include <json.hpp>

namespace rbacchain::contract {

namespace {

void schedule_to_json(nlohmann::json& j, const GasSchedule& s) {
    j = {{"g_base", s.g_base},   {"g_role", s.g_role},   {"g_right", s.g_right},
         {"g_byte", s.g_byte},   {"v_base", s.v_base},   {"v_check", s.v_check},
         {"v_attr", s.v_attr},   {"tx_base", s.tx_base}, {"tx_byte", s.tx_byte}};
}

GasSchedule schedule_from_json(const nlohmann::json& j, const GasSchedule& defaults) {
    GasSchedule s = defaults;
    s.g_base = j.value("g_base", s.g_base);
    s.g_role = j.value("g_role", s.g_role);
    s.g_right = j.value("g_right", s.g_right);
    s.g_byte = j.value("g_byte", s.g_byte);
    s.v_base = j.value("v_base", s.v_base);
    s.v_check = j.value("v_check", s.v_check);
    s.v_attr = j.value("v_attr", s.v_attr);
    s.tx_base = j.value("tx_base", s.tx_base);
    s.tx_byte = j.value("tx_byte", s.tx_byte);
    return s;
}

}  // namespace

// The proposed schedule prices the one-role reference contract at 82,129 and
// keeps g_role small so deployment cost stays nearly flat as roles are added.
GasSchedule GasSchedule::proposed() {
    return {.g_base = 81840, .g_role = 50, .g_right = 40, .g_byte = 1,
            .v_base = 21000, .v_check = 2100, .v_attr = 800,
            .tx_base = 21000, .tx_byte = 16};
}

// Per-role priced comparison schedule: 145,590 for the one-role reference.
GasSchedule GasSchedule::baseline() {
    return {.g_base = 140846, .g_role = 1400, .g_right = 400, .g_byte = 16,
            .v_base = 21000, .v_check = 2100, .v_attr = 800,
            .tx_base = 21000, .tx_byte = 16};
}

GasConfig load_gas_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read gas config " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        GasConfig cfg;
        if (j.contains("proposed")) cfg.proposed = schedule_from_json(j.at("proposed"), cfg.proposed);
        if (j.contains("baseline")) cfg.baseline = schedule_from_json(j.at("baseline"), cfg.baseline);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError("malformed gas config " + path.string() + ": " + e.what());
    }
}

void save_gas_config(const std::filesystem::path& path, const GasConfig& config) {
    nlohmann::json j;
    schedule_to_json(j["proposed"], config.proposed);
    schedule_to_json(j["baseline"], config.baseline);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write gas config " + path.string());
    out << j.dump(2) << '\n';
}

SmartContract::SmartContract(rbac::RbacModel rules, crypto::ActorId owner, std::uint32_t version)
    : rules_(std::move(rules)), owner_(std::move(owner)), version_(version) {
    auto digest = crypto::sha256(canonical_bytes());
    id_ = ContractId(to_hex(ByteView(digest.data(), crypto::kActorIdBytes)));
}

Bytes SmartContract::canonical_bytes() const {
    ByteWriter w;
    const auto& ops = operations();
    w.u32(static_cast<std::uint32_t>(ops.size()));
    for (const auto& op : ops) w.str(op);
    w.bytes(rules_.canonical_bytes());
    crypto::write_actor(w, owner_);
    w.u32(version_);
    return std::move(w).take();
}

SmartContract SmartContract::decode(ByteReader& r) {
    auto n = r.u32();
    if (n != contract_operations().size()) throw DecodeError("unexpected contract operation set");
    for (const auto& expected : contract_operations()) {
        if (r.str() != expected) throw DecodeError("unexpected contract operation set");
    }
    auto rule_bytes = r.bytes();
    ByteReader rr(rule_bytes);
    auto rules = rbac::RbacModel::decode(rr);
    rr.expect_end();
    auto owner = crypto::read_actor(r);
    auto version = r.u32();
    return SmartContract(std::move(rules), std::move(owner), version);
}

std::vector<std::string> SmartContract::list_roles() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : rules_.roles()) out.push_back(id);
    return out;
}

std::vector<rbac::Right> SmartContract::get_rights(const std::string& role_id) const {
    const auto* role = rules_.find_role(role_id);
    if (role == nullptr) throw ModelValidationError(role_id);
    std::vector<rbac::Right> out;
    for (const auto& g : role->rights) out.push_back(*rules_.find_right(g));
    return out;
}

SmartContract compile_contract(const rbac::RbacModel& model, const crypto::ActorId& owner, std::uint32_t version) {
    return SmartContract(model, owner, version);
}

GasReceipt gas_of_deployment(const SmartContract& contract, const GasSchedule& s) {
    const auto& rules = contract.rules();
    std::uint64_t bytes = rules.canonical_bytes().size();
    std::uint64_t gas = s.g_base + s.g_role * rules.roles().size() + s.g_right * rules.rights().size() + s.g_byte * bytes;
    return {gas, "deploy", contract.id()};
}

GasReceipt gas_of_validation(const SmartContract& contract, const rbac::AccessRequest& request,
                             const rbac::AccessDecision& decision, const GasSchedule& s) {
    std::uint64_t gas = s.v_base + s.v_check * static_cast<std::uint64_t>(decision.checks_evaluated);
    if (decision.ok()) gas += s.v_attr * request.params().size();
    return {gas, "validate_role", contract.id()};
}

Bytes rights_message(const std::string& user_id, const rbac::Mask& mask) {
    ByteWriter w;
    w.str("rights").str(user_id);
    rbac::write_mask(w, mask);
    return std::move(w).take();
}

ValidationOutcome execute_validation(const SmartContract& contract, const rbac::RegisteredUser* user,
                                     const rbac::AccessRequest& request, ByteView bam_private_key,
                                     const GasSchedule& schedule) {
    rbac::require_well_formed(contract.rules().catalog(), request);
    return finalize_validation(contract, request, rbac::check_accessibility_rules(contract.rules(), user, request),
                               bam_private_key, schedule);
}

ValidationOutcome finalize_validation(const SmartContract& contract, const rbac::AccessRequest& request,
                                      rbac::AccessDecision decision, ByteView bam_private_key,
                                      const GasSchedule& schedule) {
    ValidationOutcome out;
    out.gas = gas_of_validation(contract, request, decision, schedule);
    if (decision.ok()) {
        out.signed_rights = crypto::sign(rights_message(request.user_id(), decision.granted->mask), bam_private_key);
        out.rights = std::move(decision.granted);
    } else {
        out.denial = std::move(decision.denial);
    }
    return out;
}

rbac::RbacModel reference_model(std::size_t role_count) {
    rbac::AttributeCatalog catalog({"status", "quantity", "quality", "destination"});
    std::vector<rbac::Right> rights{{"view_status", {true, false, false, false}},
                                    {"view_all", {true, true, true, true}}};
    std::vector<rbac::Role> roles;
    rbac::UserType staff{"staff", {}};
    for (std::size_t i = 1; i <= role_count; ++i) {
        auto id = "role_" + std::to_string(i);
        roles.push_back({id, {"view_status"}});
        staff.roles.insert(id);
    }
    return rbac::build_model(std::move(catalog), std::move(rights), std::move(roles), {std::move(staff)});
}

}  // namespace rbacchain::contract
