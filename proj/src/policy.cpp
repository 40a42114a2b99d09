#include "rbacchain/policy.hpp"

#include <fstream>

namespace rbacchain::policy {

using nlohmann::json;

rbac::RbacModel model_from_json(const json& j) {
    try {
        rbac::AttributeCatalog catalog(j.at("attributes").get<std::vector<std::string>>());
        std::vector<rbac::Right> rights;
        for (const auto& g : j.value("rights", json::array())) {
            rights.push_back({g.at("id").get<std::string>(), g.at("mask").get<std::vector<bool>>()});
        }
        std::vector<rbac::Role> roles;
        for (const auto& r : j.value("roles", json::array())) {
            roles.push_back({r.at("id").get<std::string>(), r.value("rights", std::set<std::string>{})});
        }
        std::vector<rbac::UserType> types;
        for (const auto& u : j.value("user_types", json::array())) {
            types.push_back({u.at("id").get<std::string>(), u.value("roles", std::set<std::string>{})});
        }
        return rbac::build_model(std::move(catalog), std::move(rights), std::move(roles), std::move(types));
    } catch (const json::exception& e) {
        throw DecodeError(std::string("malformed policy: ") + e.what());
    }
}

json model_to_json(const rbac::RbacModel& model) {
    json rights = json::array();
    for (const auto& [id, g] : model.rights()) rights.push_back({{"id", id}, {"mask", g.mask}});
    json roles = json::array();
    for (const auto& [id, r] : model.roles()) roles.push_back({{"id", id}, {"rights", r.rights}});
    json types = json::array();
    for (const auto& [id, u] : model.user_types()) types.push_back({{"id", id}, {"roles", u.roles}});
    return {{"attributes", model.catalog().names()}, {"rights", rights}, {"roles", roles}, {"user_types", types}};
}

rbac::RbacModel load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read policy file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DecodeError("policy file " + path.string() + " is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

json value_to_json(const rbac::Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
    return std::get<std::string>(v);
}

rbac::Value value_from_json(const json& j) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_string()) return j.get<std::string>();
    throw SchemaError("attribute values must be strings or integers, got " + j.dump());
}

}  // namespace rbacchain::policy
