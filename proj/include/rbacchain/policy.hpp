#pragma once

#include <filesystem>

#include <json.hpp>

#include "rbacchain/rbac.hpp"

namespace rbacchain::policy {

/// {attributes: [...], rights: [{id, mask}], roles: [{id, rights}], user_types: [{id, roles}]}
rbac::RbacModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const rbac::RbacModel& model);

rbac::RbacModel load_policy(const std::filesystem::path& path);

nlohmann::json value_to_json(const rbac::Value& v);
rbac::Value value_from_json(const nlohmann::json& j);

}  // namespace rbacchain::policy
