#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rbacchain/bytes.hpp"

namespace rbacchain::rbac {

/// Attribute values are either 64-bit integers or strings.
using Value = std::variant<std::int64_t, std::string>;

std::string to_string(const Value& v);
/// Integers for all-digit input (optionally signed), strings otherwise.
Value parse_value(std::string_view text);
void write_value(ByteWriter& w, const Value& v);
Value read_value(ByteReader& r);

/// Bit j set means attribute j of the catalog is accessible.
using Mask = std::vector<bool>;

void write_mask(ByteWriter& w, const Mask& m);
Mask read_mask(ByteReader& r);

class AttributeCatalog {
public:
    AttributeCatalog() = default;
    /// Throws ModelValidationError on duplicates or an empty list.
    explicit AttributeCatalog(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> index_of(std::string_view name) const;

    bool operator==(const AttributeCatalog&) const = default;

private:
    std::vector<std::string> names_;
};

struct Right {
    std::string id;
    Mask mask;
};

struct Role {
    std::string id;
    std::set<std::string> rights;
};

struct UserType {
    std::string id;
    std::set<std::string> roles;
};

/// Immutable, referentially closed RBAC model.
class RbacModel {
public:
    const AttributeCatalog& catalog() const { return catalog_; }
    const std::map<std::string, Right>& rights() const { return rights_; }
    const std::map<std::string, Role>& roles() const { return roles_; }
    const std::map<std::string, UserType>& user_types() const { return user_types_; }

    const Right* find_right(const std::string& id) const;
    const Role* find_role(const std::string& id) const;
    const UserType* find_user_type(const std::string& id) const;

    /// Deterministic encoding: catalog, then rights, roles and user types in id order.
    Bytes canonical_bytes() const;
    static RbacModel decode(ByteReader& r);

    friend RbacModel build_model(AttributeCatalog, std::vector<Right>, std::vector<Role>, std::vector<UserType>);

private:
    AttributeCatalog catalog_;
    std::map<std::string, Right> rights_;
    std::map<std::string, Role> roles_;
    std::map<std::string, UserType> user_types_;
};

/// Validates mask lengths (MaskLengthError) and role/right references
/// (ModelValidationError naming the dangling id).
RbacModel build_model(AttributeCatalog catalog, std::vector<Right> rights, std::vector<Role> roles,
                      std::vector<UserType> user_types);

struct RegisteredUser {
    std::string user_id;
    std::string user_type;
    std::set<std::string> roles;

    bool operator==(const RegisteredUser&) const = default;
};

void write_user(ByteWriter& w, const RegisteredUser& u);
RegisteredUser read_user(ByteReader& r);

/// Checks the user type exists and the roles are a subset of its assignment.
RegisteredUser register_user(const RbacModel& model, std::string user_id, const std::string& user_type_id,
                             std::set<std::string> role_ids);

class AccessRequest {
public:
    using Param = std::pair<std::string, Value>;

    /// Throws RequestError when `params` is empty.
    AccessRequest(std::string user_id, std::vector<Param> params);

    const std::string& user_id() const { return user_id_; }
    const std::vector<Param>& params() const { return params_; }

    Bytes canonical_bytes() const;
    static AccessRequest decode(ByteReader& r);

    bool operator==(const AccessRequest&) const = default;

private:
    std::string user_id_;
    std::vector<Param> params_;
};

/// Throws RequestError if a parameter names an attribute outside the catalog.
void require_well_formed(const AttributeCatalog& catalog, const AccessRequest& request);

struct EffectiveRights {
    Mask mask;

    bool operator==(const EffectiveRights&) const = default;
};

/// Which accessibility semantic rejected the request.
enum class Semantic : int {
    UserType = 2,      // p.type in U
    RoleAssignment = 3,  // p.role within the type's assignment
    RightAssociation = 4,  // p.rights resolve in G
    AttributeAccess = 5,   // every requested attribute visible
};

struct Denial {
    Semantic semantic;
    std::string reason;
};

struct AccessDecision {
    std::optional<EffectiveRights> granted;
    std::optional<Denial> denial;
    /// Semantics evaluated before deciding (1..4).
    int checks_evaluated = 0;

    bool ok() const { return granted.has_value(); }
};

/// Evaluates the accessibility semantics in order and stops at the first
/// violation. A missing user is reported as a user-type violation.
AccessDecision check_accessibility_rules(const RbacModel& model, const RegisteredUser* user,
                                         const AccessRequest& request);
inline AccessDecision check_accessibility_rules(const RbacModel& model, const RegisteredUser& user,
                                                const AccessRequest& request) {
    return check_accessibility_rules(model, &user, request);
}

/// Element-wise OR over every right reachable through the user's roles.
/// Roles or rights absent from the model contribute nothing.
EffectiveRights effective_mask(const RbacModel& model, const RegisteredUser& user);

class UserDirectory {
public:
    void put(RegisteredUser user);
    const RegisteredUser* find(const std::string& user_id) const;
    /// Throws UnknownUser.
    const RegisteredUser& at(const std::string& user_id) const;
    std::size_t size() const { return users_.size(); }
    const std::map<std::string, RegisteredUser>& all() const { return users_; }

private:
    std::map<std::string, RegisteredUser> users_;
};

/// Throws UnknownUser when `user_id` is not in the directory.
EffectiveRights effective_mask(const RbacModel& model, const UserDirectory& users, const std::string& user_id);

}  // namespace rbacchain::rbac
