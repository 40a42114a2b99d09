#include "rbacchain/rbac.hpp"

#include <algorithm>
#include <charconv>

namespace rbacchain::rbac {

namespace {
constexpr std::uint8_t kIntTag = 0;
constexpr std::uint8_t kStringTag = 1;

void write_set(ByteWriter& w, const std::set<std::string>& s) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (const auto& x : s) w.str(x);
}

std::set<std::string> read_set(ByteReader& r) {
    std::set<std::string> out;
    auto n = r.u32();
    std::string prev;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto s = r.str();
        if (i > 0 && s <= prev) throw DecodeError("set entries out of canonical order");
        prev = s;
        out.insert(std::move(s));
    }
    return out;
}
}  // namespace

std::string to_string(const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    return std::get<std::string>(v);
}

Value parse_value(std::string_view text) {
    std::int64_t n = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
    if (!text.empty() && ec == std::errc() && ptr == text.data() + text.size()) return n;
    return std::string(text);
}

void write_value(ByteWriter& w, const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) {
        w.u8(kIntTag).i64(*i);
    } else {
        w.u8(kStringTag).str(std::get<std::string>(v));
    }
}

Value read_value(ByteReader& r) {
    switch (r.u8()) {
        case kIntTag: return r.i64();
        case kStringTag: return r.str();
        default: throw DecodeError("unknown value tag");
    }
}

void write_mask(ByteWriter& w, const Mask& m) {
    w.u32(static_cast<std::uint32_t>(m.size()));
    for (bool b : m) w.boolean(b);
}

Mask read_mask(ByteReader& r) {
    auto n = r.u32();
    if (n > r.remaining()) throw DecodeError("truncated mask");
    Mask m(n);
    for (std::uint32_t i = 0; i < n; ++i) m[i] = r.boolean();
    return m;
}

AttributeCatalog::AttributeCatalog(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ModelValidationError("attribute catalog is empty");
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (!seen.insert(n).second) throw ModelValidationError("duplicate attribute " + n);
    }
}

std::optional<std::size_t> AttributeCatalog::index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

const Right* RbacModel::find_right(const std::string& id) const {
    auto it = rights_.find(id);
    return it == rights_.end() ? nullptr : &it->second;
}

const Role* RbacModel::find_role(const std::string& id) const {
    auto it = roles_.find(id);
    return it == roles_.end() ? nullptr : &it->second;
}

const UserType* RbacModel::find_user_type(const std::string& id) const {
    auto it = user_types_.find(id);
    return it == user_types_.end() ? nullptr : &it->second;
}

Bytes RbacModel::canonical_bytes() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(catalog_.size()));
    for (const auto& n : catalog_.names()) w.str(n);
    w.u32(static_cast<std::uint32_t>(rights_.size()));
    for (const auto& [id, right] : rights_) {
        w.str(id);
        write_mask(w, right.mask);
    }
    w.u32(static_cast<std::uint32_t>(roles_.size()));
    for (const auto& [id, role] : roles_) {
        w.str(id);
        write_set(w, role.rights);
    }
    w.u32(static_cast<std::uint32_t>(user_types_.size()));
    for (const auto& [id, type] : user_types_) {
        w.str(id);
        write_set(w, type.roles);
    }
    return std::move(w).take();
}

RbacModel RbacModel::decode(ByteReader& r) {
    std::vector<std::string> names(r.u32());
    for (auto& n : names) n = r.str();
    std::vector<Right> rights(r.u32());
    for (auto& g : rights) {
        g.id = r.str();
        g.mask = read_mask(r);
    }
    std::vector<Role> roles(r.u32());
    for (auto& role : roles) {
        role.id = r.str();
        role.rights = read_set(r);
    }
    std::vector<UserType> types(r.u32());
    for (auto& t : types) {
        t.id = r.str();
        t.roles = read_set(r);
    }
    auto model = build_model(AttributeCatalog(std::move(names)), std::move(rights), std::move(roles), std::move(types));
    return model;
}

RbacModel build_model(AttributeCatalog catalog, std::vector<Right> rights, std::vector<Role> roles,
                      std::vector<UserType> user_types) {
    if (catalog.size() == 0) throw ModelValidationError("attribute catalog is empty");
    RbacModel m;
    m.catalog_ = std::move(catalog);
    for (auto& g : rights) {
        if (g.mask.size() != m.catalog_.size()) {
            throw MaskLengthError("right " + g.id + " has mask length " + std::to_string(g.mask.size()) +
                                  ", catalog has " + std::to_string(m.catalog_.size()));
        }
        auto id = g.id;
        if (!m.rights_.emplace(id, std::move(g)).second) throw ModelValidationError("duplicate right " + id);
    }
    for (auto& role : roles) {
        for (const auto& g : role.rights) {
            if (!m.rights_.contains(g)) throw ModelValidationError(g);
        }
        auto id = role.id;
        if (!m.roles_.emplace(id, std::move(role)).second) throw ModelValidationError("duplicate role " + id);
    }
    for (auto& type : user_types) {
        for (const auto& r : type.roles) {
            if (!m.roles_.contains(r)) throw ModelValidationError(r);
        }
        auto id = type.id;
        if (!m.user_types_.emplace(id, std::move(type)).second) {
            throw ModelValidationError("duplicate user type " + id);
        }
    }
    return m;
}

void write_user(ByteWriter& w, const RegisteredUser& u) {
    w.str(u.user_id).str(u.user_type);
    write_set(w, u.roles);
}

RegisteredUser read_user(ByteReader& r) {
    RegisteredUser u;
    u.user_id = r.str();
    u.user_type = r.str();
    u.roles = read_set(r);
    return u;
}

RegisteredUser register_user(const RbacModel& model, std::string user_id, const std::string& user_type_id,
                             std::set<std::string> role_ids) {
    const auto* type = model.find_user_type(user_type_id);
    if (type == nullptr) throw InvalidUserType("unknown user type " + user_type_id);
    for (const auto& r : role_ids) {
        if (!type->roles.contains(r)) throw RoleNotPermitted("role " + r + " is not assigned to " + user_type_id);
    }
    return {std::move(user_id), user_type_id, std::move(role_ids)};
}

AccessRequest::AccessRequest(std::string user_id, std::vector<Param> params)
    : user_id_(std::move(user_id)), params_(std::move(params)) {
    if (params_.empty()) throw RequestError("access request needs at least one (attribute, value) pair");
}

Bytes AccessRequest::canonical_bytes() const {
    ByteWriter w;
    w.str(user_id_).u32(static_cast<std::uint32_t>(params_.size()));
    for (const auto& [att, val] : params_) {
        w.str(att);
        write_value(w, val);
    }
    return std::move(w).take();
}

AccessRequest AccessRequest::decode(ByteReader& r) {
    auto user = r.str();
    auto n = r.u32();
    if (n > r.remaining()) throw DecodeError("truncated request");
    std::vector<Param> params;
    params.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto att = r.str();
        params.emplace_back(std::move(att), read_value(r));
    }
    try {
        return AccessRequest(std::move(user), std::move(params));
    } catch (const RequestError& e) {
        throw DecodeError(e.what());
    }
}

void require_well_formed(const AttributeCatalog& catalog, const AccessRequest& request) {
    for (const auto& [att, _] : request.params()) {
        if (!catalog.index_of(att)) throw RequestError("attribute " + att + " is not in the catalog");
    }
}

EffectiveRights effective_mask(const RbacModel& model, const RegisteredUser& user) {
    Mask mask(model.catalog().size(), false);
    for (const auto& role_id : user.roles) {
        const auto* role = model.find_role(role_id);
        if (role == nullptr) continue;
        for (const auto& right_id : role->rights) {
            const auto* right = model.find_right(right_id);
            if (right == nullptr) continue;
            for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = mask[j] || right->mask[j];
        }
    }
    return {std::move(mask)};
}

AccessDecision check_accessibility_rules(const RbacModel& model, const RegisteredUser* user,
                                         const AccessRequest& request) {
    AccessDecision d;
    auto deny = [&](Semantic s, std::string why) {
        d.denial = Denial{s, std::move(why)};
        return d;
    };

    d.checks_evaluated = 1;
    if (user == nullptr) return deny(Semantic::UserType, "Invalid User: " + request.user_id() + " is not registered");
    const auto* type = model.find_user_type(user->user_type);
    if (type == nullptr) return deny(Semantic::UserType, "Invalid User: unknown user type " + user->user_type);

    d.checks_evaluated = 2;
    for (const auto& r : user->roles) {
        if (model.find_role(r) == nullptr || !type->roles.contains(r)) {
            return deny(Semantic::RoleAssignment, "role " + r + " is not assigned to " + type->id);
        }
    }

    d.checks_evaluated = 3;
    for (const auto& r : user->roles) {
        for (const auto& g : model.find_role(r)->rights) {
            if (model.find_right(g) == nullptr) return deny(Semantic::RightAssociation, "right " + g + " unresolved");
        }
    }

    d.checks_evaluated = 4;
    auto rights = effective_mask(model, *user);
    for (const auto& [att, _] : request.params()) {
        auto idx = model.catalog().index_of(att);
        if (!idx) return deny(Semantic::AttributeAccess, "attribute " + att + " is not in the catalog");
        if (!rights.mask[*idx]) return deny(Semantic::AttributeAccess, "attribute " + att + " is not accessible");
    }
    d.granted = std::move(rights);
    return d;
}

void UserDirectory::put(RegisteredUser user) {
    auto id = user.user_id;
    users_.insert_or_assign(std::move(id), std::move(user));
}

const RegisteredUser* UserDirectory::find(const std::string& user_id) const {
    auto it = users_.find(user_id);
    return it == users_.end() ? nullptr : &it->second;
}

const RegisteredUser& UserDirectory::at(const std::string& user_id) const {
    const auto* u = find(user_id);
    if (u == nullptr) throw UnknownUser("unknown user " + user_id);
    return *u;
}

EffectiveRights effective_mask(const RbacModel& model, const UserDirectory& users, const std::string& user_id) {
    return effective_mask(model, users.at(user_id));
}

}  // namespace rbacchain::rbac
