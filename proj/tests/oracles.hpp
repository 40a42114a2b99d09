#pragma once

// Brute-force reference implementations used by the tests. They work on plain
// adjacency matrices rather than the library's model types, so a bug in the
// library's lookups cannot hide in both places at once.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rbacchain/rbac.hpp"

namespace oracle {

struct ToyModel {
    std::size_t attributes = 0;
    // rights[g][j]: right g grants attribute j
    std::vector<std::vector<bool>> rights;
    // assoc[r][g]: role r holds right g
    std::vector<std::vector<bool>> assoc;
    // assign[u][r]: user type u may hold role r
    std::vector<std::vector<bool>> assign;

    std::size_t n_types() const { return assign.size(); }
    std::size_t n_roles() const { return assoc.size(); }
    std::size_t n_rights() const { return rights.size(); }

    static std::string att(std::size_t j) { return "a" + std::to_string(j); }
    static std::string right(std::size_t g) { return "g" + std::to_string(g); }
    static std::string role(std::size_t r) { return "r" + std::to_string(r); }
    static std::string type(std::size_t u) { return "u" + std::to_string(u); }

    rbacchain::rbac::RbacModel build() const {
        using namespace rbacchain::rbac;
        std::vector<std::string> names;
        for (std::size_t j = 0; j < attributes; ++j) names.push_back(att(j));
        std::vector<Right> rs;
        for (std::size_t g = 0; g < n_rights(); ++g) rs.push_back({right(g), rights[g]});
        std::vector<Role> ros;
        for (std::size_t r = 0; r < n_roles(); ++r) {
            Role role_{role(r), {}};
            for (std::size_t g = 0; g < n_rights(); ++g) {
                if (assoc[r][g]) role_.rights.insert(right(g));
            }
            ros.push_back(role_);
        }
        std::vector<UserType> ts;
        for (std::size_t u = 0; u < n_types(); ++u) {
            UserType t{type(u), {}};
            for (std::size_t r = 0; r < n_roles(); ++r) {
                if (assign[u][r]) t.roles.insert(role(r));
            }
            ts.push_back(t);
        }
        return build_model(AttributeCatalog(names), rs, ros, ts);
    }
};

inline ToyModel random_model(std::size_t types, std::size_t roles, std::size_t rights, std::size_t attributes,
                             std::mt19937_64& rng) {
    ToyModel m;
    m.attributes = attributes;
    auto coin = [&] { return rng() % 2 == 0; };
    m.rights.assign(rights, std::vector<bool>(attributes));
    for (auto& row : m.rights)
        for (std::size_t j = 0; j < attributes; ++j) row[j] = coin();
    m.assoc.assign(roles, std::vector<bool>(rights));
    for (auto& row : m.assoc)
        for (std::size_t g = 0; g < rights; ++g) row[g] = coin();
    m.assign.assign(types, std::vector<bool>(roles));
    for (auto& row : m.assign)
        for (std::size_t r = 0; r < roles; ++r) row[r] = coin();
    return m;
}

/// A user as the oracle sees it: type index (or a foreign name) and role indices.
/// Role indices >= n_roles stand for role names absent from the model.
struct ToyUser {
    bool registered = true;
    std::optional<std::size_t> type;  // nullopt: type name not in the model
    std::vector<std::size_t> roles;

    rbacchain::rbac::RegisteredUser materialize(const std::string& id) const {
        rbacchain::rbac::RegisteredUser u{id, type ? ToyModel::type(*type) : std::string("ghost"), {}};
        for (auto r : roles) u.roles.insert(ToyModel::role(r));
        return u;
    }
};

struct Expected {
    bool granted = false;
    int semantic = 0;  // 2..5 when denied
    int checks = 0;
    std::vector<bool> mask;
};

/// Requested attributes by index; an index >= attributes names an attribute
/// outside the catalog.
inline Expected decide(const ToyModel& m, const ToyUser& user, const std::vector<std::size_t>& requested) {
    Expected e;
    if (!user.registered || !user.type || *user.type >= m.n_types()) {
        e.semantic = 2;
        e.checks = 1;
        return e;
    }
    for (auto r : user.roles) {
        if (r >= m.n_roles() || !m.assign[*user.type][r]) {
            e.semantic = 3;
            e.checks = 2;
            return e;
        }
    }
    // Every (role, right) pair of the whole model, kept when the user holds the role.
    std::vector<bool> mask(m.attributes, false);
    for (std::size_t r = 0; r < m.n_roles(); ++r) {
        bool held = false;
        for (auto ur : user.roles) held = held || ur == r;
        if (!held) continue;
        for (std::size_t g = 0; g < m.n_rights(); ++g) {
            if (!m.assoc[r][g]) continue;
            for (std::size_t j = 0; j < m.attributes; ++j) mask[j] = mask[j] || m.rights[g][j];
        }
    }
    for (auto j : requested) {
        if (j >= m.attributes || !mask[j]) {
            e.semantic = 5;
            e.checks = 4;
            return e;
        }
    }
    e.granted = true;
    e.checks = 4;
    e.mask = mask;
    return e;
}

/// Every non-empty subset of {0..n-1}, as index lists.
inline std::vector<std::vector<std::size_t>> nonempty_subsets(std::size_t n) {
    std::vector<std::vector<std::size_t>> out;
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < n; ++i) {
            if (bits & (1u << i)) s.push_back(i);
        }
        out.push_back(s);
    }
    return out;
}

/// All subsets including the empty one.
inline std::vector<std::vector<std::size_t>> all_subsets(std::size_t n) {
    auto out = nonempty_subsets(n);
    out.insert(out.begin(), std::vector<std::size_t>{});
    return out;
}

/// Users worth checking against a model: every type with every role subset
/// (assigned or not), a foreign type, a foreign role and an unregistered id.
inline std::vector<ToyUser> users_for(const ToyModel& m) {
    std::vector<ToyUser> out;
    for (std::size_t u = 0; u < m.n_types(); ++u) {
        for (auto& roles : all_subsets(m.n_roles())) out.push_back({true, u, roles});
        out.push_back({true, u, {m.n_roles()}});
    }
    out.push_back({true, std::nullopt, {}});
    out.push_back({false, std::nullopt, {}});
    return out;
}

/// Requests: every non-empty attribute subset plus one naming a foreign attribute.
inline std::vector<std::vector<std::size_t>> requests_for(const ToyModel& m) {
    auto out = nonempty_subsets(m.attributes);
    out.push_back({m.attributes});
    return out;
}

inline rbacchain::rbac::AccessRequest to_request(const std::string& user_id, const std::vector<std::size_t>& atts) {
    std::vector<rbacchain::rbac::AccessRequest::Param> params;
    for (auto j : atts) params.emplace_back(ToyModel::att(j), std::int64_t{1});
    return {user_id, params};
}

/// Which attributes a served record may show: bit j of the mask.
inline bool leaks(const std::vector<std::string>& catalog, const std::vector<bool>& mask,
                  const std::vector<std::string>& shown) {
    for (const auto& att : shown) {
        std::size_t j = 0;
        while (j < catalog.size() && catalog[j] != att) ++j;
        if (j == catalog.size() || !mask[j]) return true;
    }
    return false;
}

}  // namespace oracle
