#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "rbacchain/errors.hpp"
#include "rbacchain/policy.hpp"
#include "rbacchain/rbac.hpp"

using namespace rbacchain;
using namespace rbacchain::rbac;

namespace {

RbacModel engineer_model() {
    return build_model(AttributeCatalog({"status", "qty"}), {{"g1", {true, false}}}, {{"r1", {"g1"}}},
                       {{"engineer", {"r1"}}});
}

RbacModel two_role_model() {
    return build_model(AttributeCatalog({"status", "qty"}), {{"g1", {true, false}}, {"g2", {false, true}}},
                       {{"r1", {"g1"}}, {"r2", {"g2"}}}, {{"engineer", {"r1", "r2"}}});
}

}  // namespace

TEST(Catalog, RejectsDuplicatesAndEmpty) {
    EXPECT_THROW(AttributeCatalog(std::vector<std::string>{}), ModelValidationError);
    EXPECT_THROW(AttributeCatalog({"a", "a"}), ModelValidationError);
    AttributeCatalog c({"x", "y"});
    EXPECT_EQ(c.index_of("y"), 1u);
    EXPECT_FALSE(c.index_of("z"));
}

TEST(BuildModel, MinimalModelIsValid) {
    auto m = engineer_model();
    EXPECT_EQ(m.rights().size(), 1u);
    EXPECT_NE(m.find_user_type("engineer"), nullptr);
}

TEST(BuildModel, DanglingReferencesNameTheId) {
    try {
        build_model(AttributeCatalog({"a"}), {}, {{"r1", {"g_missing"}}}, {});
        FAIL() << "expected ModelValidationError";
    } catch (const ModelValidationError& e) {
        EXPECT_EQ(e.name(), "g_missing");
    }
    EXPECT_THROW(build_model(AttributeCatalog({"a"}), {}, {}, {{"t", {"ghost_role"}}}), ModelValidationError);
}

TEST(BuildModel, MaskLengthMustMatchCatalog) {
    EXPECT_THROW(build_model(AttributeCatalog({"a", "b"}), {{"g", {true, false, true}}}, {}, {}), MaskLengthError);
}

TEST(BuildModel, CanonicalBytesRoundTrip) {
    auto m = two_role_model();
    auto bytes = m.canonical_bytes();
    ByteReader r(bytes);
    auto back = RbacModel::decode(r);
    EXPECT_EQ(back.canonical_bytes(), bytes);
}

TEST(RegisterUser, ChecksTypeAndRoles) {
    auto m = engineer_model();
    auto u = register_user(m, "p1", "engineer", {"r1"});
    EXPECT_EQ(u.roles, std::set<std::string>{"r1"});
    EXPECT_THROW(register_user(m, "p1", "engineer", {"r2"}), RoleNotPermitted);
    EXPECT_THROW(register_user(m, "p1", "ghost_type", {"r1"}), InvalidUserType);
}

TEST(AccessRequestTest, EmptyParamsRejected) {
    EXPECT_THROW(AccessRequest("p", {}), RequestError);
    AccessRequest req("p", {{"status", std::string("ok")}, {"qty", std::int64_t{5}}});
    auto bytes = req.canonical_bytes();
    ByteReader r(bytes);
    EXPECT_EQ(AccessRequest::decode(r), req);
}

TEST(ParseValue, IntegersAndStrings) {
    EXPECT_EQ(parse_value("42"), Value(std::int64_t{42}));
    EXPECT_EQ(parse_value("-3"), Value(std::int64_t{-3}));
    EXPECT_EQ(parse_value("ok"), Value(std::string("ok")));
    EXPECT_EQ(parse_value("4x"), Value(std::string("4x")));
}

TEST(Accessibility, GrantedWithMask) {
    auto m = engineer_model();
    auto u = register_user(m, "p1", "engineer", {"r1"});
    auto d = check_accessibility_rules(m, u, AccessRequest("p1", {{"status", std::string("ok")}}));
    ASSERT_TRUE(d.ok());
    EXPECT_EQ(d.granted->mask, (Mask{true, false}));
    EXPECT_EQ(d.checks_evaluated, 4);
}

TEST(Accessibility, HiddenAttributeDeniedAtFive) {
    auto m = engineer_model();
    auto u = register_user(m, "p1", "engineer", {"r1"});
    auto d = check_accessibility_rules(m, u, AccessRequest("p1", {{"qty", std::int64_t{5}}}));
    ASSERT_FALSE(d.ok());
    EXPECT_EQ(d.denial->semantic, Semantic::AttributeAccess);
}

TEST(Accessibility, UnionOfRoles) {
    auto m = two_role_model();
    auto u = register_user(m, "p1", "engineer", {"r1", "r2"});
    auto d = check_accessibility_rules(m, u, AccessRequest("p1", {{"status", std::string("ok")}, {"qty", std::int64_t{1}}}));
    ASSERT_TRUE(d.ok());
    EXPECT_EQ(d.granted->mask, (Mask{true, true}));
}

TEST(Accessibility, InvalidTypeCitesSemanticTwoFirst) {
    auto m = engineer_model();
    RegisteredUser u{"p1", "ghost", {"not_a_role"}};
    auto d = check_accessibility_rules(m, u, AccessRequest("p1", {{"nope", std::int64_t{1}}}));
    ASSERT_FALSE(d.ok());
    EXPECT_EQ(d.denial->semantic, Semantic::UserType);
    EXPECT_NE(d.denial->reason.find("Invalid User"), std::string::npos);

    auto missing = check_accessibility_rules(m, nullptr, AccessRequest("p9", {{"status", std::int64_t{1}}}));
    EXPECT_EQ(missing.denial->semantic, Semantic::UserType);
}

TEST(Accessibility, UnassignedRoleDeniedAtThree) {
    auto m = two_role_model();
    RegisteredUser u{"p1", "engineer", {"r3"}};
    auto d = check_accessibility_rules(m, u, AccessRequest("p1", {{"status", std::int64_t{1}}}));
    EXPECT_EQ(d.denial->semantic, Semantic::RoleAssignment);
    EXPECT_EQ(d.checks_evaluated, 2);
}

TEST(EffectiveMask, ZeroRolesIsAllFalse) {
    auto m = engineer_model();
    EXPECT_EQ(effective_mask(m, RegisteredUser{"p", "engineer", {}}).mask, (Mask{false, false}));
}

TEST(EffectiveMask, SingleRight) {
    auto m = build_model(AttributeCatalog({"a", "b", "c"}), {{"g", {true, true, false}}}, {{"r", {"g"}}}, {{"t", {"r"}}});
    EXPECT_EQ(effective_mask(m, RegisteredUser{"p", "t", {"r"}}).mask, (Mask{true, true, false}));
}

TEST(EffectiveMask, UnknownUserThrows) {
    UserDirectory dir;
    EXPECT_THROW(effective_mask(engineer_model(), dir, "nobody"), UnknownUser);
}

// Exhaustive 3-role / 3-right / 4-attribute space: for a fixed random model,
// every role subset of the single all-roles type matches the oracle's OR.
TEST(EffectiveMask, MatchesOracleOnThreeByThreeByFour) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto toy = oracle::random_model(1, 3, 3, 4, rng);
        toy.assign[0] = {true, true, true};
        auto model = toy.build();
        for (auto& roles : oracle::all_subsets(3)) {
            oracle::ToyUser tu{true, 0, roles};
            auto expected = oracle::decide(toy, tu, {});
            ASSERT_TRUE(expected.granted);
            EXPECT_EQ(effective_mask(model, tu.materialize("p")).mask, expected.mask);
        }
    }
}

TEST(EffectiveMask, MonotoneInRoles) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        auto toy = oracle::random_model(1, 4, 4, 5, rng);
        toy.assign[0] = {true, true, true, true};
        auto model = toy.build();
        for (auto& roles : oracle::all_subsets(3)) {
            auto base = effective_mask(model, oracle::ToyUser{true, 0, roles}.materialize("p")).mask;
            auto more_roles = roles;
            more_roles.push_back(3);
            auto more = effective_mask(model, oracle::ToyUser{true, 0, more_roles}.materialize("p")).mask;
            for (std::size_t j = 0; j < base.size(); ++j) EXPECT_TRUE(!base[j] || more[j]);
        }
    }
}

TEST(Accessibility, AgreesWithOracleOnRandomSmallModels) {
    std::mt19937_64 rng(29);
    std::size_t compared = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto toy = oracle::random_model(1 + rng() % 3, rng() % 4, rng() % 4, 1 + rng() % 4, rng);
        auto model = toy.build();
        for (const auto& tu : oracle::users_for(toy)) {
            auto user = tu.materialize("p");
            for (const auto& atts : oracle::requests_for(toy)) {
                auto exp = oracle::decide(toy, tu, atts);
                auto got = check_accessibility_rules(model, tu.registered ? &user : nullptr, oracle::to_request("p", atts));
                ASSERT_EQ(got.ok(), exp.granted);
                ASSERT_EQ(got.checks_evaluated, exp.checks);
                if (exp.granted) {
                    ASSERT_EQ(got.granted->mask, exp.mask);
                } else {
                    ASSERT_EQ(static_cast<int>(got.denial->semantic), exp.semantic);
                }
                ++compared;
            }
        }
    }
    EXPECT_GT(compared, 1000u);
}

TEST(Accessibility, GrantImpliesEveryRequestedBitSet) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        auto toy = oracle::random_model(2, 3, 3, 4, rng);
        auto model = toy.build();
        for (const auto& tu : oracle::users_for(toy)) {
            auto user = tu.materialize("p");
            for (const auto& atts : oracle::requests_for(toy)) {
                auto d = check_accessibility_rules(model, user, oracle::to_request("p", atts));
                if (!d.ok()) continue;
                for (auto j : atts) EXPECT_TRUE(d.granted->mask[j]);
            }
        }
    }
}

TEST(Policy, JsonRoundTrip) {
    auto m = two_role_model();
    auto j = policy::model_to_json(m);
    auto back = policy::model_from_json(j);
    EXPECT_EQ(back.canonical_bytes(), m.canonical_bytes());
}

TEST(Policy, MalformedJsonIsDecodeError) {
    EXPECT_THROW(policy::model_from_json(nlohmann::json{{"rights", 3}}), DecodeError);
    nlohmann::json dangling = {{"attributes", {"a"}}, {"roles", {{{"id", "r"}, {"rights", {"g"}}}}}};
    EXPECT_THROW(policy::model_from_json(dangling), ModelValidationError);
}

TEST(Policy, ValueJson) {
    EXPECT_EQ(policy::value_from_json(nlohmann::json(5)), Value(std::int64_t{5}));
    EXPECT_EQ(policy::value_from_json(nlohmann::json("x")), Value(std::string("x")));
    EXPECT_THROW(policy::value_from_json(nlohmann::json(1.5)), SchemaError);
}
