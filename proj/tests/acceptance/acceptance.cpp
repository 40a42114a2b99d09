// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance [--only 1,4,7] [--csv-dir DIR]

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rbacchain/bench.hpp"
#include "rbacchain/contract.hpp"
#include "rbacchain/fabric.hpp"
#include "rbacchain/ledger.hpp"

using namespace rbacchain;
using Seconds = std::chrono::duration<double>;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string csv_dir;

void maybe_emit(const std::vector<bench::BenchRow>& rows, const std::string& name) {
    if (!csv_dir.empty()) bench::emit_csv(rows, std::filesystem::path(csv_dir) / (name + ".csv"));
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

std::vector<double> medians(const std::vector<bench::BenchRow>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.median);
    return out;
}

// ---------------------------------------------------------------------------

Verdict gas_reproduction() {
    auto rows = bench::bench_gas_roles(bench::parse_sweep("1..5"));
    maybe_emit(rows, "gas_roles");
    double lo = rows[0].median, hi = rows[0].median;
    bool in_band = true;
    for (const auto& r : rows) {
        in_band = in_band && r.median >= 82129 && r.median <= 82529;
        lo = std::min(lo, r.median);
        hi = std::max(hi, r.median);
    }
    double spread = (hi - lo) / lo;
    bool ok = rows[0].median == 82129 && in_band && spread <= 0.005;
    return {ok, "1 role = " + fmt(rows[0].median, 0) + ", range " + fmt(lo, 0) + ".." + fmt(hi, 0) +
                    ", spread " + fmt(100 * spread) + "%"};
}

Verdict cost_ratio() {
    auto sweep = bench::parse_sweep("1..5");
    auto proposed = bench::bench_gas_roles(sweep);
    auto baseline = bench::bench_gas_roles(sweep, contract::GasSchedule::baseline(), "gas_baseline");
    maybe_emit(baseline, "gas_baseline");
    double worst = 0;
    for (std::size_t i = 0; i < sweep.size(); ++i) worst = std::max(worst, proposed[i].median / baseline[i].median);
    bool ok = worst <= 0.57 && baseline[0].median == 145590;
    return {ok, "baseline 1 role = " + fmt(baseline[0].median, 0) + ", worst ratio " + fmt(worst)};
}

Verdict request_linearity() {
    bench::TimingOptions opt;
    opt.repetitions = 5;
    auto rows = bench::bench_concurrent_requests(bench::parse_sweep("50..300"), opt);
    maybe_emit(rows, "concurrent_requests");
    double r2 = bench::r2_of(rows);
    std::string series;
    for (const auto& r : rows) series += (series.empty() ? "" : " ") + fmt(r.median, 0);
    return {r2 >= 0.95, "R^2 = " + fmt(r2, 4) + " (medians ms: " + series + ")"};
}

Verdict deploy_vs_verify() {
    bench::TimingOptions opt;
    opt.repetitions = 7;
    auto rows = bench::bench_deploy_verify_rights(bench::parse_sweep("1..20"), opt);
    maybe_emit(rows, "deploy_verify_rights");
    auto deploy = bench::select(rows, "deploy");
    auto verify = bench::select(rows, "verify");
    std::size_t wins = 0;
    double min_gap = 1e18;
    for (std::size_t i = 0; i < deploy.size(); ++i) {
        wins += deploy[i].median > verify[i].median;
        min_gap = std::min(min_gap, deploy[i].median - verify[i].median);
    }
    return {wins == deploy.size() && deploy.size() == 20,
            std::to_string(wins) + "/" + std::to_string(deploy.size()) + " rights counts, smallest gap " +
                fmt(min_gap) + " ms"};
}

Verdict chain_scaling() {
    auto rows = bench::bench_chain_generation(bench::parse_sweep("10000..50000:10000"), {2, 4, 6, 8, 10, 15, 20});
    maybe_emit(rows, "chain_generation");
    auto recs = bench::select(rows, "chain_records");
    auto nodes = bench::select(rows, "chain_nodes");
    double r2r = bench::r2_of(recs), r2n = bench::r2_of(nodes);
    bool mono = bench::strictly_increasing(medians(recs)) && bench::strictly_increasing(medians(nodes));
    return {mono && r2r >= 0.95 && r2n >= 0.90,
            "records R^2 = " + fmt(r2r, 4) + ", nodes R^2 = " + fmt(r2n, 4) +
                (mono ? ", both monotone" : ", NOT monotone")};
}

// Every model whose matrices hold at most kExhaustiveBits bits is enumerated
// in full; larger shapes within the bounds are sampled.
constexpr std::size_t kExhaustiveBits = 11;
constexpr std::size_t kSamplesPerShape = 40;

struct OracleTally {
    std::uint64_t models = 0, pairs = 0, mismatches = 0;
    std::string first;
};

void compare_model(const oracle::ToyModel& toy, const crypto::KeyPair& bam, const crypto::ActorId& owner,
                   OracleTally& t) {
    auto s = contract::GasSchedule::proposed();
    auto model = toy.build();
    auto sc = contract::compile_contract(model, owner);
    ++t.models;
    auto miss = [&](const std::string& what) {
        if (t.mismatches++ == 0) t.first = what;
    };
    for (const auto& tu : oracle::users_for(toy)) {
        auto user = tu.materialize("p");
        const auto* up = tu.registered ? &user : nullptr;
        for (const auto& atts : oracle::requests_for(toy)) {
            ++t.pairs;
            auto req = oracle::to_request("p", atts);
            auto exp = oracle::decide(toy, tu, atts);
            auto got = rbac::check_accessibility_rules(model, up, req);
            bool same = got.ok() == exp.granted && got.checks_evaluated == exp.checks &&
                        (exp.granted ? got.granted->mask == exp.mask
                                     : static_cast<int>(got.denial->semantic) == exp.semantic);
            if (!same) miss("check_accessibility_rules");

            bool foreign = std::any_of(atts.begin(), atts.end(), [&](auto j) { return j >= toy.attributes; });
            if (foreign) {
                bool threw = false;
                try {
                    contract::execute_validation(sc, up, req, bam.private_key, s);
                } catch (const RequestError&) {
                    threw = true;
                }
                if (!threw) miss("execute_validation accepted a foreign attribute");
                continue;
            }
            auto out = contract::execute_validation(sc, up, req, bam.private_key, s);
            std::uint64_t gas = s.v_base + s.v_check * static_cast<std::uint64_t>(exp.checks) +
                                (exp.granted ? s.v_attr * atts.size() : 0);
            bool vsame = out.rights.has_value() == exp.granted && out.gas.gas_used == gas &&
                         (exp.granted ? out.rights->mask == exp.mask &&
                                            crypto::verify(contract::rights_message("p", exp.mask),
                                                           *out.signed_rights, bam.public_key)
                                      : static_cast<int>(out.denial->semantic) == exp.semantic);
            if (!vsame) miss("execute_validation");
        }
    }
}

oracle::ToyModel model_from_bits(std::size_t types, std::size_t roles, std::size_t rights, std::size_t atts,
                                 std::uint64_t bits) {
    oracle::ToyModel m;
    m.attributes = atts;
    auto next = [&] {
        bool b = bits & 1;
        bits >>= 1;
        return b;
    };
    m.rights.assign(rights, std::vector<bool>(atts));
    for (auto& row : m.rights)
        for (std::size_t j = 0; j < atts; ++j) row[j] = next();
    m.assoc.assign(roles, std::vector<bool>(rights));
    for (auto& row : m.assoc)
        for (std::size_t g = 0; g < rights; ++g) row[g] = next();
    m.assign.assign(types, std::vector<bool>(roles));
    for (auto& row : m.assign)
        for (std::size_t r = 0; r < roles; ++r) row[r] = next();
    return m;
}

Verdict oracle_equivalence() {
    auto bam = crypto::key_gen();
    auto owner = crypto::actor_id_of(crypto::key_gen().public_key);
    std::mt19937_64 rng(2024);
    OracleTally t;
    std::uint64_t exhaustive_shapes = 0, sampled_shapes = 0;
    for (std::size_t u = 0; u <= 4; ++u)
        for (std::size_t r = 0; r <= 4; ++r)
            for (std::size_t g = 0; g <= 4; ++g)
                for (std::size_t l = 1; l <= 4; ++l) {
                    std::size_t bits = u * r + r * g + g * l;
                    if (bits <= kExhaustiveBits) {
                        ++exhaustive_shapes;
                        for (std::uint64_t v = 0; v < (std::uint64_t{1} << bits); ++v)
                            compare_model(model_from_bits(u, r, g, l, v), bam, owner, t);
                    } else {
                        ++sampled_shapes;
                        for (std::size_t k = 0; k < kSamplesPerShape; ++k)
                            compare_model(oracle::random_model(u, r, g, l, rng), bam, owner, t);
                    }
                }
    std::string detail = std::to_string(t.mismatches) + " mismatches over " + std::to_string(t.models) +
                          " models / " + std::to_string(t.pairs) + " (user, request) pairs; " +
                          std::to_string(exhaustive_shapes) + " shapes enumerated in full, " +
                          std::to_string(sampled_shapes) + " shapes sampled (" + std::to_string(kSamplesPerShape) +
                          " each; full enumeration up to 2^48 models per shape is out of reach)";
    if (t.mismatches) detail += "; first: " + t.first;
    return {t.mismatches == 0, detail};
}

Verdict tamper_evidence() {
    auto chain = fixtures::mixed_chain(100, 99);
    auto bytes = ledger::encode_chain(chain.blocks());
    auto offsets = fixtures::frame_offsets(bytes);
    if (!ledger::verify_chain_bytes(bytes).ok()) return {false, "untampered chain failed to verify"};
    std::mt19937_64 rng(7);
    std::size_t missed = 0, wrong_height = 0;
    std::set<std::uint64_t> heights_hit;
    for (int i = 0; i < 1000; ++i) {
        auto copy = bytes;
        auto pos = rng() % copy.size();
        copy[pos] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        auto v = ledger::verify_chain_bytes(copy);
        if (v.ok()) {
            ++missed;
        } else if (*v.first_bad_height != fixtures::frame_of(offsets, pos)) {
            ++wrong_height;
        }
        heights_hit.insert(fixtures::frame_of(offsets, pos));
    }
    return {missed == 0 && wrong_height == 0 && chain.blocks().size() == 100,
            "1000 mutations over " + std::to_string(bytes.size()) + " bytes / 100 blocks (" +
                std::to_string(heights_hit.size()) + " distinct blocks hit): " + std::to_string(missed) +
                " missed, " + std::to_string(wrong_height) + " at the wrong height"};
}

Verdict authorization() {
    fabric::DeploymentConfig cfg;
    cfg.timeout = fabric::Millis(2000);
    fabric::Deployment dep(cfg, fabric::Identities::generate(), fixtures::plant_catalog());
    if (!dep.deploy_contract(fixtures::plant_model()).ok) return {false, "setup: contract deployment failed"};
    auto before = dep.chain_snapshot();
    std::mt19937_64 rng(8);
    std::size_t unauthorized = 0, other = 0;
    for (int i = 0; i < 100; ++i) {
        auto intruder = crypto::key_gen();
        auto nonce = 1 + rng() % 3;
        ledger::Transaction tx;
        fabric::NodeRole via = fabric::NodeRole::BDM;
        if (rng() % 2) {
            auto sc = contract::compile_contract(fixtures::plant_model(), crypto::actor_id_of(intruder.public_key),
                                                 static_cast<std::uint32_t>(1 + rng() % 50));
            tx = ledger::make_deploy_tx(sc, intruder, dep.node_id(fabric::NodeRole::BAM), nonce, before.schedule());
        } else {
            std::set<std::string> roles = rng() % 2 ? std::set<std::string>{"r1"} : std::set<std::string>{"r1", "r2"};
            tx = ledger::make_register_tx({"fake" + std::to_string(i), "engineer", roles}, intruder.public_key, intruder,
                                          dep.node_id(fabric::NodeRole::BDM), nonce, before.schedule());
        }
        auto r = dep.submit(tx, via);
        if (!r.ok && r.reason.find("UnauthorizedSender") != std::string::npos) {
            ++unauthorized;
        } else {
            ++other;
        }
    }
    dep.wait_synced(fabric::Millis(2000));
    auto after = dep.chain_snapshot();
    bool none_included = after.tip_hash() == before.tip_hash() && after.state().users.size() == 0;
    return {unauthorized == 100 && none_included,
            std::to_string(unauthorized) + "/100 rejected as UnauthorizedSender, " + std::to_string(other) +
                " otherwise; " + (none_included ? "chain unchanged" : "CHAIN CHANGED")};
}

Verdict masking() {
    std::mt19937_64 rng(9);
    std::size_t triples = 0, served = 0, records_shown = 0, leaks = 0, mismatched = 0;
    auto owner_ids = fabric::Identities::generate();
    while (triples < 500) {
        std::size_t l = 2 + rng() % 3;
        auto toy = oracle::random_model(1 + rng() % 2, 1 + rng() % 4, 1 + rng() % 4, l, rng);
        std::vector<std::string> names;
        for (std::size_t j = 0; j < l; ++j) names.push_back(oracle::ToyModel::att(j));

        fabric::DeploymentConfig cfg;
        cfg.timeout = fabric::Millis(3000);
        fabric::Deployment dep(cfg, owner_ids, rbac::AttributeCatalog(names));
        auto model = toy.build();
        if (!dep.deploy_contract(model).ok) return {false, "setup: deployment failed"};

        std::vector<datastore::DataRecord> corpus;
        for (int i = 0; i < 12; ++i) {
            datastore::DataRecord rec{"rec" + std::to_string(i), {}, {}, 0};
            for (std::size_t j = 0; j < l; ++j) {
                if (rng() % 4) rec.attributes.emplace(names[j], static_cast<std::int64_t>(rng() % 2));
            }
            if (rec.attributes.empty()) rec.attributes.emplace(names[0], std::int64_t{0});
            corpus.push_back(std::move(rec));
        }
        for (const auto& r : dep.ingest(corpus))
            if (!r.ok) return {false, "setup: ingest failed: " + r.reason};

        for (int k = 0; k < 10 && triples < 500; ++k, ++triples) {
            oracle::ToyUser tu{true, rng() % toy.n_types(), {}};
            for (std::size_t r = 0; r < toy.n_roles(); ++r)
                if (toy.assign[*tu.type][r] && rng() % 2) tu.roles.push_back(r);
            auto keys = crypto::key_gen();
            auto uid = crypto::actor_id_of(keys.public_key).hex();
            auto user = tu.materialize(uid);
            if (!dep.register_user(user, keys.public_key).ok) return {false, "setup: registration failed"};

            std::vector<std::size_t> atts;
            for (std::size_t j = 0; j < l; ++j)
                if (rng() % 3 == 0) atts.push_back(j);
            if (atts.empty()) atts.push_back(rng() % l);
            std::vector<rbac::AccessRequest::Param> params;
            for (auto j : atts) params.emplace_back(names[j], static_cast<std::int64_t>(rng() % 2));

            auto exp = oracle::decide(toy, tu, atts);
            auto out = dep.request(keys, rbac::AccessRequest(uid, params));
            if (out.ok != exp.granted) ++mismatched;
            if (!out.ok) continue;
            ++served;
            for (const auto& view : out.result->records) {
                ++records_shown;
                std::vector<std::string> shown;
                for (const auto& [att, _] : view.attributes) shown.push_back(att);
                if (oracle::leaks(names, exp.mask, shown)) ++leaks;
            }
        }
    }
    return {leaks == 0 && mismatched == 0 && served > 0,
            std::to_string(triples) + " triples, " + std::to_string(served) + " served, " +
                std::to_string(records_shown) + " records checked: " + std::to_string(leaks) + " leaks, " +
                std::to_string(mismatched) + " grant decisions differing from the oracle"};
}

Verdict replay_determinism() {
    std::mt19937_64 rng(10);
    std::size_t same = 0;
    std::size_t txs = 0;
    for (int i = 0; i < 20; ++i) {
        auto chain = fixtures::mixed_chain(10 + rng() % 90, 1000 + i);
        auto log = ledger::transaction_log(chain);
        txs += log.size();
        // a fresh node holds only the genesis block
        auto fresh = ledger::replay(chain.blocks()[0], log);
        if (fresh.tip_hash() == chain.tip_hash() && fresh.state().digest() == chain.state().digest()) ++same;
    }
    return {same == 20, std::to_string(same) + "/20 logs (" + std::to_string(txs) +
                            " transactions) reproduced the identical tip hash"};
}

struct Criterion {
    int number;
    std::string name;
    double limit_s;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
    app.add_option("--csv-dir", csv_dir, "write benchmark CSVs here");
    CLI11_PARSE(app, argc, argv);
    if (!csv_dir.empty()) std::filesystem::create_directories(csv_dir);

    std::vector<Criterion> criteria = {
        {1, "gas reproduction", 1, gas_reproduction},
        {2, "cost ratio", 1, cost_ratio},
        {3, "concurrent request linearity", 600, request_linearity},
        {4, "deploy slower than verify", 120, deploy_vs_verify},
        {5, "chain generation scaling", 600, chain_scaling},
        {6, "oracle equivalence", 60, oracle_equivalence},
        {7, "tamper evidence", 60, tamper_evidence},
        {8, "authorization", 10, authorization},
        {9, "end-to-end masking", 120, masking},
        {10, "replay determinism", 60, replay_determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.number) == only.end()) continue;
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        double secs = Seconds(std::chrono::steady_clock::now() - t0).count();
        bool in_time = secs < c.limit_s;
        bool pass = v.pass && in_time;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " [" << c.number << "] " << c.name << ": " << v.detail << " ("
                  << fmt(secs, 2) << " s, limit " << fmt(c.limit_s, 0) << " s" << (in_time ? "" : ", OVER LIMIT")
                  << ")" << std::endl;
    }
    return failed ? 1 : 0;
}
