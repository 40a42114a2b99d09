#include "rbacchain/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "rbacchain/ingest.hpp"

namespace rbacchain::bench {

namespace {

using SteadyClock = std::chrono::steady_clock;

double elapsed_ms(SteadyClock::time_point start) {
    return std::chrono::duration<double, std::milli>(SteadyClock::now() - start).count();
}

// Runs rep 0 of every point, then rep 1 of every point, and so on, so a burst
// of background load is spread across the sweep instead of skewing one point.
template <typename Fn>
std::vector<std::vector<double>> round_robin(std::size_t points, unsigned reps, Fn&& sample) {
    std::vector<std::vector<double>> out(points);
    for (unsigned rep = 0; rep < reps; ++rep) {
        for (std::size_t i = 0; i < points; ++i) out[i].push_back(sample(i, rep));
    }
    return out;
}

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw BenchError("bad number in sweep: '" + std::string(s) + "'");
    return v;
}

}  // namespace

void BenchSpec::validate() const {
    static const std::vector<std::string> known{"gas_roles", "concurrent_requests", "deploy_verify_rights",
                                                "chain_generation"};
    if (std::find(known.begin(), known.end(), experiment) == known.end()) {
        throw BenchError("unknown experiment " + experiment);
    }
    if (sweep.empty()) throw BenchError("empty sweep");
    if (repetitions < 3) throw BenchError("at least 3 repetitions are required");
}

BenchRow summarize(std::string experiment, std::uint64_t parameter, std::vector<double> samples, std::string units) {
    if (samples.empty()) throw BenchError("no samples for " + experiment);
    std::sort(samples.begin(), samples.end());
    auto n = samples.size();
    double median = n % 2 ? samples[n / 2] : (samples[n / 2 - 1] + samples[n / 2]) / 2;
    return {std::move(experiment), parameter, median, samples.front(), samples.back(), std::move(units)};
}

std::vector<std::uint64_t> parse_sweep(const std::string& text) {
    std::vector<std::uint64_t> out;
    auto dots = text.find("..");
    if (dots == std::string::npos) {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) out.push_back(parse_u64(item));
        }
    } else {
        auto colon = text.find(':', dots);
        auto lo = parse_u64(std::string_view(text).substr(0, dots));
        auto hi = parse_u64(std::string_view(text).substr(dots + 2, colon == std::string::npos ? std::string::npos
                                                                                               : colon - dots - 2));
        std::uint64_t step = lo > 1 ? lo : 1;
        if (colon != std::string::npos) step = parse_u64(std::string_view(text).substr(colon + 1));
        if (step == 0 || hi < lo) throw BenchError("bad range " + text);
        for (auto v = lo; v <= hi; v += step) out.push_back(v);
    }
    if (out.empty()) throw BenchError("empty sweep '" + text + "'");
    return out;
}

// --- workloads ------------------------------------------------------------------

rbac::AttributeCatalog bench_catalog() { return rbac::AttributeCatalog({"status", "quantity", "quality", "destination"}); }

std::vector<datastore::DataRecord> generate_corpus(std::size_t count, std::uint64_t seed) {
    static const std::vector<std::string> statuses{"ok", "hold", "scrap"};
    static const std::vector<std::string> grades{"A", "B", "C"};
    std::mt19937_64 rng(seed);
    std::vector<datastore::DataRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        datastore::DataRecord rec;
        std::ostringstream id;
        id << "rec-" << std::setw(6) << std::setfill('0') << i;
        rec.record_id = id.str();
        rec.attributes["status"] = statuses[rng() % statuses.size()];
        rec.attributes["quantity"] = static_cast<std::int64_t>(rng() % 100);
        rec.attributes["quality"] = grades[rng() % grades.size()];
        rec.attributes["destination"] = "plant-" + std::to_string(rng() % 3 + 1);
        out.push_back(std::move(rec));
    }
    return out;
}

rbac::RbacModel rights_model(std::size_t rights, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto catalog = bench_catalog();
    std::vector<rbac::Right> rs;
    rbac::Role role{"operator", {}};
    for (std::size_t i = 0; i < rights; ++i) {
        rbac::Mask mask(catalog.size());
        for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = rng() % 2 == 0;
        mask[0] = true;
        auto id = "right_" + std::to_string(i);
        rs.push_back({id, mask});
        role.rights.insert(id);
    }
    return rbac::build_model(std::move(catalog), std::move(rs), {role}, {{"staff", {"operator"}}});
}

// --- experiments ----------------------------------------------------------------

std::vector<BenchRow> bench_gas_roles(const std::vector<std::uint64_t>& role_counts,
                                      const contract::GasSchedule& schedule, const std::string& experiment) {
    if (role_counts.empty()) throw BenchError("empty sweep");
    auto owner = crypto::actor_id_of(crypto::key_gen().public_key);
    std::vector<BenchRow> rows;
    for (auto m : role_counts) {
        auto sc = contract::compile_contract(contract::reference_model(m), owner);
        auto gas = static_cast<double>(contract::gas_of_deployment(sc, schedule).gas_used);
        rows.push_back(summarize(experiment, m, {gas, gas, gas}, "gas"));
    }
    return rows;
}

namespace {

fabric::DeploymentConfig timing_config(const TimingOptions& o) {
    fabric::DeploymentConfig cfg;
    cfg.latency = o.latency;
    cfg.timeout = o.timeout;
    cfg.seed = o.seed;
    return cfg;
}

void require_verifiable(const ledger::Chain& chain) {
    auto v = ledger::verify_chain(chain);
    if (!v.ok()) throw BenchError("benchmark chain fails verification at height " + std::to_string(*v.first_bad_height));
}

}  // namespace

std::vector<BenchRow> bench_concurrent_requests(const std::vector<std::uint64_t>& request_counts,
                                                const TimingOptions& options) {
    if (request_counts.empty()) throw BenchError("empty sweep");
    constexpr std::size_t kUsers = 8;
    std::mt19937_64 rng(options.seed);

    fabric::Deployment dep(timing_config(options), fabric::Identities::generate(), bench_catalog());
    auto model = contract::reference_model(2);
    if (auto r = dep.deploy_contract(model); !r.ok) throw BenchError("contract deployment failed: " + r.reason);
    std::vector<crypto::KeyPair> users;
    for (std::size_t i = 0; i < kUsers; ++i) {
        auto kp = crypto::key_gen();
        auto user = rbac::register_user(model, crypto::actor_id_of(kp.public_key).hex(), "staff", {"role_1", "role_2"});
        if (auto r = dep.register_user(user, kp.public_key); !r.ok) throw BenchError("registration failed: " + r.reason);
        users.push_back(kp);
    }
    for (const auto& r : dep.ingest(generate_corpus(200, options.seed))) {
        if (!r.ok) throw BenchError("ingest failed: " + r.reason);
    }

    static const std::vector<std::string> statuses{"ok", "hold", "scrap"};
    auto samples = round_robin(request_counts.size(), options.repetitions, [&](std::size_t point, unsigned) {
        auto n = request_counts[point];
        std::vector<std::pair<crypto::KeyPair, rbac::AccessRequest>> batch;
        batch.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto& kp = users[rng() % users.size()];
            batch.emplace_back(kp, rbac::AccessRequest(crypto::actor_id_of(kp.public_key).hex(),
                                                       {{"status", statuses[rng() % statuses.size()]}}));
        }
        auto start = SteadyClock::now();
        auto outcomes = dep.request_batch(batch);
        double ms = elapsed_ms(start);
        for (const auto& o : outcomes) {
            if (!o.ok) throw BenchError("request failed at stage " + fabric::to_string(o.stage) + ": " + o.code + " " + o.reason);
        }
        return ms;
    });
    std::vector<BenchRow> rows;
    for (std::size_t i = 0; i < request_counts.size(); ++i) {
        rows.push_back(summarize("concurrent_requests", request_counts[i], std::move(samples[i]), "ms"));
    }
    dep.wait_synced();
    require_verifiable(dep.chain_snapshot());
    return rows;
}

std::vector<BenchRow> bench_deploy_verify_rights(const std::vector<std::uint64_t>& rights_counts,
                                                 const TimingOptions& options) {
    if (rights_counts.empty()) throw BenchError("empty sweep");
    auto cfg = timing_config(options);
    cfg.peers = 4;
    fabric::Deployment dep(cfg, fabric::Identities::generate(), bench_catalog());

    auto first = rights_model(1, options.seed);
    if (auto r = dep.deploy_contract(first, 1); !r.ok) throw BenchError("contract deployment failed: " + r.reason);
    auto kp = crypto::key_gen();
    auto user_id = crypto::actor_id_of(kp.public_key).hex();
    if (auto r = dep.register_user(rbac::register_user(first, user_id, "staff", {"operator"}), kp.public_key); !r.ok) {
        throw BenchError("registration failed: " + r.reason);
    }
    rbac::AccessRequest request(user_id, {{"status", std::string("ok")}});

    std::uint32_t version = 2;
    std::vector<std::vector<double>> verify(rights_counts.size());
    auto deploy = round_robin(rights_counts.size(), options.repetitions, [&](std::size_t point, unsigned) {
        auto k = rights_counts[point];
        auto model = rights_model(k, options.seed + k);
        auto start = SteadyClock::now();
        auto res = dep.deploy_contract(model, version++);
        double ms = elapsed_ms(start);
        if (!res.ok) throw BenchError("deployment failed: " + res.reason);

        auto reply = dep.validate_role(request);
        if (!reply.ok) throw BenchError("validation failed: " + reply.code + " " + reply.reason);
        verify[point].push_back(static_cast<double>(reply.round_trip_us) / 1000.0);
        return ms;
    });
    std::vector<BenchRow> rows;
    for (std::size_t i = 0; i < rights_counts.size(); ++i) {
        rows.push_back(summarize("deploy", rights_counts[i], std::move(deploy[i]), "ms"));
        rows.push_back(summarize("verify", rights_counts[i], std::move(verify[i]), "ms"));
    }
    dep.wait_synced();
    require_verifiable(dep.chain_snapshot());
    return rows;
}

double chain_generation_ms(std::uint64_t records, std::uint64_t nodes, std::uint64_t seed) {
    if (nodes == 0) throw BenchError("at least one node is required");
    auto corpus = generate_corpus(records, seed);
    auto ids = fabric::Identities::generate();

    auto start = SteadyClock::now();
    auto producer = ledger::Chain::create(ids.owner.keys, ids.acm.keys.public_key, ids.bam.keys.public_key,
                                          ids.bdms[0].keys.public_key, bench_catalog(), 0);
    datastore::ingest_records(producer, corpus, ids.owner.keys);
    // Replicas receive the serialized chain and rebuild it block by block.
    auto wire = ledger::encode_chain(producer.blocks());
    std::vector<ledger::Chain> replicas;
    for (std::uint64_t i = 1; i < nodes; ++i) {
        auto decoded = ledger::decode_chain(wire);
        if (decoded.failed_at) throw BenchError("replica could not decode the chain: " + decoded.error);
        replicas.push_back(ledger::Chain::from_blocks(decoded.blocks));
    }
    auto ms = elapsed_ms(start);

    for (const auto& r : replicas) {
        if (r.tip_hash() != producer.tip_hash()) throw BenchError("replica diverged from the producer");
    }
    if (records <= 1) require_verifiable(producer);
    return ms;
}

std::vector<BenchRow> bench_chain_generation(const std::vector<std::uint64_t>& record_counts,
                                             const std::vector<std::uint64_t>& node_counts,
                                             const ChainGenOptions& options) {
    if (record_counts.empty() && node_counts.empty()) throw BenchError("empty sweep");
    auto by_records = round_robin(record_counts.size(), options.repetitions, [&](std::size_t i, unsigned rep) {
        return chain_generation_ms(record_counts[i], options.fixed_nodes, options.seed + rep);
    });
    auto by_nodes = round_robin(node_counts.size(), options.repetitions, [&](std::size_t i, unsigned rep) {
        return chain_generation_ms(options.fixed_records, node_counts[i], options.seed + rep);
    });
    std::vector<BenchRow> rows;
    for (std::size_t i = 0; i < record_counts.size(); ++i) {
        rows.push_back(summarize("chain_records", record_counts[i], std::move(by_records[i]), "ms"));
    }
    for (std::size_t i = 0; i < node_counts.size(); ++i) {
        rows.push_back(summarize("chain_nodes", node_counts[i], std::move(by_nodes[i]), "ms"));
    }
    return rows;
}

// --- analysis ---------------------------------------------------------------------

double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw BenchError("linear fit needs at least two paired points");
    auto n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw BenchError("linear fit needs distinct x values");
    if (syy == 0) return 1.0;
    return (sxy * sxy) / (sxx * syy);
}

bool strictly_increasing(const std::vector<double>& y) {
    return std::adjacent_find(y.begin(), y.end(), std::greater_equal<>{}) == y.end();
}

std::vector<BenchRow> select(const std::vector<BenchRow>& rows, const std::string& experiment) {
    std::vector<BenchRow> out;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
                 [&](const BenchRow& r) { return r.experiment == experiment; });
    return out;
}

double r2_of(const std::vector<BenchRow>& rows) {
    std::vector<double> x, y;
    for (const auto& r : rows) {
        x.push_back(static_cast<double>(r.parameter));
        y.push_back(r.median);
    }
    return linear_fit_r2(x, y);
}

std::string to_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "experiment,parameter,median,min,max,units\n";
    out << std::fixed << std::setprecision(3);
    for (const auto& r : rows) {
        out << r.experiment << ',' << r.parameter << ',' << r.median << ',' << r.min << ',' << r.max << ',' << r.units
            << '\n';
    }
    return out.str();
}

void emit_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
    if (rows.empty()) throw BenchError("refusing to write an empty benchmark table");
    auto text = to_csv(rows);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw IoError("write failed for " + path.string());
}

}  // namespace rbacchain::bench
