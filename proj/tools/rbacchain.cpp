// rbacchain command line front end.
//
// Stateful commands work on a home directory (--home, default ./rbacchain-home)
// holding chain.bin plus one key file per fixed actor under keys/.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbacchain/bench.hpp"
#include "rbacchain/contract.hpp"
#include "rbacchain/crypto.hpp"
#include "rbacchain/fabric.hpp"
#include "rbacchain/ingest.hpp"
#include "rbacchain/ledger.hpp"
#include "rbacchain/policy.hpp"

namespace fs = std::filesystem;
using namespace rbacchain;
using nlohmann::json;

namespace {

const char* kActors[] = {"owner", "csp", "acm", "bam", "bdm"};

struct Home {
    fs::path dir;

    fs::path chain_file() const { return dir / "chain.bin"; }
    fs::path key_file(const std::string& actor) const { return dir / "keys" / (actor + ".json"); }

    crypto::KeyPair key(const std::string& actor) const { return crypto::load_key_file(key_file(actor)).keys; }

    ledger::Chain chain() const {
        if (!fs::exists(chain_file())) throw IoError("no chain at " + chain_file().string() + " (run `chain init`)");
        return ledger::load_chain(chain_file());
    }

    fabric::Identities identities() const {
        fabric::Identities ids;
        ids.owner = {"owner", key("owner")};
        ids.csp = {"csp", key("csp")};
        ids.acm = {"acm", key("acm")};
        ids.bam = {"bam", key("bam")};
        ids.bdms.push_back({"bdm", key("bdm")});
        return ids;
    }
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// "status=ok,qty=3"
std::vector<rbac::AccessRequest::Param> parse_query(const std::string& text) {
    std::vector<rbac::AccessRequest::Param> params;
    for (const auto& term : split(text, ',')) {
        auto eq = term.find('=');
        if (eq == std::string::npos || eq == 0) throw RequestError("query term '" + term + "' is not att=val");
        params.emplace_back(term.substr(0, eq), rbac::parse_value(term.substr(eq + 1)));
    }
    return params;
}

json record_json(const datastore::RecordView& v) {
    json attrs = json::object();
    for (const auto& [att, val] : v.attributes) attrs[att] = policy::value_to_json(val);
    return {{"record_id", v.record_id}, {"attributes", attrs}};
}

fabric::DeploymentConfig load_deployment_config(const std::string& path) {
    fabric::DeploymentConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    json j = json::parse(in);
    cfg.peers = j.value("peers", 0);
    cfg.timeout = fabric::Millis(j.value("timeout_ms", 30000));
    cfg.seed = j.value("seed", 1);
    if (j.contains("latency")) cfg.latency = {j["latency"].value("min_ms", 0.0), j["latency"].value("max_ms", 0.0)};
    return cfg;
}

void print_rows(const std::vector<bench::BenchRow>& rows, const std::string& out) {
    if (out.empty()) {
        std::cout << bench::to_csv(rows);
    } else {
        bench::emit_csv(rows, out);
        std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
    }
}

fabric::RequestOutcome run_request(const Home& home, const std::string& user_key, const std::string& query,
                                   const std::string& config_path) {
    auto chain = home.chain();
    auto user = crypto::load_key_file(user_key).keys;
    auto uid = crypto::actor_id_of(user.public_key).hex();
    fabric::Deployment dep(load_deployment_config(config_path), home.identities(), chain);
    auto out = dep.request(user, rbac::AccessRequest(uid, parse_query(query)));
    dep.wait_synced(fabric::Millis(5000));
    ledger::save_chain(home.chain_file(), dep.chain_snapshot());
    return out;
}

int print_outcome(const fabric::RequestOutcome& out) {
    json j{{"ok", out.ok}, {"stage", fabric::to_string(out.stage)}};
    if (!out.code.empty()) j["code"] = out.code;
    if (!out.reason.empty()) j["reason"] = out.reason;
    if (out.validation_height) j["validation_height"] = *out.validation_height;
    if (out.result) {
        j["records"] = json::array();
        for (const auto& v : out.result->records) j["records"].push_back(record_json(v));
    }
    std::cout << j.dump(2) << "\n";
    return out.ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rbacchain: blockchain-backed role-based access control"};
    app.require_subcommand(1);
    // let options of a parent command appear after its subcommand
    app.fallthrough();
    std::string home_dir = "rbacchain-home";
    app.add_option("--home", home_dir, "state directory (chain.bin, keys/)");
    auto home = [&] { return Home{home_dir}; };
    int rc = 0;

    // keygen
    auto* keygen = app.add_subcommand("keygen", "generate an Ed25519 key file");
    std::string actor, key_out;
    keygen->add_option("--actor", actor, "actor name")->required();
    keygen->add_option("--out", key_out, "key file path")->required();
    keygen->callback([&] {
        crypto::save_key_file(key_out, {actor, crypto::key_gen()});
        std::cout << crypto::actor_id_of(crypto::load_key_file(key_out).keys.public_key).hex() << "\n";
    });

    // policy
    auto* pol = app.add_subcommand("policy", "policy files")->require_subcommand(1);
    auto* pol_validate = pol->add_subcommand("validate", "check a policy file");
    std::string policy_file;
    pol_validate->add_option("file", policy_file)->required();
    pol_validate->callback([&] {
        auto m = policy::load_policy(policy_file);
        std::cout << "ok: " << m.catalog().size() << " attributes, " << m.rights().size() << " rights, "
                  << m.roles().size() << " roles, " << m.user_types().size() << " user types\n";
    });

    // chain
    auto* ch = app.add_subcommand("chain", "ledger files")->require_subcommand(1);
    auto* ch_init = ch->add_subcommand("init", "create keys and a genesis block in --home");
    std::string catalog_csv;
    ch_init->add_option("--catalog", catalog_csv, "comma separated attribute names")->required();
    ch_init->callback([&] {
        auto h = home();
        for (const char* a : kActors) {
            if (!fs::exists(h.key_file(a))) crypto::save_key_file(h.key_file(a), {a, crypto::key_gen()});
        }
        auto chain = ledger::Chain::create(h.key("owner"), h.key("acm").public_key, h.key("bam").public_key,
                                           h.key("bdm").public_key, rbac::AttributeCatalog(split(catalog_csv, ',')),
                                           ledger::wall_clock_ms());
        ledger::save_chain(h.chain_file(), chain);
        std::cout << "genesis " << to_hex(chain.tip_hash()) << " at " << h.chain_file().string() << "\n";
    });
    auto* ch_verify = ch->add_subcommand("verify", "verify every block of a chain file");
    std::string chain_file;
    ch_verify->add_option("file", chain_file)->required();
    ch_verify->callback([&] {
        auto v = ledger::verify_chain_bytes(ledger::read_file(chain_file));
        if (v.ok()) {
            std::cout << "ok\n";
        } else {
            std::cout << "tampered at height " << *v.first_bad_height << ": " << v.reason << "\n";
            rc = 1;
        }
    });
    auto* ch_export = ch->add_subcommand("export", "dump a chain");
    bool as_json = false;
    std::string export_file;
    ch_export->add_flag("--json", as_json, "JSON output (the only format)");
    ch_export->add_option("file", export_file, "chain file (default: --home chain)");
    ch_export->callback([&] {
        auto chain = export_file.empty() ? home().chain() : ledger::load_chain(export_file);
        std::cout << ledger::export_json(chain) << "\n";
    });

    // contract
    auto* con = app.add_subcommand("contract", "smart contracts")->require_subcommand(1);
    auto* con_compile = con->add_subcommand("compile", "compile a policy; --deploy appends it to the chain");
    std::string owner_key;
    bool deploy = false;
    std::uint32_t version = 1;
    con_compile->add_option("policy", policy_file)->required();
    con_compile->add_option("--owner", owner_key, "owner key file")->required();
    con_compile->add_option("--version", version);
    con_compile->add_flag("--deploy", deploy);
    con_compile->callback([&] {
        auto owner = crypto::load_key_file(owner_key).keys;
        auto sc = contract::compile_contract(policy::load_policy(policy_file), crypto::actor_id_of(owner.public_key),
                                             version);
        std::cout << "id " << sc.id().hex() << "\n"
                  << "gas " << contract::gas_of_deployment(sc).gas_used << "\n"
                  << "baseline_gas " << contract::gas_of_deployment(sc, contract::GasSchedule::baseline()).gas_used
                  << "\n";
        if (deploy) {
            auto h = home();
            auto chain = h.chain();
            auto tx = ledger::make_deploy_tx(sc, owner, chain.state().authorities.bam,
                                             chain.state().next_nonce(crypto::actor_id_of(owner.public_key)),
                                             chain.schedule());
            ledger::append_block(h.chain_file(), chain.mine_block(tx));
            std::cout << "deployed at height " << chain.height() << "\n";
        }
    });
    auto* con_inspect = con->add_subcommand("inspect", "dump the rules of a deployed contract");
    std::string contract_id;
    con_inspect->add_option("id", contract_id)->required();
    con_inspect->callback([&] {
        auto chain = home().chain();
        const auto& dc = chain.state().contract(crypto::ActorId(contract_id));
        json j{{"id", contract_id},
               {"owner", dc.contract.owner().hex()},
               {"version", dc.contract.version()},
               {"height", dc.height},
               {"operations", dc.contract.operations()},
               {"rules", policy::model_to_json(dc.contract.rules())}};
        std::cout << j.dump(2) << "\n";
    });

    // user
    auto* usr = app.add_subcommand("user", "end users")->require_subcommand(1);
    auto* usr_reg = usr->add_subcommand("register", "register a user against the latest contract");
    std::string user_key, user_type, roles_csv;
    usr_reg->add_option("--user", user_key, "user key file")->required();
    usr_reg->add_option("--owner", owner_key, "owner key file")->required();
    usr_reg->add_option("--type", user_type)->required();
    usr_reg->add_option("--roles", roles_csv)->required();
    usr_reg->callback([&] {
        auto h = home();
        auto chain = h.chain();
        auto owner = crypto::load_key_file(owner_key).keys;
        auto user = crypto::load_key_file(user_key).keys;
        if (!chain.state().latest_contract) throw Error("no contract deployed");
        const auto& rules = chain.state().contract(*chain.state().latest_contract).contract.rules();
        auto roles = split(roles_csv, ',');
        auto u = rbac::register_user(rules, crypto::actor_id_of(user.public_key).hex(), user_type,
                                     {roles.begin(), roles.end()});
        auto tx = ledger::make_register_tx(u, user.public_key, owner, chain.state().authorities.bdm,
                                           chain.state().next_nonce(crypto::actor_id_of(owner.public_key)),
                                           chain.schedule());
        ledger::append_block(h.chain_file(), chain.mine_block(tx));
        std::cout << "registered " << u.user_id << " at height " << chain.height() << "\n";
    });

    // data
    auto* dat = app.add_subcommand("data", "records")->require_subcommand(1);
    auto* dat_ingest = dat->add_subcommand("ingest", "append records from a JSON lines file");
    std::string records_file;
    dat_ingest->add_option("file", records_file)->required();
    dat_ingest->add_option("--owner", owner_key, "owner key file")->required();
    dat_ingest->callback([&] {
        auto h = home();
        auto chain = h.chain();
        auto heights = datastore::ingest_records(chain, datastore::load_records_jsonl(records_file),
                                                 crypto::load_key_file(owner_key).keys);
        ledger::save_chain(h.chain_file(), chain);
        std::cout << "ingested " << heights.size() << " records, height " << chain.height() << "\n";
    });
    auto* dat_query = dat->add_subcommand("query", "query through the full request pipeline");
    std::string query, config_file;
    dat_query->add_option("--user", user_key, "user key file")->required();
    dat_query->add_option("query", query, "att=val,...")->required();
    dat_query->add_option("--config", config_file, "deployment config JSON");
    dat_query->callback([&] { rc = print_outcome(run_request(home(), user_key, query, config_file)); });

    // fabric
    auto* fab = app.add_subcommand("fabric", "in-process node deployment")->require_subcommand(1);
    auto* fab_up = fab->add_subcommand("up", "start every node on the --home chain and report sync");
    fab_up->add_option("--config", config_file, "deployment config JSON");
    fab_up->callback([&] {
        auto h = home();
        auto cfg = load_deployment_config(config_file);
        fabric::Deployment dep(cfg, h.identities(), h.chain());
        bool synced = dep.wait_synced(fabric::Millis(10000));
        auto tips = dep.tip_hashes();
        std::cout << dep.node_count() << " nodes, height " << dep.chain_snapshot().height()
                  << (synced ? ", all in sync" : ", NOT in sync") << "\n";
        for (auto role : {fabric::NodeRole::CSP, fabric::NodeRole::ACM, fabric::NodeRole::BAM, fabric::NodeRole::BDM}) {
            std::cout << "  " << fabric::to_string(role) << " " << dep.node_id(role).hex() << "\n";
        }
        for (std::size_t i = 0; i < cfg.peers; ++i) {
            std::cout << "  PEER " << dep.node_id(fabric::NodeRole::PEER, i).hex() << "\n";
        }
        rc = synced ? 0 : 1;
    });
    auto* fab_req = fab->add_subcommand("request", "send one end-user request");
    fab_req->add_option("--user", user_key, "user key file")->required();
    fab_req->add_option("--query", query, "att=val,...")->required();
    fab_req->add_option("--config", config_file, "deployment config JSON");
    fab_req->callback([&] { rc = print_outcome(run_request(home(), user_key, query, config_file)); });

    // bench
    auto* ben = app.add_subcommand("bench", "benchmarks, CSV output")->require_subcommand(1);
    std::string out_csv;
    std::uint64_t seed = 1;
    unsigned reps = 3;
    ben->add_option("--out", out_csv, "CSV path (stdout if omitted)");
    ben->add_option("--seed", seed);
    ben->add_option("--reps", reps, "repetitions per point (>= 3)");
    auto* b_gas = ben->add_subcommand("gas", "deployment gas per role count");
    std::string roles_sweep = "1..5", gas_config;
    b_gas->add_option("--roles", roles_sweep);
    b_gas->add_option("--gas-config", gas_config, "gas schedule JSON");
    b_gas->callback([&] {
        auto cfg = gas_config.empty() ? contract::GasConfig{} : contract::load_gas_config(gas_config);
        auto sweep = bench::parse_sweep(roles_sweep);
        auto rows = bench::bench_gas_roles(sweep, cfg.proposed);
        for (auto& r : bench::bench_gas_roles(sweep, cfg.baseline, "gas_baseline")) rows.push_back(r);
        print_rows(rows, out_csv);
    });
    auto timing = [&] {
        bench::TimingOptions t;
        t.repetitions = reps;
        t.seed = seed;
        return t;
    };
    auto* b_req = ben->add_subcommand("requests", "drain time of simultaneous requests");
    std::string counts = "100,200,300";
    b_req->add_option("--counts", counts);
    b_req->callback([&] {
        bench::BenchSpec{"concurrent_requests", bench::parse_sweep(counts), reps, seed}.validate();
        print_rows(bench::bench_concurrent_requests(bench::parse_sweep(counts), timing()), out_csv);
    });
    auto* b_rights = ben->add_subcommand("rights", "deployment vs verification time per rights count");
    std::uint64_t max_rights = 20;
    b_rights->add_option("--max", max_rights);
    b_rights->callback([&] {
        auto sweep = bench::parse_sweep("1.." + std::to_string(max_rights));
        bench::BenchSpec{"deploy_verify_rights", sweep, reps, seed}.validate();
        print_rows(bench::bench_deploy_verify_rights(sweep, timing()), out_csv);
    });
    auto* b_chain = ben->add_subcommand("chain", "chain generation time vs records and nodes");
    std::string rec_sweep = "10000..50000", node_sweep = "2..20";
    b_chain->add_option("--records", rec_sweep);
    b_chain->add_option("--nodes", node_sweep);
    b_chain->callback([&] {
        bench::ChainGenOptions opt;
        opt.repetitions = reps;
        opt.seed = seed;
        auto records = bench::parse_sweep(rec_sweep);
        bench::BenchSpec{"chain_generation", records, reps, seed}.validate();
        print_rows(bench::bench_chain_generation(records, bench::parse_sweep(node_sweep), opt), out_csv);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
