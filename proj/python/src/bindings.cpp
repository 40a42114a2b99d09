#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rbacchain/bench.hpp"
#include "rbacchain/contract.hpp"
#include "rbacchain/fabric.hpp"
#include "rbacchain/ledger.hpp"
#include "rbacchain/policy.hpp"

namespace py = pybind11;
using namespace rbacchain;

namespace {

rbac::Value to_value(const py::handle& h) {
    if (py::isinstance<py::bool_>(h)) throw py::type_error("attribute values are int or str");
    if (py::isinstance<py::int_>(h)) return h.cast<std::int64_t>();
    if (py::isinstance<py::str>(h)) return h.cast<std::string>();
    throw py::type_error("attribute values are int or str");
}

py::object from_value(const rbac::Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return py::int_(*i);
    return py::str(std::get<std::string>(v));
}

rbac::AccessRequest to_request(const std::string& user_id, const py::dict& params) {
    std::vector<rbac::AccessRequest::Param> out;
    for (auto [k, v] : params) out.emplace_back(k.cast<std::string>(), to_value(v));
    return {user_id, std::move(out)};
}

contract::GasSchedule schedule_named(const std::string& name) {
    if (name == "proposed") return contract::GasSchedule::proposed();
    if (name == "baseline") return contract::GasSchedule::baseline();
    throw py::value_error("schedule must be 'proposed' or 'baseline'");
}

rbac::RbacModel model_from_str(const std::string& text) {
    return policy::model_from_json(nlohmann::json::parse(text));
}

py::dict decision_dict(const rbac::AccessDecision& d) {
    py::dict out;
    out["granted"] = d.ok();
    out["checks"] = d.checks_evaluated;
    if (d.ok()) out["mask"] = d.granted->mask;
    if (d.denial) {
        out["semantic"] = static_cast<int>(d.denial->semantic);
        out["reason"] = d.denial->reason;
    }
    return out;
}

// Thin owner-side facade over a running deployment.
class Fabric {
public:
    Fabric(std::vector<std::string> catalog, std::size_t peers, double timeout_ms)
        : model_(std::nullopt) {
        fabric::DeploymentConfig cfg;
        cfg.peers = peers;
        cfg.timeout = fabric::Millis(static_cast<long>(timeout_ms));
        dep_ = std::make_unique<fabric::Deployment>(cfg, fabric::Identities::generate(),
                                                    rbac::AttributeCatalog(std::move(catalog)));
    }

    std::string deploy(const std::string& policy_json, std::uint32_t version) {
        auto model = model_from_str(policy_json);
        auto r = dep_->deploy_contract(model, version);
        if (!r.ok) throw std::runtime_error("deployment failed: " + r.reason);
        model_ = std::move(model);
        return dep_->current_contract()->hex();
    }

    /// Registers a fresh user and returns (user_id, private_key_hex).
    std::pair<std::string, std::string> register_user(const std::string& user_type, const std::set<std::string>& roles) {
        if (!model_) throw std::runtime_error("deploy a contract first");
        auto kp = crypto::key_gen();
        auto id = crypto::actor_id_of(kp.public_key).hex();
        auto r = dep_->register_user(rbac::register_user(*model_, id, user_type, roles), kp.public_key);
        if (!r.ok) throw std::runtime_error("registration failed: " + r.reason);
        keys_[id] = kp;
        return {id, to_hex(kp.private_key)};
    }

    std::size_t ingest(const py::list& records) {
        std::vector<datastore::DataRecord> recs;
        for (const auto& item : records) {
            auto d = item.cast<py::dict>();
            datastore::DataRecord rec;
            rec.record_id = d["record_id"].cast<std::string>();
            for (auto [k, v] : d["attributes"].cast<py::dict>()) rec.attributes.emplace(k.cast<std::string>(), to_value(v));
            recs.push_back(std::move(rec));
        }
        std::vector<fabric::SubmitResult> results;
        {
            py::gil_scoped_release release;
            results = dep_->ingest(recs);
        }
        for (const auto& r : results) {
            if (!r.ok) throw std::runtime_error("ingest failed: " + r.reason);
        }
        return results.size();
    }

    py::dict request(const std::string& user_id, const py::dict& params) {
        auto it = keys_.find(user_id);
        if (it == keys_.end()) throw py::key_error("unknown user " + user_id);
        auto req = to_request(user_id, params);
        fabric::RequestOutcome out;
        {
            py::gil_scoped_release release;
            out = dep_->request(it->second, req);
        }
        py::dict d;
        d["ok"] = out.ok;
        d["stage"] = fabric::to_string(out.stage);
        d["code"] = out.code;
        d["reason"] = out.reason;
        if (out.validation_height) d["validation_height"] = *out.validation_height;
        if (out.result) {
            py::list recs;
            for (const auto& v : out.result->records) {
                py::dict attrs;
                for (const auto& [att, val] : v.attributes) attrs[py::str(att)] = from_value(val);
                recs.append(py::dict(py::arg("record_id") = v.record_id, py::arg("attributes") = attrs));
            }
            d["records"] = recs;
        }
        return d;
    }

    std::uint64_t height() const { return dep_->chain_snapshot().height(); }

    bool verify() const {
        py::gil_scoped_release release;
        dep_->wait_synced(fabric::Millis(5000));
        return ledger::verify_chain(dep_->chain_snapshot()).ok();
    }

private:
    std::unique_ptr<fabric::Deployment> dep_;
    std::optional<rbac::RbacModel> model_;
    std::map<std::string, crypto::KeyPair> keys_;
};

}  // namespace

PYBIND11_MODULE(_rbacchain, m) {
    m.doc() = "Blockchain-backed role-based access control";

    py::register_exception<Error>(m, "RbacChainError");

    m.def("sha256", [](py::bytes data) {
        std::string s = data;
        auto d = crypto::sha256(as_bytes(s));
        return py::bytes(reinterpret_cast<const char*>(d.data()), d.size());
    });
    m.def("actor_id", [](const std::string& public_key_hex) {
        return crypto::actor_id_of(from_hex(public_key_hex)).hex();
    });
    m.def("keygen", [] {
        auto kp = crypto::key_gen();
        return std::make_pair(to_hex(kp.public_key), to_hex(kp.private_key));
    });

    m.def("validate_policy", [](const std::string& text) { return policy::model_to_json(model_from_str(text)).dump(); },
          "Parse and check a policy; returns its canonical JSON.");
    m.def(
        "deployment_gas",
        [](const std::string& policy_json, const std::string& schedule) {
            auto sc = contract::compile_contract(model_from_str(policy_json),
                                                 crypto::actor_id_of(crypto::key_gen().public_key));
            return contract::gas_of_deployment(sc, schedule_named(schedule)).gas_used;
        },
        py::arg("policy_json"), py::arg("schedule") = "proposed");
    m.def(
        "check_access",
        [](const std::string& policy_json, const std::string& user_type, const std::set<std::string>& roles,
           const py::dict& params) {
            auto model = model_from_str(policy_json);
            rbac::RegisteredUser u{"p", user_type, roles};
            return decision_dict(rbac::check_accessibility_rules(model, u, to_request("p", params)));
        },
        py::arg("policy_json"), py::arg("user_type"), py::arg("roles"), py::arg("params"));
    m.def(
        "effective_mask",
        [](const std::string& policy_json, const std::set<std::string>& roles) {
            return rbac::effective_mask(model_from_str(policy_json), rbac::RegisteredUser{"p", "", roles}).mask;
        },
        py::arg("policy_json"), py::arg("roles"));

    m.def("verify_chain_file", [](const std::filesystem::path& path) -> py::object {
        auto v = ledger::verify_chain_bytes(ledger::read_file(path));
        if (v.ok()) return py::none();
        return py::make_tuple(*v.first_bad_height, v.reason);
    }, "None if the chain verifies, else (height, reason) of the first bad block.");

    m.def(
        "bench_gas",
        [](const std::vector<std::uint64_t>& roles, const std::string& schedule) {
            py::list out;
            for (const auto& r : bench::bench_gas_roles(roles, schedule_named(schedule))) {
                out.append(py::make_tuple(r.parameter, r.median));
            }
            return out;
        },
        py::arg("roles"), py::arg("schedule") = "proposed");
    m.def("parse_sweep", &bench::parse_sweep);

    py::class_<Fabric>(m, "Fabric")
        .def(py::init<std::vector<std::string>, std::size_t, double>(), py::arg("catalog"), py::arg("peers") = 0,
             py::arg("timeout_ms") = 30000.0)
        .def("deploy", &Fabric::deploy, py::arg("policy_json"), py::arg("version") = 1)
        .def("register_user", &Fabric::register_user, py::arg("user_type"), py::arg("roles"))
        .def("ingest", &Fabric::ingest)
        .def("request", &Fabric::request, py::arg("user_id"), py::arg("params"))
        .def_property_readonly("height", &Fabric::height)
        .def("verify", &Fabric::verify);
}
