#pragma once

#include <random>
#include <string>
#include <vector>

#include "rbacchain/contract.hpp"
#include "rbacchain/crypto.hpp"
#include "rbacchain/ledger.hpp"

namespace fixtures {

using namespace rbacchain;

inline crypto::KeyPair seeded_key(std::uint64_t seed) {
    Bytes s(crypto::kSeedSize, 0);
    for (std::size_t i = 0; i < 8; ++i) s[i] = static_cast<std::uint8_t>(seed >> (8 * i));
    return crypto::key_from_seed(s);
}

struct Actors {
    crypto::KeyPair owner, acm, bam, bdm;

    static Actors seeded(std::uint64_t base) {
        return {seeded_key(base), seeded_key(base + 1), seeded_key(base + 2), seeded_key(base + 3)};
    }
    crypto::ActorId bam_id() const { return crypto::actor_id_of(bam.public_key); }
    crypto::ActorId bdm_id() const { return crypto::actor_id_of(bdm.public_key); }
};

inline rbac::AttributeCatalog plant_catalog() { return rbac::AttributeCatalog({"status", "qty"}); }

inline rbac::RbacModel plant_model() {
    return rbac::build_model(plant_catalog(), {{"g1", {true, false}}, {"g2", {false, true}}},
                             {{"r1", {"g1"}}, {"r2", {"g2"}}}, {{"engineer", {"r1", "r2"}}, {"auditor", {"r1"}}});
}

/// Chain under construction with helpers that track nonces.
struct Builder {
    Actors actors;
    ledger::Chain chain;
    std::uint64_t tick = 1000;

    explicit Builder(Actors a, rbac::AttributeCatalog catalog = plant_catalog())
        : actors(std::move(a)),
          chain(ledger::Chain::create(actors.owner, actors.acm.public_key, actors.bam.public_key, actors.bdm.public_key,
                                      std::move(catalog), 0)) {}

    std::uint64_t owner_nonce() const { return chain.state().next_nonce(crypto::actor_id_of(actors.owner.public_key)); }
    std::uint64_t acm_nonce() const { return chain.state().next_nonce(crypto::actor_id_of(actors.acm.public_key)); }

    const ledger::Block& mine(const ledger::Transaction& tx) { return chain.mine_block(tx, tick++); }

    contract::ContractId deploy(const rbac::RbacModel& model, std::uint32_t version = 1) {
        auto sc = contract::compile_contract(model, crypto::actor_id_of(actors.owner.public_key), version);
        mine(ledger::make_deploy_tx(sc, actors.owner, actors.bam_id(), owner_nonce(), chain.schedule()));
        return sc.id();
    }

    void register_user(const rbac::RegisteredUser& u, const Bytes& pk) {
        mine(ledger::make_register_tx(u, pk, actors.owner, actors.bdm_id(), owner_nonce(), chain.schedule()));
    }

    void validate(const rbac::AccessRequest& req, const std::set<std::string>& roles) {
        mine(ledger::make_validate_tx(*chain.state().latest_contract, req, roles, actors.acm, actors.bam_id(),
                                      acm_nonce(), chain.schedule()));
    }

    void record(const std::string& id, const std::string& status, std::int64_t qty) {
        datastore::DataRecord rec{id, {{"status", status}, {"qty", qty}}, {}, 0};
        mine(ledger::make_record_tx(rec, actors.owner, actors.bdm_id(), owner_nonce(), chain.schedule()));
    }
};

/// A chain of exactly `blocks` blocks (genesis included) mixing every
/// transaction kind, driven by `seed`.
inline ledger::Chain mixed_chain(std::size_t blocks, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Builder b(Actors::seeded(seed * 16));
    if (blocks <= 1) return b.chain;
    b.deploy(plant_model());
    std::vector<std::string> users;
    std::size_t version = 2;
    while (b.chain.blocks().size() < blocks) {
        switch (rng() % 5) {
            case 0: {
                auto id = "user" + std::to_string(users.size());
                auto roles = rng() % 2 ? std::set<std::string>{"r1"} : std::set<std::string>{"r1", "r2"};
                b.register_user({id, "engineer", roles}, seeded_key(seed * 1000 + users.size()).public_key);
                users.push_back(id);
                break;
            }
            case 1:
            case 2: {
                auto id = users.empty() ? std::string("nobody") : users[rng() % users.size()];
                const auto* u = b.chain.state().users.find(id);
                std::set<std::string> roles = u ? u->roles : std::set<std::string>{};
                auto att = rng() % 2 ? "status" : "qty";
                b.validate(rbac::AccessRequest(id, {{att, std::int64_t{1}}}), roles);
                break;
            }
            case 3:
                b.record("rec" + std::to_string(b.chain.height()), rng() % 2 ? "ok" : "bad",
                         static_cast<std::int64_t>(rng() % 100));
                break;
            default:
                if (rng() % 4 == 0) {
                    b.deploy(plant_model(), static_cast<std::uint32_t>(version++));
                } else {
                    b.record("rec" + std::to_string(b.chain.height()), "ok", 1);
                }
        }
    }
    return b.chain;
}

/// Byte offset where each frame (block) of an encoded chain starts, plus the end.
inline std::vector<std::size_t> frame_offsets(const Bytes& encoded) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < encoded.size()) {
        out.push_back(pos);
        std::uint32_t len = (std::uint32_t{encoded[pos]} << 24) | (std::uint32_t{encoded[pos + 1]} << 16) |
                            (std::uint32_t{encoded[pos + 2]} << 8) | std::uint32_t{encoded[pos + 3]};
        pos += 4 + len;
    }
    out.push_back(encoded.size());
    return out;
}

inline std::uint64_t frame_of(const std::vector<std::size_t>& offsets, std::size_t position) {
    std::uint64_t k = 0;
    while (k + 1 < offsets.size() && offsets[k + 1] <= position) ++k;
    return k;
}

}  // namespace fixtures
