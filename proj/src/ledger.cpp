#include "rbacchain/ledger.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "rbacchain/policy.hpp"

namespace rbacchain::ledger {

namespace {

constexpr std::uint8_t kMaxKind = static_cast<std::uint8_t>(TxKind::Record);

Digest zero_digest() { return Digest{}; }

ByteView view(const Digest& d) { return {d.data(), d.size()}; }

void write_set(ByteWriter& w, const std::set<std::string>& s) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (const auto& x : s) w.str(x);
}

std::set<std::string> read_set(ByteReader& r) {
    std::set<std::string> out;
    auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto s = r.str();
        if (!out.empty() && s <= *out.rbegin()) throw DecodeError("set entries out of canonical order");
        out.insert(std::move(s));
    }
    return out;
}

template <typename F>
auto decode_all(ByteView bytes, F&& f) {
    ByteReader r(bytes);
    auto out = f(r);
    r.expect_end();
    return out;
}

Rejection reject(RejectReason reason, std::string detail) { return {reason, std::move(detail)}; }

}  // namespace

std::string to_string(TxKind kind) {
    switch (kind) {
        case TxKind::Genesis: return "genesis";
        case TxKind::DeployContract: return "SC";
        case TxKind::RegisterUser: return "UR";
        case TxKind::ValidateRole: return "V";
        case TxKind::Record: return "record";
    }
    return "unknown";
}

std::string to_string(RejectReason r) {
    switch (r) {
        case RejectReason::BadSignature: return "BadSignature";
        case RejectReason::UnauthorizedSender: return "UnauthorizedSender";
        case RejectReason::BadNonce: return "BadNonce";
        case RejectReason::UnknownContract: return "UnknownContract";
        case RejectReason::MalformedPayload: return "MalformedPayload";
        case RejectReason::SchemaError: return "SchemaError";
    }
    return "Unknown";
}

std::uint64_t wall_clock_ms() {
    using namespace std::chrono;
    return static_cast<std::uint64_t>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

// --- transactions -----------------------------------------------------------

Bytes Transaction::signing_bytes() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(kind));
    crypto::write_actor(w, sender);
    crypto::write_actor(w, recipient);
    w.u64(cost).u64(nonce).bytes(payload);
    return std::move(w).take();
}

void write_transaction(ByteWriter& w, const Transaction& tx) {
    w.fixed(tx.signing_bytes());
    crypto::write_signature(w, tx.signature);
}

Transaction read_transaction(ByteReader& r) {
    Transaction tx;
    auto kind = r.u8();
    if (kind > kMaxKind) throw DecodeError("unknown transaction kind");
    tx.kind = static_cast<TxKind>(kind);
    tx.sender = crypto::read_actor(r);
    tx.recipient = crypto::read_actor(r);
    tx.cost = r.u64();
    tx.nonce = r.u64();
    tx.payload = r.bytes();
    tx.signature = crypto::read_signature(r);
    return tx;
}

Bytes canonical_bytes(const Transaction& tx) {
    ByteWriter w;
    write_transaction(w, tx);
    return std::move(w).take();
}

Transaction decode_transaction(ByteView bytes) {
    return decode_all(bytes, [](ByteReader& r) { return read_transaction(r); });
}

Transaction sign_transaction(Transaction tx, ByteView private_key) {
    tx.signature = crypto::sign(tx.signing_bytes(), private_key);
    return tx;
}

// --- payloads -----------------------------------------------------------------

Bytes GenesisPayload::encode() const {
    ByteWriter w;
    w.bytes(owner_key).bytes(acm_key).bytes(bam_key).bytes(bdm_key);
    w.u32(static_cast<std::uint32_t>(catalog.size()));
    for (const auto& n : catalog.names()) w.str(n);
    return std::move(w).take();
}

GenesisPayload GenesisPayload::decode(ByteView bytes) {
    return decode_all(bytes, [](ByteReader& r) {
        GenesisPayload g;
        g.owner_key = r.bytes();
        g.acm_key = r.bytes();
        g.bam_key = r.bytes();
        g.bdm_key = r.bytes();
        auto n = r.u32();
        if (n > r.remaining()) throw DecodeError("truncated catalog");
        std::vector<std::string> names(n);
        for (auto& s : names) s = r.str();
        g.catalog = rbac::AttributeCatalog(std::move(names));
        return g;
    });
}

Bytes DeployPayload::encode() const {
    ByteWriter w;
    w.bytes(contract.canonical_bytes());
    crypto::write_signature(w, owner_signature);
    return std::move(w).take();
}

DeployPayload DeployPayload::decode(ByteView bytes) {
    return decode_all(bytes, [](ByteReader& r) {
        auto body = r.bytes();
        auto sc = decode_all(body, [](ByteReader& br) { return contract::SmartContract::decode(br); });
        return DeployPayload{std::move(sc), crypto::read_signature(r)};
    });
}

Bytes RegisterPayload::profile_bytes() const {
    ByteWriter w;
    w.str("user-profile");
    rbac::write_user(w, user);
    w.bytes(user_public_key);
    return std::move(w).take();
}

Bytes RegisterPayload::encode() const {
    ByteWriter w;
    rbac::write_user(w, user);
    w.bytes(user_public_key);
    crypto::write_signature(w, owner_signature);
    return std::move(w).take();
}

RegisterPayload RegisterPayload::decode(ByteView bytes) {
    return decode_all(bytes, [](ByteReader& r) {
        RegisterPayload p;
        p.user = rbac::read_user(r);
        p.user_public_key = r.bytes();
        p.owner_signature = crypto::read_signature(r);
        return p;
    });
}

Bytes role_message(const std::string& user_id, const std::set<std::string>& roles) {
    ByteWriter w;
    w.str("user-role").str(user_id);
    write_set(w, roles);
    return std::move(w).take();
}

Bytes ValidatePayload::role_bytes() const { return role_message(request.user_id(), roles); }

Bytes ValidatePayload::encode() const {
    ByteWriter w;
    crypto::write_actor(w, contract_id);
    w.bytes(request.canonical_bytes());
    write_set(w, roles);
    crypto::write_signature(w, role_signature);
    return std::move(w).take();
}

ValidatePayload ValidatePayload::decode(ByteView bytes) {
    return decode_all(bytes, [](ByteReader& r) {
        auto id = crypto::read_actor(r);
        auto req_bytes = r.bytes();
        auto req = decode_all(req_bytes, [](ByteReader& rr) { return rbac::AccessRequest::decode(rr); });
        auto roles = read_set(r);
        auto sig = crypto::read_signature(r);
        return ValidatePayload{std::move(id), std::move(req), std::move(roles), std::move(sig)};
    });
}

// --- blocks -----------------------------------------------------------------

Digest compute_tx_root(const std::vector<Transaction>& txs) {
    if (txs.empty()) return zero_digest();
    std::vector<Digest> level;
    level.reserve(txs.size());
    for (const auto& tx : txs) level.push_back(crypto::sha256(canonical_bytes(tx)));
    while (level.size() > 1) {
        std::vector<Digest> next;
        for (std::size_t i = 0; i < level.size(); i += 2) {
            const auto& a = level[i];
            const auto& b = i + 1 < level.size() ? level[i + 1] : level[i];
            next.push_back(crypto::sha256_concat({view(a), view(b)}));
        }
        level = std::move(next);
    }
    return level.front();
}

Digest Block::compute_hash() const {
    ByteWriter w;
    w.u64(height).fixed(view(prev_hash)).fixed(view(tx_root)).u64(timestamp_ms);
    crypto::write_actor(w, producer);
    return crypto::sha256(w.data());
}

Bytes Block::encode() const {
    ByteWriter w;
    w.u64(height).fixed(view(prev_hash)).fixed(view(tx_root)).u64(timestamp_ms);
    crypto::write_actor(w, producer);
    w.u32(static_cast<std::uint32_t>(transactions.size()));
    for (const auto& tx : transactions) w.bytes(canonical_bytes(tx));
    w.fixed(view(block_hash));
    return std::move(w).take();
}

Block Block::decode(ByteView bytes) {
    return decode_all(bytes, [](ByteReader& r) {
        Block b;
        b.height = r.u64();
        b.prev_hash = r.array<32>();
        b.tx_root = r.array<32>();
        b.timestamp_ms = r.u64();
        b.producer = crypto::read_actor(r);
        auto n = r.u32();
        if (n > r.remaining()) throw DecodeError("truncated transaction list");
        for (std::uint32_t i = 0; i < n; ++i) b.transactions.push_back(decode_transaction(r.bytes()));
        b.block_hash = r.array<32>();
        return b;
    });
}

// --- state ------------------------------------------------------------------

const DeployedContract& ChainState::contract(const ContractId& id) const {
    auto it = contracts.find(id);
    if (it == contracts.end()) throw ContractNotFound("contract " + id.hex() + " is not deployed");
    return it->second;
}

std::uint64_t ChainState::next_nonce(const ActorId& sender) const {
    auto it = nonces.find(sender);
    return it == nonces.end() ? 1 : it->second + 1;
}

Digest ChainState::digest() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(nonces.size()));
    for (const auto& [id, n] : nonces) {
        crypto::write_actor(w, id);
        w.u64(n);
    }
    w.u32(static_cast<std::uint32_t>(contracts.size()));
    for (const auto& [id, dc] : contracts) {
        crypto::write_actor(w, id);
        w.u64(dc.height);
    }
    w.str(latest_contract ? latest_contract->hex() : "");
    w.u32(static_cast<std::uint32_t>(users.size()));
    for (const auto& [id, u] : users.all()) {
        rbac::write_user(w, u);
        w.bytes(user_keys.at(id));
    }
    w.u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& [id, rec] : records.records()) {
        datastore::write_record_body(w, rec);
        crypto::write_actor(w, rec.owner);
        w.u64(rec.created_at_height);
    }
    w.u32(static_cast<std::uint32_t>(validations.size()));
    for (const auto& v : validations) {
        w.u64(v.height).str(v.user_id);
        crypto::write_actor(w, v.contract_id);
        w.boolean(v.rights.has_value());
        if (v.rights) rbac::write_mask(w, *v.rights);
        w.u32(v.denied_at ? static_cast<std::uint32_t>(*v.denied_at) : 0);
        w.u64(v.gas_used);
    }
    return crypto::sha256(w.data());
}

rbac::AccessDecision decide_validation(const ChainState& state, const ValidatePayload& payload) {
    const auto& rules = state.contract(payload.contract_id).contract.rules();
    const auto* user = state.users.find(payload.request.user_id());
    if (user != nullptr && user->roles != payload.roles) {
        rbac::AccessDecision d;
        d.checks_evaluated = 2;
        if (!rules.find_user_type(user->user_type)) {
            d.checks_evaluated = 1;
            d.denial = rbac::Denial{rbac::Semantic::UserType, "Invalid User: unknown user type " + user->user_type};
        } else {
            d.denial = rbac::Denial{rbac::Semantic::RoleAssignment, "claimed roles differ from registered roles"};
        }
        return d;
    }
    return rbac::check_accessibility_rules(rules, user, payload.request);
}

// --- chain ------------------------------------------------------------------

Chain::Chain(contract::GasSchedule schedule) : schedule_(schedule) {}

Chain Chain::create(const crypto::KeyPair& owner, const Bytes& acm_key, const Bytes& bam_key, const Bytes& bdm_key,
                    rbac::AttributeCatalog catalog, std::uint64_t genesis_timestamp_ms,
                    contract::GasSchedule schedule) {
    GenesisPayload g{owner.public_key, acm_key, bam_key, bdm_key, std::move(catalog)};
    Transaction tx;
    tx.kind = TxKind::Genesis;
    tx.sender = crypto::actor_id_of(owner.public_key);
    tx.recipient = crypto::actor_id_of(bam_key);
    tx.payload = g.encode();
    tx = sign_transaction(std::move(tx), owner.private_key);

    Block b;
    b.height = 0;
    b.timestamp_ms = genesis_timestamp_ms;
    b.producer = crypto::actor_id_of(bam_key);
    b.transactions.push_back(std::move(tx));
    b.tx_root = compute_tx_root(b.transactions);
    b.block_hash = b.compute_hash();

    Chain chain(schedule);
    chain.apply_block(b);
    return chain;
}

Chain Chain::from_blocks(const std::vector<Block>& blocks, contract::GasSchedule schedule) {
    Chain chain(schedule);
    for (const auto& b : blocks) chain.apply_block(b);
    return chain;
}

Chain Chain::adopt_unverified(std::vector<Block> blocks, contract::GasSchedule schedule) {
    Chain chain(schedule);
    chain.blocks_ = std::move(blocks);
    chain.verified_ = false;
    return chain;
}

Digest Chain::tip_hash() const { return blocks_.empty() ? zero_digest() : blocks_.back().block_hash; }

std::optional<Rejection> Chain::validate_transaction(const Transaction& tx) const {
    if (tx.kind == TxKind::Genesis) {
        if (!blocks_.empty()) return reject(RejectReason::MalformedPayload, "genesis transaction after height 0");
        GenesisPayload g;
        try {
            g = GenesisPayload::decode(tx.payload);
        } catch (const Error& e) {
            return reject(RejectReason::MalformedPayload, e.what());
        }
        if (tx.sender != crypto::actor_id_of(g.owner_key)) {
            return reject(RejectReason::UnauthorizedSender, "genesis must be issued by the data owner");
        }
        if (!crypto::verify(tx.signing_bytes(), tx.signature, g.owner_key)) {
            return reject(RejectReason::BadSignature, "genesis signature");
        }
        if (tx.nonce != 0) return reject(RejectReason::BadNonce, "genesis nonce must be 0");
        if (tx.cost != 0 || tx.recipient != crypto::actor_id_of(g.bam_key)) {
            return reject(RejectReason::MalformedPayload, "genesis header fields");
        }
        return std::nullopt;
    }
    if (blocks_.empty()) return reject(RejectReason::MalformedPayload, "chain has no genesis");

    const auto& auth = state_.authorities;
    const ActorId& expected = tx.kind == TxKind::ValidateRole ? auth.acm : auth.owner;
    const Bytes& key = tx.kind == TxKind::ValidateRole ? auth.acm_key : auth.owner_key;
    if (tx.sender != expected) {
        return reject(RejectReason::UnauthorizedSender,
                      tx.sender.hex() + " may not submit " + to_string(tx.kind) + " transactions");
    }
    if (!crypto::verify(tx.signing_bytes(), tx.signature, key)) {
        return reject(RejectReason::BadSignature, "transaction signature does not verify under sender key");
    }
    auto expected_nonce = state_.next_nonce(tx.sender);
    if (tx.nonce != expected_nonce) {
        return reject(RejectReason::BadNonce,
                      "expected nonce " + std::to_string(expected_nonce) + ", got " + std::to_string(tx.nonce));
    }
    return check_payload(tx);
}

std::optional<Rejection> Chain::check_payload(const Transaction& tx) const {
    const auto& auth = state_.authorities;
    try {
        switch (tx.kind) {
            case TxKind::DeployContract: {
                auto p = DeployPayload::decode(tx.payload);
                if (tx.recipient != auth.bam) return reject(RejectReason::MalformedPayload, "SC must be sent to the BAM");
                if (p.contract.owner() != auth.owner) {
                    return reject(RejectReason::MalformedPayload, "contract owner is not the data owner");
                }
                if (!crypto::verify(p.contract.canonical_bytes(), p.owner_signature, auth.owner_key)) {
                    return reject(RejectReason::BadSignature, "contract is not signed by the data owner");
                }
                if (!(p.contract.rules().catalog() == state_.catalog)) {
                    return reject(RejectReason::SchemaError, "contract catalog differs from the chain catalog");
                }
                if (state_.contracts.contains(p.contract.id())) {
                    return reject(RejectReason::MalformedPayload, "contract " + p.contract.id().hex() + " already deployed");
                }
                auto gas = contract::gas_of_deployment(p.contract, schedule_).gas_used;
                if (tx.cost != gas) {
                    return reject(RejectReason::MalformedPayload,
                                  "cost " + std::to_string(tx.cost) + " != deployment gas " + std::to_string(gas));
                }
                return std::nullopt;
            }
            case TxKind::RegisterUser: {
                auto p = RegisterPayload::decode(tx.payload);
                if (tx.recipient != auth.bdm) return reject(RejectReason::MalformedPayload, "UR must be sent to the BDM");
                if (!crypto::verify(p.profile_bytes(), p.owner_signature, auth.owner_key)) {
                    return reject(RejectReason::BadSignature, "user profile is not signed by the data owner");
                }
                if (p.user_public_key.size() != crypto::kPublicKeySize) {
                    return reject(RejectReason::MalformedPayload, "user public key");
                }
                if (!state_.latest_contract) {
                    return reject(RejectReason::UnknownContract, "no contract deployed to register against");
                }
                rbac::register_user(state_.contract(*state_.latest_contract).contract.rules(), p.user.user_id,
                                    p.user.user_type, p.user.roles);
                if (tx.cost != payload_cost(tx.payload.size(), schedule_)) {
                    return reject(RejectReason::MalformedPayload, "cost does not match payload size");
                }
                return std::nullopt;
            }
            case TxKind::ValidateRole: {
                auto p = ValidatePayload::decode(tx.payload);
                if (tx.recipient != auth.bam) return reject(RejectReason::MalformedPayload, "V must be sent to the BAM");
                if (!state_.contracts.contains(p.contract_id)) {
                    return reject(RejectReason::UnknownContract, "contract " + p.contract_id.hex() + " is not deployed");
                }
                if (!crypto::verify(p.role_bytes(), p.role_signature, auth.acm_key)) {
                    return reject(RejectReason::BadSignature, "role claim is not signed by the ACM");
                }
                rbac::require_well_formed(state_.contract(p.contract_id).contract.rules().catalog(), p.request);
                auto decision = decide_validation(state_, p);
                auto gas = contract::gas_of_validation(state_.contract(p.contract_id).contract, p.request, decision,
                                                       schedule_);
                if (gas.gas_used > tx.cost) return reject(RejectReason::MalformedPayload, "gas limit exceeded");
                return std::nullopt;
            }
            case TxKind::Record: {
                auto rec = decode_all(tx.payload, [](ByteReader& r) { return datastore::read_record_body(r); });
                if (tx.recipient != auth.bdm) return reject(RejectReason::MalformedPayload, "records go to the BDM");
                datastore::check_schema(state_.catalog, rec);
                if (state_.records.contains(rec.record_id)) {
                    return reject(RejectReason::MalformedPayload, "duplicate record id " + rec.record_id);
                }
                if (tx.cost != payload_cost(tx.payload.size(), schedule_)) {
                    return reject(RejectReason::MalformedPayload, "cost does not match payload size");
                }
                return std::nullopt;
            }
            case TxKind::Genesis: break;
        }
    } catch (const SchemaError& e) {
        return reject(RejectReason::SchemaError, e.what());
    } catch (const ContractNotFound& e) {
        return reject(RejectReason::UnknownContract, e.what());
    } catch (const Error& e) {
        return reject(RejectReason::MalformedPayload, e.what());
    }
    return reject(RejectReason::MalformedPayload, "unexpected transaction kind");
}

void Chain::apply_transaction(const Transaction& tx, std::uint64_t height) {
    switch (tx.kind) {
        case TxKind::Genesis: {
            auto g = GenesisPayload::decode(tx.payload);
            auto& a = state_.authorities;
            a.owner_key = g.owner_key;
            a.acm_key = g.acm_key;
            a.bam_key = g.bam_key;
            a.bdm_key = g.bdm_key;
            a.owner = crypto::actor_id_of(g.owner_key);
            a.acm = crypto::actor_id_of(g.acm_key);
            a.bam = crypto::actor_id_of(g.bam_key);
            a.bdm = crypto::actor_id_of(g.bdm_key);
            state_.catalog = std::move(g.catalog);
            return;
        }
        case TxKind::DeployContract: {
            auto p = DeployPayload::decode(tx.payload);
            auto id = p.contract.id();
            state_.contracts.emplace(id, DeployedContract{std::move(p.contract), height});
            state_.latest_contract = id;
            break;
        }
        case TxKind::RegisterUser: {
            auto p = RegisterPayload::decode(tx.payload);
            state_.user_keys[p.user.user_id] = p.user_public_key;
            state_.users.put(std::move(p.user));
            break;
        }
        case TxKind::ValidateRole: {
            auto p = ValidatePayload::decode(tx.payload);
            auto decision = decide_validation(state_, p);
            const auto& sc = state_.contract(p.contract_id).contract;
            ValidationRecord rec;
            rec.height = height;
            rec.user_id = p.request.user_id();
            rec.contract_id = p.contract_id;
            rec.gas_used = contract::gas_of_validation(sc, p.request, decision, schedule_).gas_used;
            if (decision.ok()) {
                rec.rights = decision.granted->mask;
            } else {
                rec.denied_at = decision.denial->semantic;
            }
            state_.validations.push_back(std::move(rec));
            break;
        }
        case TxKind::Record: {
            auto rec = decode_all(tx.payload, [](ByteReader& r) { return datastore::read_record_body(r); });
            rec.owner = tx.sender;
            rec.created_at_height = height;
            state_.records.insert(std::move(rec));
            break;
        }
    }
    state_.nonces[tx.sender] = tx.nonce;
}

void Chain::check_header(const Block& b) const {
    auto fail = [&](const std::string& why) {
        throw TransactionRejected(reject(RejectReason::MalformedPayload, "block " + std::to_string(b.height) + ": " + why));
    };
    if (blocks_.empty()) {
        if (b.height != 0) fail("first block must be genesis");
        if (b.prev_hash != zero_digest()) fail("genesis prev_hash must be zero");
        if (b.transactions.size() != 1 || b.transactions[0].kind != TxKind::Genesis) fail("genesis shape");
    } else {
        if (b.height != blocks_.back().height + 1) fail("height does not follow tip");
        if (b.prev_hash != blocks_.back().block_hash) fail("prev_hash does not link to tip");
        if (b.transactions.empty()) fail("empty block");
        if (b.producer != state_.authorities.bam) fail("producer is not the BAM");
    }
    if (b.tx_root != compute_tx_root(b.transactions)) fail("tx_root mismatch");
    if (b.block_hash != b.compute_hash()) fail("block_hash mismatch");
}

void Chain::apply_block(const Block& block) {
    if (!verified_) throw SyncRefused("cannot extend an unverified chain");
    check_header(block);
    if (blocks_.empty()) {
        if (auto r = validate_transaction(block.transactions[0])) throw TransactionRejected(*r);
        auto g = GenesisPayload::decode(block.transactions[0].payload);
        if (block.producer != crypto::actor_id_of(g.bam_key)) {
            throw TransactionRejected(reject(RejectReason::MalformedPayload, "genesis producer is not the BAM"));
        }
        apply_transaction(block.transactions[0], 0);
    } else {
        // Validate on a scratch copy so a bad multi-transaction block leaves no trace.
        if (block.transactions.size() == 1) {
            if (auto r = validate_transaction(block.transactions[0])) throw TransactionRejected(*r);
            apply_transaction(block.transactions[0], block.height);
        } else {
            Chain scratch = *this;
            for (const auto& tx : block.transactions) {
                if (auto r = scratch.validate_transaction(tx)) throw TransactionRejected(*r);
                scratch.apply_transaction(tx, block.height);
            }
            state_ = std::move(scratch.state_);
        }
    }
    blocks_.push_back(block);
}

const Block& Chain::mine_block(const Transaction& tx, std::optional<std::uint64_t> timestamp_ms) {
    if (blocks_.empty()) throw TransactionRejected(reject(RejectReason::MalformedPayload, "chain has no genesis"));
    if (!verified_) throw SyncRefused("cannot mine on an unverified chain");
    if (auto r = validate_transaction(tx)) throw TransactionRejected(*r);
    Block b;
    b.height = blocks_.back().height + 1;
    b.prev_hash = blocks_.back().block_hash;
    b.timestamp_ms = timestamp_ms ? *timestamp_ms : clock_();
    b.producer = state_.authorities.bam;
    b.transactions.push_back(tx);
    b.tx_root = compute_tx_root(b.transactions);
    b.block_hash = b.compute_hash();
    apply_transaction(tx, b.height);
    blocks_.push_back(std::move(b));
    return blocks_.back();
}

VerifyResult verify_chain(const std::vector<Block>& blocks, const contract::GasSchedule& schedule) {
    Chain fresh(schedule);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        try {
            if (blocks[i].height != i) {
                return {static_cast<std::uint64_t>(i), "unexpected height " + std::to_string(blocks[i].height)};
            }
            fresh.apply_block(blocks[i]);
        } catch (const Error& e) {
            return {static_cast<std::uint64_t>(i), e.what()};
        }
    }
    return {};
}

VerifyResult verify_chain(const Chain& chain) { return verify_chain(chain.blocks(), chain.schedule()); }

Chain& replicate(const Chain& source, Chain& target) {
    if (source.empty()) return target;
    if (!source.verified()) {
        auto v = verify_chain(source);
        if (!v.ok()) {
            throw SyncRefused("source chain fails verification at height " + std::to_string(*v.first_bad_height) +
                              ": " + v.reason);
        }
    }
    const auto& src = source.blocks();
    const auto& dst = target.blocks();
    std::size_t common = 0;
    while (common < src.size() && common < dst.size() && src[common].block_hash == dst[common].block_hash) ++common;

    if (common == dst.size() && target.verified()) {
        for (std::size_t i = common; i < src.size(); ++i) target.apply_block(src[i]);
    } else if (src.size() > dst.size() || !target.verified()) {
        target = Chain::from_blocks(src, source.schedule());
    }
    return target;
}

// --- persistence --------------------------------------------------------------

Bytes encode_chain(const std::vector<Block>& blocks) {
    ByteWriter w;
    for (const auto& b : blocks) w.bytes(b.encode());
    return std::move(w).take();
}

DecodedChain decode_chain(ByteView bytes) {
    DecodedChain out;
    ByteReader r(bytes);
    while (r.remaining() > 0) {
        auto height = static_cast<std::uint64_t>(out.blocks.size());
        try {
            auto frame = r.bytes();
            out.blocks.push_back(Block::decode(frame));
        } catch (const Error& e) {
            out.failed_at = height;
            out.error = e.what();
            break;
        }
    }
    return out;
}

VerifyResult verify_chain_bytes(ByteView bytes, const contract::GasSchedule& schedule) {
    auto decoded = decode_chain(bytes);
    auto v = verify_chain(decoded.blocks, schedule);
    if (!v.ok()) return v;
    if (decoded.failed_at) return {decoded.failed_at, "decode: " + decoded.error};
    return {};
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

void save_chain(const std::filesystem::path& path, const Chain& chain) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    auto bytes = encode_chain(chain.blocks());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void append_block(const std::filesystem::path& path, const Block& block) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + path.string());
    auto bytes = encode_chain({block});
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Chain load_chain(const std::filesystem::path& path, const contract::GasSchedule& schedule) {
    auto decoded = decode_chain(read_file(path));
    if (decoded.failed_at) {
        throw DecodeError(path.string() + ": block " + std::to_string(*decoded.failed_at) + ": " + decoded.error);
    }
    return Chain::from_blocks(decoded.blocks, schedule);
}

// --- replay -----------------------------------------------------------------

std::vector<LogEntry> transaction_log(const Chain& chain) {
    std::vector<LogEntry> log;
    for (const auto& b : chain.blocks()) {
        if (b.height == 0) continue;
        for (const auto& tx : b.transactions) log.push_back({b.timestamp_ms, tx});
    }
    return log;
}

Chain replay(const Block& genesis, const std::vector<LogEntry>& log, const contract::GasSchedule& schedule) {
    Chain chain(schedule);
    chain.apply_block(genesis);
    for (const auto& e : log) chain.mine_block(e.tx, e.timestamp_ms);
    return chain;
}

// --- export -------------------------------------------------------------------

std::string export_json(const Chain& chain) {
    using nlohmann::json;
    json blocks = json::array();
    for (const auto& b : chain.blocks()) {
        json txs = json::array();
        for (const auto& tx : b.transactions) {
            json jt{{"kind", to_string(tx.kind)},
                    {"sender", tx.sender.hex()},
                    {"recipient", tx.recipient.hex()},
                    {"cost", tx.cost},
                    {"nonce", tx.nonce},
                    {"signature", to_hex(tx.signature.bytes)}};
            switch (tx.kind) {
                case TxKind::Genesis: {
                    auto g = GenesisPayload::decode(tx.payload);
                    jt["catalog"] = g.catalog.names();
                    break;
                }
                case TxKind::DeployContract: {
                    auto p = DeployPayload::decode(tx.payload);
                    jt["contract_id"] = p.contract.id().hex();
                    jt["version"] = p.contract.version();
                    jt["rules"] = policy::model_to_json(p.contract.rules());
                    break;
                }
                case TxKind::RegisterUser: {
                    auto p = RegisterPayload::decode(tx.payload);
                    jt["user"] = {{"id", p.user.user_id}, {"type", p.user.user_type}, {"roles", p.user.roles}};
                    break;
                }
                case TxKind::ValidateRole: {
                    auto p = ValidatePayload::decode(tx.payload);
                    json params = json::array();
                    for (const auto& [att, val] : p.request.params()) params.push_back({att, policy::value_to_json(val)});
                    jt["contract_id"] = p.contract_id.hex();
                    jt["user_id"] = p.request.user_id();
                    jt["roles"] = p.roles;
                    jt["params"] = params;
                    break;
                }
                case TxKind::Record: {
                    auto rec = decode_all(tx.payload, [](ByteReader& r) { return datastore::read_record_body(r); });
                    json attrs = json::object();
                    for (const auto& [att, val] : rec.attributes) attrs[att] = policy::value_to_json(val);
                    jt["record_id"] = rec.record_id;
                    jt["attributes"] = attrs;
                    break;
                }
            }
            txs.push_back(std::move(jt));
        }
        blocks.push_back({{"height", b.height},
                          {"prev_hash", to_hex(b.prev_hash)},
                          {"tx_root", to_hex(b.tx_root)},
                          {"timestamp_ms", b.timestamp_ms},
                          {"producer", b.producer.hex()},
                          {"block_hash", to_hex(b.block_hash)},
                          {"transactions", txs}});
    }
    return json{{"height", chain.height()}, {"tip_hash", to_hex(chain.tip_hash())}, {"blocks", blocks}}.dump(2);
}

// --- builders -----------------------------------------------------------------

std::uint64_t payload_cost(std::size_t payload_bytes, const contract::GasSchedule& s) {
    return s.tx_base + s.tx_byte * payload_bytes;
}

std::uint64_t validation_gas_limit(const rbac::AccessRequest& request, const contract::GasSchedule& s) {
    return s.v_base + 4 * s.v_check + s.v_attr * request.params().size();
}

Transaction make_deploy_tx(const contract::SmartContract& sc, const crypto::KeyPair& owner, const ActorId& bam,
                           std::uint64_t nonce, const contract::GasSchedule& schedule) {
    DeployPayload p{sc, crypto::sign(sc.canonical_bytes(), owner.private_key)};
    Transaction tx;
    tx.kind = TxKind::DeployContract;
    tx.sender = crypto::actor_id_of(owner.public_key);
    tx.recipient = bam;
    tx.cost = contract::gas_of_deployment(sc, schedule).gas_used;
    tx.nonce = nonce;
    tx.payload = p.encode();
    return sign_transaction(std::move(tx), owner.private_key);
}

Transaction make_register_tx(const rbac::RegisteredUser& user, const Bytes& user_public_key,
                             const crypto::KeyPair& owner, const ActorId& bdm, std::uint64_t nonce,
                             const contract::GasSchedule& schedule) {
    RegisterPayload p{user, user_public_key, {}};
    p.owner_signature = crypto::sign(p.profile_bytes(), owner.private_key);
    Transaction tx;
    tx.kind = TxKind::RegisterUser;
    tx.sender = crypto::actor_id_of(owner.public_key);
    tx.recipient = bdm;
    tx.nonce = nonce;
    tx.payload = p.encode();
    tx.cost = payload_cost(tx.payload.size(), schedule);
    return sign_transaction(std::move(tx), owner.private_key);
}

Transaction make_validate_tx(const ContractId& contract_id, const rbac::AccessRequest& request,
                             const std::set<std::string>& roles, const crypto::KeyPair& acm, const ActorId& bam,
                             std::uint64_t nonce, const contract::GasSchedule& schedule) {
    ValidatePayload p{contract_id, request, roles, crypto::sign(role_message(request.user_id(), roles), acm.private_key)};
    Transaction tx;
    tx.kind = TxKind::ValidateRole;
    tx.sender = crypto::actor_id_of(acm.public_key);
    tx.recipient = bam;
    tx.cost = validation_gas_limit(request, schedule);
    tx.nonce = nonce;
    tx.payload = p.encode();
    return sign_transaction(std::move(tx), acm.private_key);
}

Transaction make_record_tx(const datastore::DataRecord& record, const crypto::KeyPair& owner, const ActorId& bdm,
                           std::uint64_t nonce, const contract::GasSchedule& schedule) {
    ByteWriter w;
    datastore::write_record_body(w, record);
    Transaction tx;
    tx.kind = TxKind::Record;
    tx.sender = crypto::actor_id_of(owner.public_key);
    tx.recipient = bdm;
    tx.nonce = nonce;
    tx.payload = std::move(w).take();
    tx.cost = payload_cost(tx.payload.size(), schedule);
    return sign_transaction(std::move(tx), owner.private_key);
}

}  // namespace rbacchain::ledger
