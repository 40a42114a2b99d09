#include "rbacchain/fabric.hpp"

#include <algorithm>
#include <iostream>

namespace rbacchain::fabric {

using Clock = std::chrono::steady_clock;

std::string to_string(NodeRole role) {
    switch (role) {
        case NodeRole::CSP: return "CSP";
        case NodeRole::ACM: return "ACM";
        case NodeRole::BAM: return "BAM";
        case NodeRole::BDM: return "BDM";
        case NodeRole::PEER: return "PEER";
    }
    return "?";
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Authentication: return "authentication";
        case Stage::Validation: return "validation";
        case Stage::Query: return "query";
        case Stage::Done: return "done";
    }
    return "?";
}

// --- envelopes ----------------------------------------------------------------

Bytes Envelope::signing_bytes() const {
    ByteWriter w;
    w.str("envelope");
    crypto::write_actor(w, from);
    crypto::write_actor(w, to);
    w.u8(static_cast<std::uint8_t>(kind)).bytes(body);
    return std::move(w).take();
}

Bytes Envelope::encode() const {
    ByteWriter w;
    crypto::write_actor(w, from);
    crypto::write_actor(w, to);
    w.u8(static_cast<std::uint8_t>(kind)).bytes(body);
    crypto::write_signature(w, signature);
    return std::move(w).take();
}

Envelope Envelope::decode(ByteView bytes) {
    ByteReader r(bytes);
    Envelope e;
    e.from = crypto::read_actor(r);
    e.to = crypto::read_actor(r);
    auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(MessageKind::Denied)) throw DecodeError("unknown message kind");
    e.kind = static_cast<MessageKind>(kind);
    e.body = r.bytes();
    e.signature = crypto::read_signature(r);
    r.expect_end();
    return e;
}

Envelope seal(ActorId to, MessageKind kind, Bytes body, const crypto::KeyPair& key) {
    Envelope e{crypto::actor_id_of(key.public_key), std::move(to), kind, std::move(body), {}};
    e.signature = crypto::sign(e.signing_bytes(), key.private_key);
    return e;
}

// --- network ------------------------------------------------------------------

Network::Network(LatencyModel latency, std::uint64_t seed) : latency_(latency), rng_(seed) {
    if (!latency_.zero()) scheduler_ = std::jthread([this](std::stop_token st) { run_scheduler(st); });
}

Network::~Network() { shutdown(); }

void Network::shutdown() {
    {
        std::lock_guard lk(mu_);
        closed_ = true;
        queue_.clear();
    }
    if (scheduler_.joinable()) {
        scheduler_.request_stop();
        cv_.notify_all();
        scheduler_.join();
    }
}

void Network::attach(const ActorId& id, Endpoint* endpoint) {
    std::lock_guard lk(mu_);
    endpoints_[id] = endpoint;
    online_.try_emplace(id, true);
}

void Network::detach(const ActorId& id) {
    std::lock_guard lk(mu_);
    endpoints_.erase(id);
}

void Network::set_online(const ActorId& id, bool online) {
    std::lock_guard lk(mu_);
    online_[id] = online;
}

bool Network::online(const ActorId& id) const {
    std::lock_guard lk(mu_);
    auto it = online_.find(id);
    return it == online_.end() || it->second;
}

void Network::set_tamper(Tamper tamper) {
    std::lock_guard lk(mu_);
    tamper_ = std::move(tamper);
}

void Network::send(const Envelope& env) {
    auto bytes = env.encode();
    Tamper tamper;
    {
        std::lock_guard lk(mu_);
        if (closed_) return;
        auto from = online_.find(env.from);
        if (from != online_.end() && !from->second) return;
        tamper = tamper_;
    }
    if (tamper) tamper(env.from, env.to, bytes);
    if (latency_.zero()) {
        deliver_now(env.to, std::move(bytes));
        return;
    }
    std::lock_guard lk(mu_);
    if (closed_) return;
    std::uniform_real_distribution<double> dist(latency_.min_ms, latency_.max_ms);
    auto delay = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(dist(rng_)));
    auto at = Clock::now() + delay;
    auto& tail = link_tail_[{env.from, env.to}];
    at = std::max(at, tail);
    tail = at;
    queue_.push_back({at, seq_++, env.to, std::move(bytes)});
    std::push_heap(queue_.begin(), queue_.end(), std::greater<>{});
    cv_.notify_all();
}

void Network::deliver_now(const ActorId& to, Bytes bytes) {
    Endpoint* ep = nullptr;
    {
        std::lock_guard lk(mu_);
        if (closed_) return;
        auto on = online_.find(to);
        if (on != online_.end() && !on->second) return;
        auto it = endpoints_.find(to);
        if (it == endpoints_.end()) return;
        ep = it->second;
    }
    ep->deliver(std::move(bytes));
}

void Network::run_scheduler(std::stop_token st) {
    std::unique_lock lk(mu_);
    while (!st.stop_requested()) {
        if (queue_.empty()) {
            cv_.wait(lk, st, [&] { return !queue_.empty(); });
            continue;
        }
        auto at = queue_.front().at;
        if (Clock::now() < at) {
            cv_.wait_until(lk, st, at, [&] { return !queue_.empty() && queue_.front().at < at; });
            continue;
        }
        std::pop_heap(queue_.begin(), queue_.end(), std::greater<>{});
        auto item = std::move(queue_.back());
        queue_.pop_back();
        lk.unlock();
        deliver_now(item.to, std::move(item.bytes));
        lk.lock();
    }
}

// --- identities -----------------------------------------------------------------

Identities Identities::generate(std::size_t bdm_count) {
    Identities ids{{"owner", crypto::key_gen()}, {"csp", crypto::key_gen()}, {"acm", crypto::key_gen()},
                   {"bam", crypto::key_gen()}, {}};
    for (std::size_t i = 0; i < std::max<std::size_t>(bdm_count, 1); ++i) {
        ids.bdms.push_back({"bdm" + (i == 0 ? std::string() : std::to_string(i)), crypto::key_gen()});
    }
    return ids;
}

struct Directory {
    std::map<ActorId, Bytes> keys;
    ActorId owner, csp, acm, bam;
    std::vector<ActorId> bdms;
    std::vector<ActorId> replicas;  // every node except the BAM
    Millis timeout{30000};
    contract::GasSchedule schedule;

    const Bytes* key_of(const ActorId& id) const {
        auto it = keys.find(id);
        return it == keys.end() ? nullptr : &it->second;
    }
};

// --- message bodies -----------------------------------------------------------

namespace {

struct Denied {
    std::uint64_t rid = 0;
    Stage stage = Stage::Validation;
    std::string code;
    std::string reason;
    std::optional<std::uint64_t> height;

    Bytes encode() const {
        ByteWriter w;
        w.u64(rid).u8(static_cast<std::uint8_t>(stage)).str(code).str(reason).boolean(height.has_value());
        if (height) w.u64(*height);
        return std::move(w).take();
    }
    static Denied decode(ByteView b) {
        ByteReader r(b);
        Denied d;
        d.rid = r.u64();
        auto stage = r.u8();
        if (stage > static_cast<std::uint8_t>(Stage::Done)) throw DecodeError("bad stage");
        d.stage = static_cast<Stage>(stage);
        d.code = r.str();
        d.reason = r.str();
        if (r.boolean()) d.height = r.u64();
        return d;
    }
};

struct Granted {
    std::uint64_t rid = 0;
    rbac::Mask mask;
    crypto::Signature bam_signature;
    std::uint64_t height = 0;
    std::uint64_t gas = 0;
    std::uint64_t round_trip_us = 0;

    Bytes encode() const {
        ByteWriter w;
        w.u64(rid);
        rbac::write_mask(w, mask);
        crypto::write_signature(w, bam_signature);
        w.u64(height).u64(gas).u64(round_trip_us);
        return std::move(w).take();
    }
    static Granted decode(ByteView b) {
        ByteReader r(b);
        Granted g;
        g.rid = r.u64();
        g.mask = rbac::read_mask(r);
        g.bam_signature = crypto::read_signature(r);
        g.height = r.u64();
        g.gas = r.u64();
        g.round_trip_us = r.u64();
        return g;
    }
};

struct ValidationResult {
    std::uint64_t rid = 0;
    bool accepted = false;
    // rejected transaction
    std::string reject_code;
    std::string reject_detail;
    std::uint64_t expected_nonce = 0;
    // accepted
    std::uint64_t height = 0;
    std::optional<rbac::Mask> rights;
    std::optional<crypto::Signature> signature;
    std::uint32_t denied_at = 0;
    std::string denial_reason;
    std::uint64_t gas = 0;

    Bytes encode() const {
        ByteWriter w;
        w.u64(rid).boolean(accepted).str(reject_code).str(reject_detail).u64(expected_nonce).u64(height);
        w.boolean(rights.has_value());
        if (rights) rbac::write_mask(w, *rights);
        w.boolean(signature.has_value());
        if (signature) crypto::write_signature(w, *signature);
        w.u32(denied_at).str(denial_reason).u64(gas);
        return std::move(w).take();
    }
    static ValidationResult decode(ByteView b) {
        ByteReader r(b);
        ValidationResult v;
        v.rid = r.u64();
        v.accepted = r.boolean();
        v.reject_code = r.str();
        v.reject_detail = r.str();
        v.expected_nonce = r.u64();
        v.height = r.u64();
        if (r.boolean()) v.rights = rbac::read_mask(r);
        if (r.boolean()) v.signature = crypto::read_signature(r);
        v.denied_at = r.u32();
        v.denial_reason = r.str();
        v.gas = r.u64();
        return v;
    }
};

Bytes rid_body(std::uint64_t rid, std::initializer_list<ByteView> parts) {
    ByteWriter w;
    w.u64(rid);
    for (auto p : parts) w.bytes(p);
    return std::move(w).take();
}

std::uint64_t peek_rid(ByteView body) {
    ByteReader r(body);
    return r.u64();
}

}  // namespace

// --- nodes --------------------------------------------------------------------

class Node : public Endpoint {
public:
    Node(NodeRole role, Identity ident, Network& net, std::shared_ptr<const Directory> dir)
        : role_(role), ident_(std::move(ident)), id_(ident_.id()), net_(net), dir_(std::move(dir)),
          chain_(dir_->schedule) {}
    ~Node() override { stop(); }

    NodeRole role() const { return role_; }
    const ActorId& id() const { return id_; }

    void init_chain(const ledger::Chain& source) {
        std::unique_lock lk(chain_mu_);
        ledger::replicate(source, chain_);
    }

    void start() {
        thread_ = std::jthread([this](std::stop_token st) { run(st); });
    }

    void stop() {
        if (thread_.joinable()) {
            thread_.request_stop();
            cv_.notify_all();
            thread_.join();
        }
    }

    void deliver(Bytes envelope) override {
        {
            std::lock_guard lk(inbox_mu_);
            inbox_.push_back(std::move(envelope));
        }
        cv_.notify_one();
    }

    ledger::Chain snapshot() const {
        std::shared_lock lk(chain_mu_);
        return chain_;
    }

    Digest tip() const {
        std::shared_lock lk(chain_mu_);
        return chain_.tip_hash();
    }

    std::uint64_t height() const {
        std::shared_lock lk(chain_mu_);
        return chain_.height();
    }

    std::optional<contract::ContractId> latest_contract() const {
        std::shared_lock lk(chain_mu_);
        return chain_.state().latest_contract;
    }

    void request_resync() {
        std::uint64_t next = 0;
        {
            std::shared_lock lk(chain_mu_);
            next = chain_.empty() ? 0 : chain_.height() + 1;
        }
        ByteWriter w;
        w.u64(0).u64(next);
        send(dir_->bam, MessageKind::SyncRequest, std::move(w).take());
    }

protected:
    virtual void handle(const Envelope& env) = 0;
    virtual std::optional<Clock::time_point> next_deadline() const { return std::nullopt; }
    virtual void on_deadline(Clock::time_point) {}

    /// Key used to verify an incoming envelope's signature.
    virtual const Bytes* sender_key(const Envelope& env) const { return dir_->key_of(env.from); }

    void send(const ActorId& to, MessageKind kind, Bytes body) {
        net_.send(seal(to, kind, std::move(body), ident_.keys));
    }

    void send_denied(const ActorId& to, const Denied& d) { send(to, MessageKind::Denied, d.encode()); }

    /// Writes go through here so snapshot readers see whole blocks only.
    template <typename F>
    auto write_chain(F&& f) {
        std::unique_lock lk(chain_mu_);
        return f(chain_);
    }

    /// Node-thread reads need no lock: this thread is the only writer.
    const ledger::Chain& chain() const { return chain_; }

    void handle_sync(const Envelope& env) {
        ByteReader r(env.body);
        r.u64();
        auto decoded = ledger::decode_chain(r.bytes());
        for (const auto& block : decoded.blocks) {
            std::uint64_t next = chain_.empty() ? 0 : chain_.height() + 1;
            if (block.height < next) continue;
            if (block.height > next) {
                request_resync();
                return;
            }
            try {
                write_chain([&](ledger::Chain& c) { c.apply_block(block); });
            } catch (const Error& e) {
                std::cerr << "[" << to_string(role_) << "] rejected block " << block.height << ": " << e.what() << '\n';
                return;
            }
        }
    }

    NodeRole role_;
    Identity ident_;
    ActorId id_;
    Network& net_;
    std::shared_ptr<const Directory> dir_;

private:
    void run(std::stop_token st) {
        while (!st.stop_requested()) {
            std::optional<Bytes> item;
            {
                std::unique_lock lk(inbox_mu_);
                auto deadline = next_deadline();
                auto ready = [&] { return !inbox_.empty(); };
                if (deadline) {
                    cv_.wait_until(lk, st, *deadline, ready);
                } else {
                    cv_.wait(lk, st, ready);
                }
                if (st.stop_requested()) return;
                if (!inbox_.empty()) {
                    item = std::move(inbox_.front());
                    inbox_.pop_front();
                }
            }
            if (item) dispatch(*item);
            auto deadline = next_deadline();
            if (deadline && Clock::now() >= *deadline) on_deadline(Clock::now());
        }
    }

    void dispatch(const Bytes& bytes) {
        Envelope env;
        try {
            env = Envelope::decode(bytes);
        } catch (const Error&) {
            return;
        }
        if (env.to != id_) return;
        const Bytes* key = sender_key(env);
        if (key == nullptr || !crypto::verify(env.signing_bytes(), env.signature, *key)) return;
        try {
            if (env.kind == MessageKind::Sync) {
                handle_sync(env);
            } else {
                handle(env);
            }
        } catch (const Error& e) {
            std::cerr << "[" << to_string(role_) << "] dropped message: " << e.what() << '\n';
        }
    }

    mutable std::shared_mutex chain_mu_;
    ledger::Chain chain_;
    std::mutex inbox_mu_;
    std::condition_variable_any cv_;
    std::deque<Bytes> inbox_;
    std::jthread thread_;
};

namespace {

class PeerNode : public Node {
public:
    using Node::Node;

protected:
    void handle(const Envelope&) override {}
};

class BamNode : public Node {
public:
    using Node::Node;

    void set_fault(BamFault f) { fault_.store(f); }

protected:
    void handle(const Envelope& env) override {
        switch (env.kind) {
            case MessageKind::Submit: on_submit(env); break;
            case MessageKind::RoleValidation: on_validation(env); break;
            case MessageKind::SyncRequest: on_sync_request(env); break;
            default: break;
        }
    }

private:
    void broadcast(const ledger::Block& block) {
        auto body = rid_body(0, {ledger::encode_chain({block})});
        for (const auto& id : dir_->replicas) send(id, MessageKind::Sync, body);
    }

    void on_submit(const Envelope& env) {
        if (env.from != dir_->owner && std::find(dir_->bdms.begin(), dir_->bdms.end(), env.from) == dir_->bdms.end()) {
            return;
        }
        ByteReader r(env.body);
        auto rid = r.u64();
        auto reply_to = crypto::read_actor(r);
        auto tx = ledger::decode_transaction(r.bytes());
        ByteWriter ack;
        ack.u64(rid);
        try {
            auto block = write_chain([&](ledger::Chain& c) { return c.mine_block(tx); });
            broadcast(block);
            ack.boolean(true).u64(block.height).str("");
        } catch (const ledger::TransactionRejected& e) {
            ack.boolean(false).u64(0).str(e.what());
        }
        send(reply_to, MessageKind::SubmitAck, std::move(ack).take());
    }

    void on_validation(const Envelope& env) {
        if (env.from != dir_->acm) return;
        ByteReader r(env.body);
        ValidationResult out;
        out.rid = r.u64();
        auto tx = ledger::decode_transaction(r.bytes());
        if (auto rej = chain().validate_transaction(tx)) {
            out.accepted = false;
            out.reject_code = ledger::to_string(rej->reason);
            out.reject_detail = rej->detail;
            out.expected_nonce = chain().state().next_nonce(tx.sender);
            send(env.from, MessageKind::ValidationResult, out.encode());
            return;
        }
        auto payload = ledger::ValidatePayload::decode(tx.payload);
        auto decision = ledger::decide_validation(chain().state(), payload);
        const auto& sc = chain().state().contract(payload.contract_id).contract;
        auto outcome = contract::finalize_validation(sc, payload.request, std::move(decision), ident_.keys.private_key,
                                                     chain().schedule());
        auto block = write_chain([&](ledger::Chain& c) { return c.mine_block(tx); });
        broadcast(block);

        out.accepted = true;
        out.height = block.height;
        out.gas = outcome.gas.gas_used;
        if (outcome.rights) {
            out.rights = outcome.rights->mask;
            out.signature = outcome.signed_rights;
            switch (fault_.load()) {
                case BamFault::StripRightsSignature: out.signature.reset(); break;
                case BamFault::ForgeRights: out.rights = rbac::Mask(out.rights->size(), true); break;
                case BamFault::None: break;
            }
        } else {
            out.denied_at = static_cast<std::uint32_t>(outcome.denial->semantic);
            out.denial_reason = outcome.denial->reason;
        }
        send(env.from, MessageKind::ValidationResult, out.encode());
    }

    void on_sync_request(const Envelope& env) {
        ByteReader r(env.body);
        r.u64();
        auto from = r.u64();
        const auto& blocks = chain().blocks();
        if (from >= blocks.size()) return;
        std::vector<ledger::Block> missing(blocks.begin() + static_cast<std::ptrdiff_t>(from), blocks.end());
        send(env.from, MessageKind::Sync, rid_body(0, {ledger::encode_chain(missing)}));
    }

    std::atomic<BamFault> fault_{BamFault::None};
};

class AcmNode : public Node {
public:
    using Node::Node;

protected:
    void handle(const Envelope& env) override {
        switch (env.kind) {
            case MessageKind::AccessRequest: on_request(env); break;
            case MessageKind::ValidationResult: on_result(env); break;
            default: break;
        }
    }

    std::optional<Clock::time_point> next_deadline() const override {
        std::optional<Clock::time_point> best;
        for (const auto& [_, p] : pending_) {
            if (!best || p.deadline < *best) best = p.deadline;
        }
        return best;
    }

    void on_deadline(Clock::time_point now) override {
        for (auto it = pending_.begin(); it != pending_.end();) {
            if (it->second.deadline <= now) {
                send_denied(it->second.reply_to,
                            {it->first, Stage::Validation, "ValidationTimeout", "no validation result from the BAM", {}});
                it = pending_.erase(it);
            } else {
                ++it;
            }
        }
    }

private:
    struct Pending {
        ActorId reply_to;
        bool query = true;
        std::optional<rbac::AccessRequest> request;
        Clock::time_point deadline;
        int attempts = 0;
        Clock::time_point sent_at;
    };

    void on_request(const Envelope& env) {
        if (env.from != dir_->csp && env.from != dir_->owner) return;
        ByteReader r(env.body);
        auto rid = r.u64();
        auto reply_to = crypto::read_actor(r);
        bool query = r.boolean();
        auto req_bytes = r.bytes();
        ByteReader rr(req_bytes);
        auto request = rbac::AccessRequest::decode(rr);
        pending_[rid] = Pending{reply_to, query, request, Clock::now() + dir_->timeout, 0, {}};
        submit(rid);
    }

    void submit(std::uint64_t rid) {
        auto& p = pending_.at(rid);
        const auto& state = chain().state();
        if (!state.latest_contract) {
            send_denied(p.reply_to, {rid, Stage::Validation, "UnknownContract", "no contract deployed", {}});
            pending_.erase(rid);
            return;
        }
        if (!nonce_ready_) {
            next_nonce_ = state.next_nonce(id_);
            nonce_ready_ = true;
        }
        const auto* user = state.users.find(p.request->user_id());
        std::set<std::string> roles = user ? user->roles : std::set<std::string>{};
        try {
            auto tx = ledger::make_validate_tx(*state.latest_contract, *p.request, roles, ident_.keys, dir_->bam,
                                               next_nonce_++, chain().schedule());
            ++p.attempts;
            p.sent_at = Clock::now();
            send(dir_->bam, MessageKind::RoleValidation, rid_body(rid, {ledger::canonical_bytes(tx)}));
        } catch (const Error& e) {
            send_denied(p.reply_to, {rid, Stage::Validation, "RequestError", e.what(), {}});
            pending_.erase(rid);
        }
    }

    void on_result(const Envelope& env) {
        if (env.from != dir_->bam) return;
        auto res = ValidationResult::decode(env.body);
        auto it = pending_.find(res.rid);
        if (it == pending_.end()) return;
        auto& p = it->second;

        if (!res.accepted) {
            if (res.reject_code == "BadNonce" && p.attempts < 4) {
                // A dropped transaction leaves a gap; restart from the producer's nonce once per gap.
                if (!reset_for_ || *reset_for_ != res.expected_nonce) {
                    next_nonce_ = res.expected_nonce;
                    reset_for_ = res.expected_nonce;
                }
                submit(res.rid);
                return;
            }
            send_denied(p.reply_to, {res.rid, Stage::Validation, res.reject_code, res.reject_detail, {}});
            pending_.erase(it);
            return;
        }
        if (!res.rights) {
            send_denied(p.reply_to, {res.rid, Stage::Validation, "Denied",
                                     "semantic (" + std::to_string(res.denied_at) + "): " + res.denial_reason,
                                     res.height});
            pending_.erase(it);
            return;
        }
        auto msg = contract::rights_message(p.request->user_id(), *res.rights);
        const Bytes* bam_key = dir_->key_of(dir_->bam);
        if (!res.signature || !crypto::verify(msg, *res.signature, *bam_key)) {
            send_denied(p.reply_to, {res.rid, Stage::Validation, "ValidationUntrusted",
                                     "rights are not signed by the BAM", res.height});
            pending_.erase(it);
            return;
        }
        auto rtt = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - p.sent_at).count();
        Granted g{res.rid, *res.rights, *res.signature, res.height, res.gas, static_cast<std::uint64_t>(rtt)};
        send(p.reply_to, MessageKind::Granted, g.encode());
        if (p.query) {
            const auto& bdm = dir_->bdms[res.rid % dir_->bdms.size()];
            ByteWriter w;
            w.u64(res.rid);
            crypto::write_actor(w, p.reply_to);
            w.bytes(p.request->canonical_bytes());
            rbac::write_mask(w, *res.rights);
            crypto::write_signature(w, *res.signature);
            w.u64(res.height);
            send(bdm, MessageKind::QueryExec, std::move(w).take());
        }
        pending_.erase(it);
    }

    std::map<std::uint64_t, Pending> pending_;
    std::uint64_t next_nonce_ = 1;
    bool nonce_ready_ = false;
    std::optional<std::uint64_t> reset_for_;
};

class BdmNode : public Node {
public:
    using Node::Node;

protected:
    void handle(const Envelope& env) override {
        switch (env.kind) {
            case MessageKind::QueryExec: on_query(env); break;
            case MessageKind::Submit: on_submit(env); break;
            default: break;
        }
    }

private:
    void on_submit(const Envelope& env) {
        if (env.from != dir_->owner) return;
        send(dir_->bam, MessageKind::Submit, env.body);
    }

    void on_query(const Envelope& env) {
        if (env.from != dir_->acm) return;
        ByteReader r(env.body);
        auto rid = r.u64();
        auto reply_to = crypto::read_actor(r);
        auto req_bytes = r.bytes();
        ByteReader rr(req_bytes);
        auto request = rbac::AccessRequest::decode(rr);
        rbac::EffectiveRights rights{rbac::read_mask(r)};
        auto bam_sig = crypto::read_signature(r);
        auto height = r.u64();

        const auto& state = chain().state();
        auto msg = contract::rights_message(request.user_id(), rights.mask);
        if (!crypto::verify(msg, bam_sig, *dir_->key_of(dir_->bam)) || rights.mask.size() != state.catalog.size()) {
            send_denied(reply_to, {rid, Stage::Query, "QueryRefused", "rights are not signed by the BAM", height});
            return;
        }
        auto result = datastore::execute_query(state.records, state.catalog, request, rights, ident_.keys.private_key);
        ByteWriter w;
        w.u64(rid).u64(height);
        crypto::write_actor(w, id_);
        w.bytes(result.encode());
        send(reply_to, MessageKind::QueryResult, std::move(w).take());
    }
};

class CspNode : public Node {
public:
    using Node::Node;

    Bytes issue_challenge() {
        Bytes c(16);
        {
            std::lock_guard lk(challenge_mu_);
            for (auto& b : c) b = static_cast<std::uint8_t>(rng_());
            challenges_.insert(c);
        }
        return c;
    }

protected:
    const Bytes* sender_key(const Envelope& env) const override {
        if (const auto* k = dir_->key_of(env.from)) return k;
        if (env.kind != MessageKind::AccessRequest) return nullptr;
        // End users: registered public key on chain, bound to the envelope sender.
        try {
            ByteReader r(env.body);
            r.u64();
            r.bytes();
            auto req_bytes = r.bytes();
            ByteReader rr(req_bytes);
            auto request = rbac::AccessRequest::decode(rr);
            const auto& keys = chain().state().user_keys;
            auto it = keys.find(request.user_id());
            if (it == keys.end() || crypto::actor_id_of(it->second) != env.from) {
                unauthenticated_.push_back({env.from, peek_rid(env.body)});
                return nullptr;
            }
            return &it->second;
        } catch (const Error&) {
            return nullptr;
        }
    }

    void handle(const Envelope& env) override {
        flush_unauthenticated();
        switch (env.kind) {
            case MessageKind::AccessRequest: on_client_request(env); break;
            case MessageKind::Granted: on_granted(env); break;
            case MessageKind::Denied: on_denied(env); break;
            case MessageKind::QueryResult: on_result(env); break;
            default: break;
        }
    }

    std::optional<Clock::time_point> next_deadline() const override {
        if (!unauthenticated_.empty()) return Clock::now();
        std::optional<Clock::time_point> best;
        for (const auto& [_, p] : pending_) {
            if (!best || p.deadline < *best) best = p.deadline;
        }
        return best;
    }

    void on_deadline(Clock::time_point now) override {
        flush_unauthenticated();
        for (auto it = pending_.begin(); it != pending_.end();) {
            if (it->second.deadline <= now) {
                auto stage = it->second.stage;
                send_denied(it->second.client, {it->first, stage,
                                                stage == Stage::Query ? "QueryTimeout" : "ValidationTimeout",
                                                "no answer before the deadline", it->second.height});
                it = pending_.erase(it);
            } else {
                ++it;
            }
        }
    }

private:
    struct Pending {
        ActorId client;
        Stage stage = Stage::Validation;
        Clock::time_point deadline;
        std::optional<std::uint64_t> height;
    };

    void flush_unauthenticated() {
        for (const auto& [client, rid] : unauthenticated_) {
            send_denied(client, {rid, Stage::Authentication, "Unauthenticated", "unknown user key or bad signature", {}});
        }
        unauthenticated_.clear();
    }

    bool take_challenge(const Bytes& c) {
        std::lock_guard lk(challenge_mu_);
        return challenges_.erase(c) == 1;
    }

    void on_client_request(const Envelope& env) {
        ByteReader r(env.body);
        auto rid = r.u64();
        auto challenge = r.bytes();
        auto req_bytes = r.bytes();
        if (!take_challenge(challenge)) {
            send_denied(env.from, {rid, Stage::Authentication, "Unauthenticated", "unknown or reused challenge", {}});
            return;
        }
        pending_[rid] = Pending{env.from, Stage::Validation, Clock::now() + 2 * dir_->timeout, {}};
        ByteWriter w;
        w.u64(rid);
        crypto::write_actor(w, id_);
        w.boolean(true).bytes(req_bytes);
        send(dir_->acm, MessageKind::AccessRequest, std::move(w).take());
    }

    void on_granted(const Envelope& env) {
        if (env.from != dir_->acm) return;
        auto g = Granted::decode(env.body);
        auto it = pending_.find(g.rid);
        if (it == pending_.end()) return;
        it->second.stage = Stage::Query;
        it->second.height = g.height;
    }

    void on_denied(const Envelope& env) {
        auto d = Denied::decode(env.body);
        auto it = pending_.find(d.rid);
        if (it == pending_.end()) return;
        if (!d.height) d.height = it->second.height;
        send_denied(it->second.client, d);
        pending_.erase(it);
    }

    void on_result(const Envelope& env) {
        if (std::find(dir_->bdms.begin(), dir_->bdms.end(), env.from) == dir_->bdms.end()) return;
        auto rid = peek_rid(env.body);
        auto it = pending_.find(rid);
        if (it == pending_.end()) return;
        send(it->second.client, MessageKind::QueryResult, env.body);
        pending_.erase(it);
    }

    std::map<std::uint64_t, Pending> pending_;
    mutable std::vector<std::pair<ActorId, std::uint64_t>> unauthenticated_;
    std::mutex challenge_mu_;
    std::set<Bytes> challenges_;
    std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace

// --- client port --------------------------------------------------------------

class Deployment::ClientPort : public Endpoint {
public:
    explicit ClientPort(std::shared_ptr<const Directory> dir) : dir_(std::move(dir)) {}

    std::future<Envelope> expect(std::uint64_t rid) {
        std::lock_guard lk(mu_);
        return waiting_[rid].get_future();
    }

    void cancel(std::uint64_t rid) {
        std::lock_guard lk(mu_);
        waiting_.erase(rid);
    }

    void deliver(Bytes bytes) override {
        Envelope env;
        try {
            env = Envelope::decode(bytes);
        } catch (const Error&) {
            return;
        }
        const Bytes* key = dir_->key_of(env.from);
        if (key == nullptr || !crypto::verify(env.signing_bytes(), env.signature, *key)) return;
        std::uint64_t rid = 0;
        try {
            rid = peek_rid(env.body);
        } catch (const Error&) {
            return;
        }
        std::lock_guard lk(mu_);
        auto it = waiting_.find(rid);
        if (it == waiting_.end()) return;
        it->second.set_value(std::move(env));
        waiting_.erase(it);
    }

private:
    std::shared_ptr<const Directory> dir_;
    std::mutex mu_;
    std::map<std::uint64_t, std::promise<Envelope>> waiting_;
};

// --- deployment ---------------------------------------------------------------

Deployment::Deployment(DeploymentConfig config, Identities ids, rbac::AttributeCatalog catalog,
                       std::uint64_t genesis_timestamp_ms)
    : config_(config), ids_(std::move(ids)) {
    auto genesis = ledger::Chain::create(ids_.owner.keys, ids_.acm.keys.public_key, ids_.bam.keys.public_key,
                                         ids_.bdms.at(0).keys.public_key, std::move(catalog), genesis_timestamp_ms,
                                         config_.schedule);
    start(genesis);
}

Deployment::Deployment(DeploymentConfig config, Identities ids, const ledger::Chain& chain)
    : config_(config), ids_(std::move(ids)) {
    const auto& a = chain.state().authorities;
    if (a.owner != ids_.owner.id() || a.acm != ids_.acm.id() || a.bam != ids_.bam.id() || a.bdm != ids_.bdms.at(0).id()) {
        throw Error("chain authorities do not match the deployment identities");
    }
    start(chain);
}

void Deployment::start(const ledger::Chain& chain) {
    if (ids_.bdms.empty()) throw Error("a deployment needs at least one BDM");
    auto dir = std::make_shared<Directory>();
    auto add = [&](const Identity& i) { dir->keys[i.id()] = i.keys.public_key; };
    add(ids_.owner);
    add(ids_.csp);
    add(ids_.acm);
    add(ids_.bam);
    for (const auto& b : ids_.bdms) add(b);
    dir->owner = ids_.owner.id();
    dir->csp = ids_.csp.id();
    dir->acm = ids_.acm.id();
    dir->bam = ids_.bam.id();
    for (const auto& b : ids_.bdms) dir->bdms.push_back(b.id());
    dir->timeout = config_.timeout;
    dir->schedule = config_.schedule;

    std::vector<Identity> peers;
    for (std::size_t i = 0; i < config_.peers; ++i) {
        peers.push_back({"peer" + std::to_string(i), crypto::key_gen()});
        add(peers.back());
    }
    dir->replicas.push_back(dir->csp);
    dir->replicas.push_back(dir->acm);
    for (const auto& b : dir->bdms) dir->replicas.push_back(b);
    for (const auto& p : peers) dir->replicas.push_back(p.id());
    dir_ = dir;

    network_ = std::make_unique<Network>(config_.latency, config_.seed);
    nodes_.push_back(std::make_unique<CspNode>(NodeRole::CSP, ids_.csp, *network_, dir_));
    nodes_.push_back(std::make_unique<AcmNode>(NodeRole::ACM, ids_.acm, *network_, dir_));
    nodes_.push_back(std::make_unique<BamNode>(NodeRole::BAM, ids_.bam, *network_, dir_));
    for (const auto& b : ids_.bdms) nodes_.push_back(std::make_unique<BdmNode>(NodeRole::BDM, b, *network_, dir_));
    for (const auto& p : peers) nodes_.push_back(std::make_unique<PeerNode>(NodeRole::PEER, p, *network_, dir_));

    clients_ = std::make_unique<ClientPort>(dir_);
    network_->attach(ids_.owner.id(), clients_.get());
    for (auto& n : nodes_) {
        n->init_chain(chain);
        network_->attach(n->id(), n.get());
    }
    for (auto& n : nodes_) n->start();
}

Deployment::~Deployment() {
    network_->shutdown();
    for (auto& n : nodes_) n->stop();
}

Node& Deployment::node(NodeRole role, std::size_t index) const {
    std::size_t seen = 0;
    for (const auto& n : nodes_) {
        if (n->role() == role && seen++ == index) return *n;
    }
    throw Error("no " + to_string(role) + " node #" + std::to_string(index));
}

ActorId Deployment::node_id(NodeRole role, std::size_t index) const { return node(role, index).id(); }

SubmitResult Deployment::await_submit(std::uint64_t rid, std::future<Envelope> fut) {
    if (fut.wait_for(2 * config_.timeout) != std::future_status::ready) {
        clients_->cancel(rid);
        return {false, "SubmitTimeout", 0};
    }
    auto env = fut.get();
    ByteReader r(env.body);
    r.u64();
    SubmitResult out;
    out.ok = r.boolean();
    out.height = r.u64();
    out.reason = r.str();
    return out;
}

SubmitResult Deployment::submit(const ledger::Transaction& tx, NodeRole via) {
    auto rid = next_request_id();
    auto fut = clients_->expect(rid);
    ByteWriter w;
    w.u64(rid);
    crypto::write_actor(w, ids_.owner.id());
    w.bytes(ledger::canonical_bytes(tx));
    network_->send(seal(node_id(via), MessageKind::Submit, std::move(w).take(), ids_.owner.keys));
    return await_submit(rid, std::move(fut));
}

SubmitResult Deployment::deploy_contract(const rbac::RbacModel& model, std::uint32_t version) {
    std::lock_guard lk(owner_mu_);
    auto sc = contract::compile_contract(model, ids_.owner.id(), version);
    auto nonce = node(NodeRole::BAM).snapshot().state().next_nonce(ids_.owner.id());
    // Owner transactions enter through the BDM, which relays them to the producer.
    auto res = submit(ledger::make_deploy_tx(sc, ids_.owner.keys, ids_.bam.id(), nonce, config_.schedule), NodeRole::BDM);
    if (res.ok) wait_synced(2 * config_.timeout);
    return res;
}

SubmitResult Deployment::register_user(const rbac::RegisteredUser& user, const Bytes& user_public_key) {
    std::lock_guard lk(owner_mu_);
    auto nonce = node(NodeRole::BAM).snapshot().state().next_nonce(ids_.owner.id());
    auto tx = ledger::make_register_tx(user, user_public_key, ids_.owner.keys, ids_.bdms[0].id(), nonce, config_.schedule);
    auto res = submit(tx, NodeRole::BDM);
    if (res.ok) wait_synced(2 * config_.timeout);
    return res;
}

std::vector<SubmitResult> Deployment::ingest(const std::vector<datastore::DataRecord>& records) {
    std::lock_guard lk(owner_mu_);
    auto nonce = node(NodeRole::BAM).snapshot().state().next_nonce(ids_.owner.id());
    std::vector<std::pair<std::uint64_t, std::future<Envelope>>> inflight;
    for (const auto& rec : records) {
        auto tx = ledger::make_record_tx(rec, ids_.owner.keys, ids_.bdms[0].id(), nonce++, config_.schedule);
        auto rid = next_request_id();
        auto fut = clients_->expect(rid);
        ByteWriter w;
        w.u64(rid);
        crypto::write_actor(w, ids_.owner.id());
        w.bytes(ledger::canonical_bytes(tx));
        network_->send(seal(node_id(NodeRole::BDM), MessageKind::Submit, std::move(w).take(), ids_.owner.keys));
        inflight.emplace_back(rid, std::move(fut));
    }
    std::vector<SubmitResult> out;
    for (auto& [rid, fut] : inflight) out.push_back(await_submit(rid, std::move(fut)));
    wait_synced(2 * config_.timeout);
    return out;
}

namespace {

RequestOutcome outcome_from(const Envelope& env, const Directory& dir) {
    RequestOutcome out;
    out.responded_at_ms = ledger::wall_clock_ms();
    if (env.kind == MessageKind::Denied) {
        auto d = Denied::decode(env.body);
        out.stage = d.stage;
        out.code = d.code;
        out.reason = d.reason;
        out.validation_height = d.height;
        return out;
    }
    if (env.kind != MessageKind::QueryResult) {
        out.stage = Stage::Query;
        out.code = "UnexpectedReply";
        return out;
    }
    ByteReader r(env.body);
    r.u64();
    out.validation_height = r.u64();
    out.bdm = crypto::read_actor(r);
    auto result = datastore::QueryResult::decode(r.bytes());
    const Bytes* bdm_key = dir.key_of(out.bdm);
    if (bdm_key == nullptr || std::find(dir.bdms.begin(), dir.bdms.end(), out.bdm) == dir.bdms.end() ||
        !datastore::verify_result(result, *bdm_key)) {
        out.stage = Stage::Query;
        out.code = "ResultUntrusted";
        out.reason = "query result signature does not verify";
        return out;
    }
    out.ok = true;
    out.stage = Stage::Done;
    out.result = std::move(result);
    return out;
}

}  // namespace

std::vector<RequestOutcome> Deployment::request_batch(
    const std::vector<std::pair<crypto::KeyPair, rbac::AccessRequest>>& requests) {
    auto& csp = static_cast<CspNode&>(node(NodeRole::CSP));
    std::vector<std::pair<std::uint64_t, std::future<Envelope>>> inflight;
    for (const auto& [key, request] : requests) {
        auto user_id = crypto::actor_id_of(key.public_key);
        network_->attach(user_id, clients_.get());
        auto rid = next_request_id();
        auto fut = clients_->expect(rid);
        auto challenge = csp.issue_challenge();
        auto body = rid_body(rid, {challenge, request.canonical_bytes()});
        network_->send(seal(csp.id(), MessageKind::AccessRequest, std::move(body), key));
        inflight.emplace_back(rid, std::move(fut));
    }
    std::vector<RequestOutcome> out;
    auto deadline = Clock::now() + 2 * config_.timeout + Millis(5000);
    for (auto& [rid, fut] : inflight) {
        if (fut.wait_until(deadline) != std::future_status::ready) {
            clients_->cancel(rid);
            RequestOutcome o;
            o.code = "ClientTimeout";
            o.reason = "no reply from the CSP";
            out.push_back(std::move(o));
            continue;
        }
        out.push_back(outcome_from(fut.get(), *dir_));
    }
    return out;
}

RequestOutcome Deployment::request(const crypto::KeyPair& user_key, const rbac::AccessRequest& request) {
    return request_batch({{user_key, request}}).front();
}

RoleValidationReply Deployment::validate_role(const rbac::AccessRequest& request) {
    auto rid = next_request_id();
    auto fut = clients_->expect(rid);
    ByteWriter w;
    w.u64(rid);
    crypto::write_actor(w, ids_.owner.id());
    w.boolean(false).bytes(request.canonical_bytes());
    network_->send(seal(ids_.acm.id(), MessageKind::AccessRequest, std::move(w).take(), ids_.owner.keys));

    RoleValidationReply out;
    if (fut.wait_for(2 * config_.timeout) != std::future_status::ready) {
        clients_->cancel(rid);
        out.code = "ValidationTimeout";
        return out;
    }
    auto env = fut.get();
    if (env.kind == MessageKind::Granted) {
        auto g = Granted::decode(env.body);
        out.ok = true;
        out.rights = rbac::EffectiveRights{g.mask};
        out.bam_signature = g.bam_signature;
        out.height = g.height;
        out.gas_used = g.gas;
        out.round_trip_us = g.round_trip_us;
    } else if (env.kind == MessageKind::Denied) {
        auto d = Denied::decode(env.body);
        out.code = d.code;
        out.reason = d.reason;
        out.height = d.height;
        auto open = d.reason.find("semantic (");
        if (d.code == "Denied" && open != std::string::npos) {
            out.denied_at = static_cast<rbac::Semantic>(d.reason[open + 10] - '0');
        }
    }
    return out;
}

void Deployment::set_online(NodeRole role, bool online, std::size_t index) {
    auto& n = node(role, index);
    network_->set_online(n.id(), online);
    if (online && role != NodeRole::BAM) n.request_resync();
}

void Deployment::inject_bam_fault(BamFault fault) { static_cast<BamNode&>(node(NodeRole::BAM)).set_fault(fault); }

bool Deployment::wait_synced(Millis timeout) {
    auto deadline = Clock::now() + timeout;
    const auto& bam = node(NodeRole::BAM);
    while (Clock::now() < deadline) {
        auto tip = bam.tip();
        bool all = std::all_of(nodes_.begin(), nodes_.end(), [&](const auto& n) {
            return !network_->online(n->id()) || n->tip() == tip;
        });
        if (all) return true;
        std::this_thread::sleep_for(Millis(1));
    }
    return false;
}

ledger::Chain Deployment::chain_snapshot(NodeRole role, std::size_t index) const { return node(role, index).snapshot(); }

std::vector<Digest> Deployment::tip_hashes() const {
    std::vector<Digest> out;
    for (const auto& n : nodes_) out.push_back(n->tip());
    return out;
}

std::optional<contract::ContractId> Deployment::current_contract() const {
    return node(NodeRole::BAM).latest_contract();
}

}  // namespace rbacchain::fabric
