#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "rbacchain/contract.hpp"
#include "rbacchain/crypto.hpp"
#include "rbacchain/datastore.hpp"
#include "rbacchain/ledger.hpp"
#include "rbacchain/rbac.hpp"

namespace rbacchain::fabric {

using crypto::ActorId;
using Millis = std::chrono::milliseconds;

enum class NodeRole { CSP, ACM, BAM, BDM, PEER };
std::string to_string(NodeRole role);

enum class MessageKind : std::uint8_t {
    AccessRequest = 0,
    RoleValidation = 1,
    ValidationResult = 2,
    QueryExec = 3,
    QueryResult = 4,
    Sync = 5,
    SyncRequest = 6,
    Submit = 7,
    SubmitAck = 8,
    Granted = 9,
    Denied = 10,
};

/// Signed unit of transport. Receivers drop anything whose signature does not
/// verify under the sender's known key.
struct Envelope {
    ActorId from;
    ActorId to;
    MessageKind kind = MessageKind::AccessRequest;
    Bytes body;
    crypto::Signature signature;

    Bytes signing_bytes() const;
    Bytes encode() const;
    static Envelope decode(ByteView bytes);
};

Envelope seal(ActorId to, MessageKind kind, Bytes body, const crypto::KeyPair& key);

struct LatencyModel {
    double min_ms = 0;
    double max_ms = 0;

    static LatencyModel fixed(double ms) { return {ms, ms}; }
    static LatencyModel uniform(double lo, double hi) { return {lo, hi}; }
    bool zero() const { return max_ms <= 0; }
};

/// Stage at which a request was answered or refused.
enum class Stage { Authentication, Validation, Query, Done };
std::string to_string(Stage s);

struct RequestOutcome {
    bool ok = false;
    Stage stage = Stage::Authentication;
    /// Error code such as Unauthenticated, Denied, ValidationTimeout,
    /// ValidationUntrusted, QueryRefused, QueryTimeout; empty on success.
    std::string code;
    std::string reason;
    std::optional<datastore::QueryResult> result;
    /// Signer of `result`, one of the BDMs.
    ActorId bdm;
    /// Height of the role-validation block.
    std::optional<std::uint64_t> validation_height;
    std::uint64_t responded_at_ms = 0;
};

struct RoleValidationReply {
    bool ok = false;
    std::string code;
    std::string reason;
    std::optional<rbac::EffectiveRights> rights;
    std::optional<crypto::Signature> bam_signature;
    std::optional<rbac::Semantic> denied_at;
    std::optional<std::uint64_t> height;
    std::uint64_t gas_used = 0;
    /// ACM-side time from sending Tx_V to holding a verified result.
    std::uint64_t round_trip_us = 0;
};

struct SubmitResult {
    bool ok = false;
    std::string reason;
    std::uint64_t height = 0;
};

class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual void deliver(Bytes envelope) = 0;
};

/// In-process message bus with a per-link FIFO latency model. Envelopes move
/// as serialized bytes.
class Network {
public:
    using Tamper = std::function<void(const ActorId& from, const ActorId& to, Bytes& envelope)>;

    Network(LatencyModel latency, std::uint64_t seed);
    ~Network();
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    void attach(const ActorId& id, Endpoint* endpoint);
    void detach(const ActorId& id);
    void set_online(const ActorId& id, bool online);
    bool online(const ActorId& id) const;
    void set_tamper(Tamper tamper);

    void send(const Envelope& env);
    /// Stops delivery; later sends are discarded.
    void shutdown();

private:
    struct Pending {
        std::chrono::steady_clock::time_point at;
        std::uint64_t seq;
        ActorId to;
        Bytes bytes;
        bool operator>(const Pending& o) const { return at != o.at ? at > o.at : seq > o.seq; }
    };

    void deliver_now(const ActorId& to, Bytes bytes);
    void run_scheduler(std::stop_token st);

    LatencyModel latency_;
    mutable std::mutex mu_;
    std::condition_variable_any cv_;
    std::map<ActorId, Endpoint*> endpoints_;
    std::map<ActorId, bool> online_;
    std::map<std::pair<ActorId, ActorId>, std::chrono::steady_clock::time_point> link_tail_;
    std::vector<Pending> queue_;
    std::uint64_t seq_ = 0;
    std::mt19937_64 rng_;
    Tamper tamper_;
    bool closed_ = false;
    std::jthread scheduler_;
};

struct Identity {
    std::string name;
    crypto::KeyPair keys;
    ActorId id() const { return crypto::actor_id_of(keys.public_key); }
};

/// Keys of the fixed actors; BDMs beyond the first serve queries only.
struct Identities {
    Identity owner, csp, acm, bam;
    std::vector<Identity> bdms;

    static Identities generate(std::size_t bdm_count = 1);
};

class Node;
struct Directory;

struct DeploymentConfig {
    std::size_t peers = 0;
    LatencyModel latency;
    Millis timeout{30000};
    std::uint64_t seed = 1;
    contract::GasSchedule schedule = contract::GasSchedule::proposed();
};

enum class BamFault { None, StripRightsSignature, ForgeRights };

/// A full deployment: CSP, ACM, BAM, BDM(s) and replica peers, each an actor
/// with its own thread and ledger replica. The BAM is the single block producer.
class Deployment {
public:
    /// Fresh chain: genesis signed by the owner with `catalog`.
    Deployment(DeploymentConfig config, Identities ids, rbac::AttributeCatalog catalog,
               std::uint64_t genesis_timestamp_ms = 0);
    /// Resume from an existing chain, replicated to every node.
    Deployment(DeploymentConfig config, Identities ids, const ledger::Chain& chain);
    ~Deployment();
    Deployment(const Deployment&) = delete;
    Deployment& operator=(const Deployment&) = delete;

    const Identities& identities() const { return ids_; }
    const DeploymentConfig& config() const { return config_; }

    // data owner
    SubmitResult deploy_contract(const rbac::RbacModel& model, std::uint32_t version = 1);
    SubmitResult register_user(const rbac::RegisteredUser& user, const Bytes& user_public_key);
    std::vector<SubmitResult> ingest(const std::vector<datastore::DataRecord>& records);
    /// Sends an arbitrary owner-side transaction (used to probe authorization).
    SubmitResult submit(const ledger::Transaction& tx, NodeRole via);

    // end users
    /// CSP entry point: challenge-authenticated request through the full pipeline.
    RequestOutcome request(const crypto::KeyPair& user_key, const rbac::AccessRequest& request);
    std::vector<RequestOutcome> request_batch(
        const std::vector<std::pair<crypto::KeyPair, rbac::AccessRequest>>& requests);
    /// ACM-only role validation, no query.
    RoleValidationReply validate_role(const rbac::AccessRequest& request);

    // fault injection
    void set_online(NodeRole role, bool online, std::size_t index = 0);
    void set_tamper(Network::Tamper tamper) { network_->set_tamper(std::move(tamper)); }
    void inject_bam_fault(BamFault fault);

    // inspection
    /// Waits until every online node holds the BAM's tip.
    bool wait_synced(Millis timeout = Millis(30000));
    ledger::Chain chain_snapshot(NodeRole role = NodeRole::BAM, std::size_t index = 0) const;
    std::vector<Digest> tip_hashes() const;
    std::optional<contract::ContractId> current_contract() const;
    ActorId node_id(NodeRole role, std::size_t index = 0) const;
    std::size_t node_count() const { return nodes_.size(); }

private:
    class ClientPort;

    void start(const ledger::Chain& chain);
    Node& node(NodeRole role, std::size_t index = 0) const;
    std::uint64_t next_request_id() { return ++request_counter_; }
    SubmitResult await_submit(std::uint64_t request_id, std::future<Envelope> fut);

    DeploymentConfig config_;
    Identities ids_;
    std::shared_ptr<const Directory> dir_;
    std::unique_ptr<Network> network_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::unique_ptr<ClientPort> clients_;
    std::atomic<std::uint64_t> request_counter_{0};
    std::mutex owner_mu_;
};

}  // namespace rbacchain::fabric
