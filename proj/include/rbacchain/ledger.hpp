#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rbacchain/contract.hpp"
#include "rbacchain/crypto.hpp"
#include "rbacchain/datastore.hpp"
#include "rbacchain/rbac.hpp"

namespace rbacchain::ledger {

using crypto::ActorId;
using contract::ContractId;

enum class TxKind : std::uint8_t {
    Genesis = 0,
    DeployContract = 1,  // Tx_SC
    RegisterUser = 2,    // Tx_UR
    ValidateRole = 3,    // Tx_V
    Record = 4,
};

std::string to_string(TxKind kind);

struct Transaction {
    TxKind kind = TxKind::Genesis;
    ActorId sender;
    ActorId recipient;
    std::uint64_t cost = 0;
    std::uint64_t nonce = 0;
    Bytes payload;
    crypto::Signature signature;

    /// Every field except the signature; this is what gets signed.
    Bytes signing_bytes() const;
    bool operator==(const Transaction&) const = default;
};

/// Field-ordered, length-prefixed encoding including the signature.
Bytes canonical_bytes(const Transaction& tx);
Transaction decode_transaction(ByteView bytes);
void write_transaction(ByteWriter& w, const Transaction& tx);
Transaction read_transaction(ByteReader& r);

/// Fills in the signature over signing_bytes().
Transaction sign_transaction(Transaction tx, ByteView private_key);

// --- payloads -------------------------------------------------------------

/// Public keys of the fixed actors plus the deployment's attribute catalog.
struct GenesisPayload {
    Bytes owner_key;
    Bytes acm_key;
    Bytes bam_key;
    Bytes bdm_key;
    rbac::AttributeCatalog catalog;

    Bytes encode() const;
    static GenesisPayload decode(ByteView bytes);
};

/// Sign(SC, PR_DO).
struct DeployPayload {
    contract::SmartContract contract;
    crypto::Signature owner_signature;

    Bytes encode() const;
    static DeployPayload decode(ByteView bytes);
};

/// Sign(U_pro, PR_DO) with U_pro = {p, R'_p}; also carries the user's type
/// and public key so the CSP can authenticate them.
struct RegisterPayload {
    rbac::RegisteredUser user;
    Bytes user_public_key;
    crypto::Signature owner_signature;

    Bytes profile_bytes() const;
    Bytes encode() const;
    static RegisterPayload decode(ByteView bytes);
};

/// ID_SC plus Sign(p.role, PR_ACM); the request is carried so the contract
/// can evaluate the attribute semantic.
struct ValidatePayload {
    ContractId contract_id;
    rbac::AccessRequest request;
    std::set<std::string> roles;
    crypto::Signature role_signature;

    Bytes role_bytes() const;
    Bytes encode() const;
    static ValidatePayload decode(ByteView bytes);
};

Bytes role_message(const std::string& user_id, const std::set<std::string>& roles);

// --- blocks ---------------------------------------------------------------

struct Block {
    std::uint64_t height = 0;
    Digest prev_hash{};
    Digest tx_root{};
    std::uint64_t timestamp_ms = 0;
    ActorId producer;
    std::vector<Transaction> transactions;
    Digest block_hash{};

    /// H(height || prev_hash || tx_root || timestamp || producer)
    Digest compute_hash() const;
    Bytes encode() const;
    static Block decode(ByteView bytes);
    bool operator==(const Block&) const = default;
};

/// Merkle root over transaction digests; a single transaction's root is the
/// digest of its canonical bytes.
Digest compute_tx_root(const std::vector<Transaction>& txs);

// --- state ----------------------------------------------------------------

struct Authorities {
    Bytes owner_key, acm_key, bam_key, bdm_key;
    ActorId owner, acm, bam, bdm;
};

struct DeployedContract {
    contract::SmartContract contract;
    std::uint64_t height;
};

struct ValidationRecord {
    std::uint64_t height = 0;
    std::string user_id;
    ContractId contract_id;
    std::optional<rbac::Mask> rights;
    std::optional<rbac::Semantic> denied_at;
    std::uint64_t gas_used = 0;
};

struct ChainState {
    Authorities authorities;
    rbac::AttributeCatalog catalog;
    std::map<ActorId, std::uint64_t> nonces;
    std::map<ContractId, DeployedContract> contracts;
    std::optional<ContractId> latest_contract;
    rbac::UserDirectory users;
    std::map<std::string, Bytes> user_keys;
    datastore::DataIndex records;
    std::vector<ValidationRecord> validations;

    /// Throws ContractNotFound.
    const DeployedContract& contract(const ContractId& id) const;
    std::uint64_t next_nonce(const ActorId& sender) const;
    /// Digest over every derived index, for recompute-and-compare checks.
    Digest digest() const;
};

/// Role validation as the contract runs it on chain: the claimed roles must
/// equal the registered ones, then the accessibility semantics apply to the
/// on-chain user record. The contract must be deployed.
rbac::AccessDecision decide_validation(const ChainState& state, const ValidatePayload& payload);

enum class RejectReason {
    BadSignature,
    UnauthorizedSender,
    BadNonce,
    UnknownContract,
    MalformedPayload,
    SchemaError,
};

std::string to_string(RejectReason r);

struct Rejection {
    RejectReason reason;
    std::string detail;
};

class TransactionRejected : public Error {
public:
    explicit TransactionRejected(Rejection r)
        : Error(to_string(r.reason) + ": " + r.detail), rejection_(std::move(r)) {}
    const Rejection& rejection() const { return rejection_; }

private:
    Rejection rejection_;
};

class SyncRefused : public Error {
public:
    using Error::Error;
};

struct VerifyResult {
    std::optional<std::uint64_t> first_bad_height;
    std::string reason;

    bool ok() const { return !first_bad_height.has_value(); }
};

using Clock = std::function<std::uint64_t()>;
std::uint64_t wall_clock_ms();

/// Append-only chain with state derived as a fold over its blocks. A single
/// producer (the BAM) mines one block per accepted transaction.
class Chain {
public:
    /// Empty chain with no genesis; used as a replication target.
    explicit Chain(contract::GasSchedule schedule = contract::GasSchedule::proposed());

    /// New chain whose genesis transaction is signed by the data owner.
    static Chain create(const crypto::KeyPair& owner, const Bytes& acm_key, const Bytes& bam_key,
                        const Bytes& bdm_key, rbac::AttributeCatalog catalog, std::uint64_t genesis_timestamp_ms,
                        contract::GasSchedule schedule = contract::GasSchedule::proposed());

    /// Validating load; throws TransactionRejected/DecodeError-derived Error on the first bad block.
    static Chain from_blocks(const std::vector<Block>& blocks,
                             contract::GasSchedule schedule = contract::GasSchedule::proposed());

    /// Holds blocks without checking them (e.g. storage read back from disk).
    /// State stays empty until verified; such a chain is refused as a sync source
    /// if verification fails.
    static Chain adopt_unverified(std::vector<Block> blocks,
                                  contract::GasSchedule schedule = contract::GasSchedule::proposed());

    const std::vector<Block>& blocks() const { return blocks_; }
    bool empty() const { return blocks_.empty(); }
    std::uint64_t height() const { return blocks_.empty() ? 0 : blocks_.back().height; }
    Digest tip_hash() const;
    const ChainState& state() const { return state_; }
    const contract::GasSchedule& schedule() const { return schedule_; }
    bool verified() const { return verified_; }

    void set_clock(Clock clock) { clock_ = std::move(clock); }

    std::optional<Rejection> validate_transaction(const Transaction& tx) const;

    /// Validates then appends a single-transaction block produced by the BAM.
    /// Throws TransactionRejected.
    const Block& mine_block(const Transaction& tx, std::optional<std::uint64_t> timestamp_ms = std::nullopt);

    /// Checks a block produced elsewhere and appends it. Throws on any violation.
    void apply_block(const Block& block);

private:
    std::optional<Rejection> check_payload(const Transaction& tx) const;
    void apply_transaction(const Transaction& tx, std::uint64_t height);
    void check_header(const Block& block) const;

    contract::GasSchedule schedule_;
    std::vector<Block> blocks_;
    ChainState state_;
    Clock clock_ = wall_clock_ms;
    bool verified_ = true;
};

/// Recomputes every hash link, tx root and signature from scratch.
VerifyResult verify_chain(const Chain& chain);
VerifyResult verify_chain(const std::vector<Block>& blocks,
                          const contract::GasSchedule& schedule = contract::GasSchedule::proposed());

/// Brings `target` up to `source`; longest valid chain wins on divergence.
/// Throws SyncRefused if `source` does not verify.
Chain& replicate(const Chain& source, Chain& target);

// --- persistence ----------------------------------------------------------

/// Frames: u32 big-endian length followed by the block encoding.
Bytes encode_chain(const std::vector<Block>& blocks);

struct DecodedChain {
    std::vector<Block> blocks;
    /// Height at which framing or block decoding failed, if any.
    std::optional<std::uint64_t> failed_at;
    std::string error;
};

DecodedChain decode_chain(ByteView bytes);
/// Decodes and verifies raw chain bytes; decoding failures report the
/// height of the frame that failed.
VerifyResult verify_chain_bytes(ByteView bytes,
                                const contract::GasSchedule& schedule = contract::GasSchedule::proposed());

void save_chain(const std::filesystem::path& path, const Chain& chain);
void append_block(const std::filesystem::path& path, const Block& block);
Bytes read_file(const std::filesystem::path& path);
/// Validating load.
Chain load_chain(const std::filesystem::path& path,
                 const contract::GasSchedule& schedule = contract::GasSchedule::proposed());

// --- replay ---------------------------------------------------------------

struct LogEntry {
    std::uint64_t timestamp_ms;
    Transaction tx;
};

/// Every non-genesis transaction with the timestamp of the block it landed in.
std::vector<LogEntry> transaction_log(const Chain& chain);

/// Mines `log` on a fresh chain that starts from `genesis`.
Chain replay(const Block& genesis, const std::vector<LogEntry>& log,
             const contract::GasSchedule& schedule = contract::GasSchedule::proposed());

/// JSON export of the full chain (headers, transactions, decoded payloads).
std::string export_json(const Chain& chain);

// --- transaction builders ---------------------------------------------------

Transaction make_deploy_tx(const contract::SmartContract& sc, const crypto::KeyPair& owner, const ActorId& bam,
                           std::uint64_t nonce, const contract::GasSchedule& schedule);
Transaction make_register_tx(const rbac::RegisteredUser& user, const Bytes& user_public_key,
                             const crypto::KeyPair& owner, const ActorId& bdm, std::uint64_t nonce,
                             const contract::GasSchedule& schedule);
Transaction make_validate_tx(const ContractId& contract_id, const rbac::AccessRequest& request,
                             const std::set<std::string>& roles, const crypto::KeyPair& acm, const ActorId& bam,
                             std::uint64_t nonce, const contract::GasSchedule& schedule);
Transaction make_record_tx(const datastore::DataRecord& record, const crypto::KeyPair& owner, const ActorId& bdm,
                           std::uint64_t nonce, const contract::GasSchedule& schedule);

/// Worst-case gas a role validation of `request` can consume.
std::uint64_t validation_gas_limit(const rbac::AccessRequest& request, const contract::GasSchedule& schedule);
std::uint64_t payload_cost(std::size_t payload_bytes, const contract::GasSchedule& schedule);

}  // namespace rbacchain::ledger
