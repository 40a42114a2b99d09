#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rbacchain/crypto.hpp"
#include "rbacchain/rbac.hpp"

namespace rbacchain::contract {

using ContractId = crypto::ActorId;

inline const std::vector<std::string>& contract_operations() {
    static const std::vector<std::string> ops{"get_rights", "list_roles", "validate_role"};
    return ops;
}

/// Unit costs for deployment and execution. Deployment:
///   g_base + g_role * roles + g_right * rights + g_byte * rule_bytes
/// Validation:
///   v_base + v_check * semantics_evaluated + v_attr * request_params
/// Registration and record transactions:
///   tx_base + tx_byte * payload_bytes
struct GasSchedule {
    std::uint64_t g_base = 0;
    std::uint64_t g_role = 0;
    std::uint64_t g_right = 0;
    std::uint64_t g_byte = 0;
    std::uint64_t v_base = 0;
    std::uint64_t v_check = 0;
    std::uint64_t v_attr = 0;
    std::uint64_t tx_base = 0;
    std::uint64_t tx_byte = 0;

    bool operator==(const GasSchedule&) const = default;

    static GasSchedule proposed();
    static GasSchedule baseline();
};

struct GasConfig {
    GasSchedule proposed = GasSchedule::proposed();
    GasSchedule baseline = GasSchedule::baseline();
};

GasConfig load_gas_config(const std::filesystem::path& path);
void save_gas_config(const std::filesystem::path& path, const GasConfig& config);

class SmartContract {
public:
    SmartContract(rbac::RbacModel rules, crypto::ActorId owner, std::uint32_t version);

    const ContractId& id() const { return id_; }
    const std::vector<std::string>& operations() const { return contract_operations(); }
    const rbac::RbacModel& rules() const { return rules_; }
    const crypto::ActorId& owner() const { return owner_; }
    std::uint32_t version() const { return version_; }

    /// Bytes the id is derived from: (operations, rules, owner, version).
    Bytes canonical_bytes() const;
    static SmartContract decode(ByteReader& r);

    std::vector<std::string> list_roles() const;
    /// Throws ModelValidationError for an unknown role.
    std::vector<rbac::Right> get_rights(const std::string& role_id) const;

private:
    rbac::RbacModel rules_;
    crypto::ActorId owner_;
    std::uint32_t version_;
    ContractId id_;
};

SmartContract compile_contract(const rbac::RbacModel& model, const crypto::ActorId& owner, std::uint32_t version = 1);

struct GasReceipt {
    std::uint64_t gas_used = 0;
    std::string op;
    ContractId contract_id;

    bool operator==(const GasReceipt&) const = default;
};

GasReceipt gas_of_deployment(const SmartContract& contract, const GasSchedule& schedule = GasSchedule::proposed());

GasReceipt gas_of_validation(const SmartContract& contract, const rbac::AccessRequest& request,
                             const rbac::AccessDecision& decision,
                             const GasSchedule& schedule = GasSchedule::proposed());

/// Message the BAM signs when it releases rights.
Bytes rights_message(const std::string& user_id, const rbac::Mask& mask);

struct ValidationOutcome {
    /// Absent means denied; an all-false mask means granted nothing.
    std::optional<rbac::EffectiveRights> rights;
    std::optional<rbac::Denial> denial;
    std::optional<crypto::Signature> signed_rights;
    GasReceipt gas;
};

/// Meters gas for an already evaluated decision and, when granted, signs the
/// rights with the BAM key.
ValidationOutcome finalize_validation(const SmartContract& contract, const rbac::AccessRequest& request,
                                      rbac::AccessDecision decision, ByteView bam_private_key,
                                      const GasSchedule& schedule = GasSchedule::proposed());

/// Role validation against the contract's rules. `user` is null for an
/// unregistered id. Throws RequestError for requests naming attributes
/// outside the contract's catalog.
ValidationOutcome execute_validation(const SmartContract& contract, const rbac::RegisteredUser* user,
                                     const rbac::AccessRequest& request, ByteView bam_private_key,
                                     const GasSchedule& schedule = GasSchedule::proposed());

/// Payload used to calibrate deployment gas: four attributes, two rights
/// and `role_count` roles sharing one user type.
rbac::RbacModel reference_model(std::size_t role_count);

}  // namespace rbacchain::contract
