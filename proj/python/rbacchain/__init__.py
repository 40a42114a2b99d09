"""Python bindings for rbacchain."""

from ._rbacchain import (
    Fabric,
    RbacChainError,
    actor_id,
    bench_gas,
    check_access,
    deployment_gas,
    effective_mask,
    keygen,
    parse_sweep,
    sha256,
    validate_policy,
    verify_chain_file,
)

__all__ = [
    "Fabric",
    "RbacChainError",
    "actor_id",
    "bench_gas",
    "check_access",
    "deployment_gas",
    "effective_mask",
    "keygen",
    "parse_sweep",
    "sha256",
    "validate_policy",
    "verify_chain_file",
]
