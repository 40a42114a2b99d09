#pragma once

#include <compare>
#include <filesystem>
#include <functional>
#include <string>

#include "rbacchain/bytes.hpp"

namespace rbacchain::crypto {

inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kPrivateKeySize = 64;
inline constexpr std::size_t kSeedSize = 32;
inline constexpr std::size_t kSignatureSize = 64;
/// Bytes of the SHA-256 digest kept in an ActorId (hex-encoded to twice this).
inline constexpr std::size_t kActorIdBytes = 20;

/// Hex-encoded truncated SHA-256 digest identifying an actor (or a contract).
class ActorId {
public:
    ActorId() = default;
    /// Throws DecodeError unless `hex` is 2 * kActorIdBytes lowercase hex digits.
    explicit ActorId(std::string hex);

    const std::string& hex() const { return hex_; }
    bool empty() const { return hex_.empty(); }

    auto operator<=>(const ActorId&) const = default;

private:
    std::string hex_;
};

struct KeyPair {
    Bytes public_key;
    Bytes private_key;
};

struct Signature {
    Bytes bytes;
    ActorId signer;

    bool operator==(const Signature&) const = default;
};

Digest sha256(ByteView data);
Digest sha256_concat(std::initializer_list<ByteView> parts);

/// Fresh Ed25519 key pair. Throws CryptoError if the entropy source cannot be
/// initialised.
KeyPair key_gen();
/// Key pair derived from a 32-byte seed; for reproducible fixtures.
KeyPair key_from_seed(ByteView seed);

/// Deterministic Ed25519 signature. Throws CryptoError on a malformed key.
Signature sign(ByteView message, ByteView private_key);

/// Total: malformed signatures or keys yield false.
bool verify(ByteView message, const Signature& signature, ByteView public_key);
bool verify(ByteView message, ByteView signature_bytes, ByteView public_key);

ActorId actor_id_of(ByteView public_key);
/// Public half of an Ed25519 private key.
Bytes public_key_of(ByteView private_key);

void write_signature(ByteWriter& w, const Signature& sig);
Signature read_signature(ByteReader& r);
void write_actor(ByteWriter& w, const ActorId& id);
ActorId read_actor(ByteReader& r);

/// Key file: {actor_name, public_key_hex, private_key_hex}.
struct KeyFile {
    std::string actor_name;
    KeyPair keys;

    ActorId id() const { return actor_id_of(keys.public_key); }
};

void save_key_file(const std::filesystem::path& path, const KeyFile& key);
KeyFile load_key_file(const std::filesystem::path& path);

}  // namespace rbacchain::crypto

template <>
struct std::hash<rbacchain::crypto::ActorId> {
    std::size_t operator()(const rbacchain::crypto::ActorId& id) const noexcept {
        return std::hash<std::string>{}(id.hex());
    }
};
