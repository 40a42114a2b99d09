#include "rbacchain/crypto.hpp"

#include <sodium.h>

#include <fstream>

#include <json.hpp>

namespace rbacchain::crypto {

namespace {

void ensure_sodium() {
    static const bool ready = [] { return sodium_init() >= 0; }();
    if (!ready) throw CryptoError("libsodium initialisation failed (entropy source unavailable)");
}

bool is_lower_hex(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

}  // namespace

ActorId::ActorId(std::string hex) : hex_(std::move(hex)) {
    if (hex_.size() != 2 * kActorIdBytes || !is_lower_hex(hex_)) {
        throw DecodeError("malformed actor id '" + hex_ + "'");
    }
}

Digest sha256(ByteView data) {
    ensure_sodium();
    Digest out{};
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

Digest sha256_concat(std::initializer_list<ByteView> parts) {
    ensure_sodium();
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    for (auto p : parts) crypto_hash_sha256_update(&st, p.data(), p.size());
    Digest out{};
    crypto_hash_sha256_final(&st, out.data());
    return out;
}

KeyPair key_gen() {
    ensure_sodium();
    KeyPair kp{Bytes(kPublicKeySize), Bytes(kPrivateKeySize)};
    if (crypto_sign_ed25519_keypair(kp.public_key.data(), kp.private_key.data()) != 0) {
        throw CryptoError("key generation failed");
    }
    return kp;
}

KeyPair key_from_seed(ByteView seed) {
    ensure_sodium();
    if (seed.size() != kSeedSize) throw CryptoError("key seed must be 32 bytes");
    KeyPair kp{Bytes(kPublicKeySize), Bytes(kPrivateKeySize)};
    crypto_sign_ed25519_seed_keypair(kp.public_key.data(), kp.private_key.data(), seed.data());
    return kp;
}

Bytes public_key_of(ByteView private_key) {
    ensure_sodium();
    if (private_key.size() != kPrivateKeySize) throw CryptoError("malformed private key");
    Bytes pk(kPublicKeySize);
    crypto_sign_ed25519_sk_to_pk(pk.data(), private_key.data());
    return pk;
}

Signature sign(ByteView message, ByteView private_key) {
    auto pk = public_key_of(private_key);
    Signature sig{Bytes(kSignatureSize), actor_id_of(pk)};
    if (crypto_sign_ed25519_detached(sig.bytes.data(), nullptr, message.data(), message.size(),
                                     private_key.data()) != 0) {
        throw CryptoError("signing failed");
    }
    return sig;
}

bool verify(ByteView message, ByteView signature_bytes, ByteView public_key) {
    ensure_sodium();
    if (signature_bytes.size() != kSignatureSize || public_key.size() != kPublicKeySize) return false;
    return crypto_sign_ed25519_verify_detached(signature_bytes.data(), message.data(), message.size(),
                                               public_key.data()) == 0;
}

bool verify(ByteView message, const Signature& signature, ByteView public_key) {
    if (public_key.size() != kPublicKeySize) return false;
    if (signature.signer != actor_id_of(public_key)) return false;
    return verify(message, ByteView(signature.bytes), public_key);
}

ActorId actor_id_of(ByteView public_key) {
    auto digest = sha256(public_key);
    return ActorId(to_hex(ByteView(digest.data(), kActorIdBytes)));
}

void write_actor(ByteWriter& w, const ActorId& id) { w.str(id.hex()); }

ActorId read_actor(ByteReader& r) { return ActorId(r.str()); }

void write_signature(ByteWriter& w, const Signature& sig) {
    w.bytes(sig.bytes);
    write_actor(w, sig.signer);
}

Signature read_signature(ByteReader& r) {
    Signature sig;
    sig.bytes = r.bytes();
    sig.signer = read_actor(r);
    return sig;
}

void save_key_file(const std::filesystem::path& path, const KeyFile& key) {
    nlohmann::json j{{"actor_name", key.actor_name},
                     {"public_key_hex", to_hex(key.keys.public_key)},
                     {"private_key_hex", to_hex(key.keys.private_key)}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write key file " + path.string());
    out << j.dump(2) << '\n';
}

KeyFile load_key_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read key file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        KeyFile kf{j.at("actor_name").get<std::string>(),
                   {from_hex(j.at("public_key_hex").get<std::string>()),
                    from_hex(j.at("private_key_hex").get<std::string>())}};
        if (kf.keys.public_key.size() != kPublicKeySize || kf.keys.private_key.size() != kPrivateKeySize ||
            public_key_of(kf.keys.private_key) != kf.keys.public_key) {
            throw CryptoError("key file " + path.string() + " holds an inconsistent key pair");
        }
        return kf;
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError("malformed key file " + path.string() + ": " + e.what());
    }
}

}  // namespace rbacchain::crypto
