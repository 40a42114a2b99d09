#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "rbacchain/crypto.hpp"
#include "rbacchain/errors.hpp"

using namespace rbacchain;

namespace {

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
}

}  // namespace

TEST(Bytes, HexRoundTrip) {
    Bytes b{0x00, 0x7f, 0xff, 0x10};
    EXPECT_EQ(to_hex(b), "007fff10");
    EXPECT_EQ(from_hex("007fff10"), b);
    EXPECT_THROW(from_hex("abc"), DecodeError);
    EXPECT_THROW(from_hex("zz"), DecodeError);
}

TEST(Bytes, WriterReaderRoundTrip) {
    ByteWriter w;
    w.u8(7).u32(0xdeadbeef).u64(1ull << 40).i64(-5).boolean(true).str("hello").bytes(Bytes{1, 2});
    auto data = std::move(w).take();
    ByteReader r(data);
    EXPECT_EQ(r.u8(), 7);
    EXPECT_EQ(r.u32(), 0xdeadbeefu);
    EXPECT_EQ(r.u64(), 1ull << 40);
    EXPECT_EQ(r.i64(), -5);
    EXPECT_TRUE(r.boolean());
    EXPECT_EQ(r.str(), "hello");
    EXPECT_EQ(r.bytes(), (Bytes{1, 2}));
    EXPECT_NO_THROW(r.expect_end());
}

TEST(Bytes, StrictDecoding) {
    Bytes two{2};
    ByteReader r(two);
    EXPECT_THROW(r.boolean(), DecodeError);

    Bytes short_prefix{0, 0, 0, 9, 1};
    ByteReader r2(short_prefix);
    EXPECT_THROW(r2.bytes(), DecodeError);

    Bytes extra{1, 2};
    ByteReader r3(extra);
    r3.u8();
    EXPECT_THROW(r3.expect_end(), DecodeError);
}

TEST(Crypto, Sha256KnownVector) {
    EXPECT_EQ(to_hex(crypto::sha256(as_bytes("abc"))),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Crypto, SignVerifyRoundTrip) {
    auto kp = crypto::key_gen();
    for (std::string m : {"", "x", "a longer message with some content"}) {
        auto sig = crypto::sign(as_bytes(m), kp.private_key);
        EXPECT_TRUE(crypto::verify(as_bytes(m), sig, kp.public_key)) << m;
    }
}

TEST(Crypto, SigningIsDeterministic) {
    auto kp = crypto::key_gen();
    auto a = crypto::sign(as_bytes("same"), kp.private_key);
    auto b = crypto::sign(as_bytes("same"), kp.private_key);
    EXPECT_EQ(a, b);
}

TEST(Crypto, KeyGenIsFresh) {
    std::set<Bytes> pks;
    for (int i = 0; i < 1000; ++i) pks.insert(crypto::key_gen().public_key);
    EXPECT_EQ(pks.size(), 1000u);
}

TEST(Crypto, CrossKeyAndMessageRejection) {
    auto a = crypto::key_gen();
    auto b = crypto::key_gen();
    auto sig = crypto::sign(as_bytes("m"), a.private_key);
    EXPECT_FALSE(crypto::verify(as_bytes("m"), sig, b.public_key));
    EXPECT_FALSE(crypto::verify(as_bytes("m'"), sig, a.public_key));
}

TEST(Crypto, VerifyIsTotal) {
    auto kp = crypto::key_gen();
    std::mt19937_64 rng(3);
    EXPECT_FALSE(crypto::verify(as_bytes("m"), random_bytes(rng, 64), kp.public_key));
    EXPECT_FALSE(crypto::verify(as_bytes("m"), random_bytes(rng, 7), kp.public_key));
    EXPECT_FALSE(crypto::verify(as_bytes("m"), random_bytes(rng, 64), random_bytes(rng, 5)));
    EXPECT_THROW(crypto::sign(as_bytes("m"), random_bytes(rng, 10)), CryptoError);
}

TEST(Crypto, SignerMustMatchKey) {
    auto a = crypto::key_gen();
    auto b = crypto::key_gen();
    auto sig = crypto::sign(as_bytes("m"), a.private_key);
    sig.signer = crypto::actor_id_of(b.public_key);
    EXPECT_FALSE(crypto::verify(as_bytes("m"), sig, a.public_key));
}

TEST(Crypto, SingleByteFlipsAreDetected) {
    std::mt19937_64 rng(11);
    auto kp = crypto::key_gen();
    for (int trial = 0; trial < 200; ++trial) {
        auto msg = random_bytes(rng, 1 + rng() % 64);
        auto sig = crypto::sign(msg, kp.private_key);
        auto bad_msg = msg;
        bad_msg[rng() % bad_msg.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        EXPECT_FALSE(crypto::verify(bad_msg, sig, kp.public_key));
        auto bad_sig = sig;
        bad_sig.bytes[rng() % bad_sig.bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        EXPECT_FALSE(crypto::verify(msg, bad_sig, kp.public_key));
    }
}

TEST(Crypto, ForeignPairsNeverVerify) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = crypto::key_gen();
        auto b = crypto::key_gen();
        auto msg = random_bytes(rng, 32);
        EXPECT_FALSE(crypto::verify(msg, crypto::sign(msg, a.private_key), b.public_key));
    }
}

TEST(Crypto, ActorIdIsStableAndSized) {
    auto kp = crypto::key_gen();
    auto id = crypto::actor_id_of(kp.public_key);
    EXPECT_EQ(id, crypto::actor_id_of(kp.public_key));
    EXPECT_EQ(id.hex().size(), 2 * crypto::kActorIdBytes);
    // first 20 bytes of SHA-256(pk), recomputed by hand
    auto digest = crypto::sha256(kp.public_key);
    EXPECT_EQ(id.hex(), to_hex(ByteView(digest.data(), crypto::kActorIdBytes)));
    EXPECT_NE(id, crypto::actor_id_of(crypto::key_gen().public_key));
    EXPECT_THROW(crypto::ActorId("ABCD"), DecodeError);
}

TEST(Crypto, KeyFileRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "rbacchain_keyfile_test";
    std::filesystem::create_directories(dir);
    crypto::KeyFile kf{"acm", crypto::key_gen()};
    crypto::save_key_file(dir / "acm.json", kf);
    auto back = crypto::load_key_file(dir / "acm.json");
    EXPECT_EQ(back.actor_name, "acm");
    EXPECT_EQ(back.keys.public_key, kf.keys.public_key);
    EXPECT_EQ(back.keys.private_key, kf.keys.private_key);
    EXPECT_THROW(crypto::load_key_file(dir / "missing.json"), IoError);
    std::filesystem::remove_all(dir);
}
