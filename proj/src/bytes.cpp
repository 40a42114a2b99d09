#include "rbacchain/bytes.hpp"

#include <algorithm>

namespace rbacchain {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

std::string to_hex(ByteView bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw DecodeError("hex string has odd length");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_value(hex[i]);
        int lo = hex_value(hex[i + 1]);
        if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit");
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

ByteWriter& ByteWriter::u8(std::uint8_t v) {
    buf_.push_back(v);
    return *this;
}

ByteWriter& ByteWriter::u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

ByteWriter& ByteWriter::u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

ByteWriter& ByteWriter::bytes(ByteView v) {
    u32(static_cast<std::uint32_t>(v.size()));
    return fixed(v);
}

ByteWriter& ByteWriter::fixed(ByteView v) {
    buf_.insert(buf_.end(), v.begin(), v.end());
    return *this;
}

ByteView ByteReader::take(std::size_t n) {
    if (n > remaining()) throw DecodeError("truncated input");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint32_t ByteReader::u32() {
    auto raw = take(4);
    std::uint32_t v = 0;
    for (auto b : raw) v = (v << 8) | b;
    return v;
}

std::uint64_t ByteReader::u64() {
    auto raw = take(8);
    std::uint64_t v = 0;
    for (auto b : raw) v = (v << 8) | b;
    return v;
}

bool ByteReader::boolean() {
    auto v = u8();
    if (v > 1) throw DecodeError("non-canonical boolean");
    return v == 1;
}

Bytes ByteReader::bytes() {
    auto n = u32();
    return fixed(n);
}

std::string ByteReader::str() {
    auto n = u32();
    auto raw = take(n);
    return {raw.begin(), raw.end()};
}

Bytes ByteReader::fixed(std::size_t n) {
    auto raw = take(n);
    return {raw.begin(), raw.end()};
}

void ByteReader::expect_end() const {
    if (remaining() != 0) throw DecodeError("trailing bytes after record");
}

}  // namespace rbacchain
