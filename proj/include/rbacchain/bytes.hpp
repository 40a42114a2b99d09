#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbacchain/errors.hpp"

namespace rbacchain {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// Big-endian, length-prefixed writer. Every variable-length field carries a
/// u32 length so that distinct field sequences never share an encoding.
class ByteWriter {
public:
    ByteWriter& u8(std::uint8_t v);
    ByteWriter& u32(std::uint32_t v);
    ByteWriter& u64(std::uint64_t v);
    ByteWriter& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
    ByteWriter& boolean(bool v) { return u8(v ? 1 : 0); }
    ByteWriter& bytes(ByteView v);
    ByteWriter& str(std::string_view v) { return bytes(as_bytes(v)); }
    ByteWriter& fixed(ByteView v);

    const Bytes& data() const& { return buf_; }
    Bytes take() && { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Strict reader: rejects truncation, out-of-range tags and non-canonical
/// booleans by throwing DecodeError.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    bool boolean();
    Bytes bytes();
    std::string str();
    Bytes fixed(std::size_t n);
    template <std::size_t N>
    std::array<std::uint8_t, N> array() {
        std::array<std::uint8_t, N> out{};
        auto raw = take(N);
        std::copy(raw.begin(), raw.end(), out.begin());
        return out;
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }
    void expect_end() const;

private:
    ByteView take(std::size_t n);

    ByteView data_;
    std::size_t pos_ = 0;
};

}  // namespace rbacchain
