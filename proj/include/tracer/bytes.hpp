#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracer {

using Bytes = std::vector<std::uint8_t>;
using KeyBytes = std::array<std::uint8_t, 16>;

/// Thrown when a binary structure cannot be parsed (underrun, trailing
/// bytes, bad version). Callers treat it as "malformed input".
struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);  // throws DecodeError

void append_u8(Bytes& out, std::uint8_t v);
void append_u16_be(Bytes& out, std::uint16_t v);
void append_u32_be(Bytes& out, std::uint32_t v);
void append_u64_be(Bytes& out, std::uint64_t v);
void append_bytes(Bytes& out, std::span<const std::uint8_t> data);

/// Bounds-checked sequential reader over a byte span. Every accessor
/// throws DecodeError instead of reading past the end.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }

    std::uint8_t u8();
    std::uint16_t u16_be();
    std::uint32_t u32_be();
    std::uint64_t u64_be();
    Bytes bytes(std::size_t n);

    template <std::size_t N>
    std::array<std::uint8_t, N> array() {
        require(N);
        std::array<std::uint8_t, N> out;
        for (std::size_t i = 0; i < N; ++i) out[i] = data_[pos_ + i];
        pos_ += N;
        return out;
    }

    /// Rejects trailing garbage after the last expected field.
    void expect_done() const;

private:
    void require(std::size_t n) const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace tracer
