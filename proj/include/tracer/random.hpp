#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace tracer {

/// Source of random bytes. Key generation takes one of these so tests and
/// the simulator can substitute a seeded stream for OS entropy.
class RandomSource {
public:
    virtual ~RandomSource() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;

    std::uint64_t next_u64();
    /// Uniform draw in [0, 1) with 53 bits of precision.
    double next_unit();
};

/// OS-backed entropy (OpenSSL RAND_bytes).
class SystemRandom final : public RandomSource {
public:
    void fill(std::span<std::uint8_t> out) override;
};

/// splitmix64 byte stream. Output depends only on the seed and the number
/// of bytes consumed so far — not on how reads are chunked — so
/// transcripts built from it reproduce bit-for-bit on any platform.
class DeterministicRandom final : public RandomSource {
public:
    explicit DeterministicRandom(std::uint64_t seed) : state_(seed) {}
    void fill(std::span<std::uint8_t> out) override;

private:
    std::uint64_t state_;
    std::uint64_t word_ = 0;  // unconsumed bytes of the last generated word
    int pending_ = 0;
};

/// Stable seed for a named sub-stream of one scenario seed, so the packet
/// loss stream, each token's key stream, etc. never interleave.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);

}  // namespace tracer
