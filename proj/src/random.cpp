#include "tracer/random.hpp"

#include <openssl/rand.h>

#include <array>
#include <stdexcept>

namespace tracer {

namespace {
std::uint64_t splitmix_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace

std::uint64_t RandomSource::next_u64() {
    std::array<std::uint8_t, 8> buf;
    fill(buf);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | buf[i];
    return v;
}

double RandomSource::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
    if (out.empty()) return;
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
        throw std::runtime_error("RAND_bytes failed");
}

void DeterministicRandom::fill(std::span<std::uint8_t> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (pending_ == 0) {
            word_ = splitmix_next(state_);
            pending_ = 8;
        }
        out[i] = static_cast<std::uint8_t>(word_);
        word_ >>= 8;
        --pending_;
    }
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
    // FNV-1a over the tag, folded into the seed, then one scramble round.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    std::uint64_t state = seed ^ h;
    return splitmix_next(state);
}

}  // namespace tracer
