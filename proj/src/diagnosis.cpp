#include "tracer/diagnosis.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>
#include <stdexcept>

#include "tracer/token.hpp"

namespace tracer {

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

[[noreturn]] void fail(const char* what) {
    throw std::runtime_error(std::string("openssl: ") + what);
}

ProviderKeypair keypair_from_pkey(EVP_PKEY* pkey) {
    ProviderKeypair kp;
    std::size_t len = kp.private_key.size();
    if (EVP_PKEY_get_raw_private_key(pkey, kp.private_key.data(), &len) != 1 ||
        len != kp.private_key.size())
        fail("raw private key");
    len = kp.public_key.size();
    if (EVP_PKEY_get_raw_public_key(pkey, kp.public_key.data(), &len) != 1 ||
        len != kp.public_key.size())
        fail("raw public key");
    return kp;
}

/// Structure and window checks shared by verify(); nullopt means sound.
std::optional<RejectReason> structural_check(const DiagnosisKeySet& dk) {
    if (dk.teks.empty() || dk.teks.size() > kMaxDiagnosisTeks)
        return RejectReason::Malformed;
    if (dk.salt.salt_bytes.size() > kMaxSaltLen) return RejectReason::Malformed;
    std::uint32_t prev = 0;
    bool first = true;
    for (const auto& tek : dk.teks) {
        if (!tek.epoch.day_aligned()) return RejectReason::Malformed;
        if (!first && tek.epoch.value <= prev) return RejectReason::Malformed;
        prev = tek.epoch.value;
        first = false;
    }
    for (const auto& tek : dk.teks) {
        if (tek.epoch.value > dk.issued_at.value) return RejectReason::StaleWindow;
        if (dk.issued_at.value - tek.epoch.value >= kRetentionIntervals)
            return RejectReason::StaleWindow;
    }
    return std::nullopt;
}

}  // namespace

ProviderKeypair generate_provider_keypair() {
    std::unique_ptr<EVP_PKEY_CTX, PkeyDeleter> ctx(
        EVP_PKEY_CTX_new_id(EVP_PKEY_ED25519, nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) != 1) fail("ed25519 keygen init");
    EVP_PKEY* raw = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &raw) != 1) fail("ed25519 keygen");
    PkeyPtr pkey(raw);
    return keypair_from_pkey(pkey.get());
}

ProviderKeypair generate_provider_keypair(RandomSource& rng) {
    std::array<std::uint8_t, 32> seed;
    rng.fill(seed);
    return keypair_from_seed(seed);
}

ProviderKeypair keypair_from_seed(std::span<const std::uint8_t> seed) {
    if (seed.size() != 32)
        throw std::invalid_argument("keypair_from_seed: seed must be 32 bytes");
    PkeyPtr pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(),
                                              seed.size()));
    if (!pkey) fail("ed25519 private key import");
    return keypair_from_pkey(pkey.get());
}

DiagnosisKeySet build_diagnosis_key_set(const Token& token, IntervalNumber now) {
    DiagnosisKeySet dk;
    dk.salt = token.salt();
    dk.issued_at = now;
    for (const auto& tek : token.tek_history()) {
        if (tek.epoch.value > now.value) continue;
        if (now.value - tek.epoch.value >= kRetentionIntervals) continue;
        dk.teks.push_back(tek);
    }
    if (dk.teks.empty())
        throw std::runtime_error("build_diagnosis_key_set: token holds no key in window");
    if (dk.teks.size() > kMaxDiagnosisTeks)
        dk.teks.erase(dk.teks.begin(), dk.teks.end() - kMaxDiagnosisTeks);
    return dk;
}

Bytes signed_portion(const DiagnosisKeySet& dk) {
    Bytes out;
    append_u8(out, kDiagnosisEncodingVersion);
    append_u8(out, static_cast<std::uint8_t>(dk.salt.salt_bytes.size()));
    append_bytes(out, dk.salt.salt_bytes);
    append_u32_be(out, dk.issued_at.value);
    append_u8(out, static_cast<std::uint8_t>(dk.teks.size()));
    for (const auto& tek : dk.teks) {
        append_bytes(out, tek.key);
        append_u32_be(out, tek.epoch.value);
    }
    return out;
}

Bytes encode(const DiagnosisKeySet& dk) {
    Bytes out = signed_portion(dk);
    append_bytes(out, dk.signature);
    return out;
}

DiagnosisKeySet decode(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    DiagnosisKeySet dk;
    if (r.u8() != kDiagnosisEncodingVersion)
        throw DecodeError("diagnosis key set: unsupported version");
    std::uint8_t salt_len = r.u8();
    if (salt_len > kMaxSaltLen) throw DecodeError("diagnosis key set: salt too long");
    dk.salt.salt_bytes = r.bytes(salt_len);
    dk.issued_at = {r.u32_be()};
    std::uint8_t count = r.u8();
    for (std::uint8_t i = 0; i < count; ++i) {
        TemporaryExposureKey tek;
        tek.key = r.array<16>();
        tek.epoch = {r.u32_be()};
        dk.teks.push_back(tek);
    }
    dk.signature = r.array<64>();
    r.expect_done();
    return dk;
}

std::array<std::uint8_t, 32> digest(const DiagnosisKeySet& dk) {
    return sha256(encode(dk));
}

DiagnosisKeySet sign(const ProviderKeypair& keypair, DiagnosisKeySet dk) {
    PkeyPtr pkey(EVP_PKEY_new_raw_private_key(
        EVP_PKEY_ED25519, nullptr, keypair.private_key.data(), keypair.private_key.size()));
    if (!pkey) fail("ed25519 private key import");
    std::unique_ptr<EVP_MD_CTX, PkeyDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1)
        fail("ed25519 sign init");
    Bytes msg = signed_portion(dk);
    std::size_t siglen = dk.signature.size();
    if (EVP_DigestSign(ctx.get(), dk.signature.data(), &siglen, msg.data(), msg.size()) != 1 ||
        siglen != dk.signature.size())
        fail("ed25519 sign");
    dk.signer_public_key = keypair.public_key;
    return dk;
}

bool ed25519_verify(const PublicKey& key, std::span<const std::uint8_t> message,
                    const Signature& sig) {
    PkeyPtr pkey(
        EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, key.data(), key.size()));
    if (!pkey) fail("ed25519 public key import");
    std::unique_ptr<EVP_MD_CTX, PkeyDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1)
        fail("ed25519 verify init");
    return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), message.data(),
                            message.size()) == 1;
}

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::BadSignature: return "bad-signature";
        case RejectReason::UnknownKey: return "unknown-key";
        case RejectReason::StaleWindow: return "stale-window";
        case RejectReason::Malformed: return "malformed";
    }
    return "unknown";
}

bool ProviderRegistry::add(const PublicKey& key) {
    if (contains(key)) return false;
    keys_.push_back(key);
    return true;
}

bool ProviderRegistry::contains(const PublicKey& key) const {
    return std::find(keys_.begin(), keys_.end(), key) != keys_.end();
}

std::string ProviderRegistry::fingerprint(const PublicKey& key) {
    return to_hex(sha256(key)).substr(0, 16);
}

VerifyResult verify(const ProviderRegistry& registry, const DiagnosisKeySet& dk) {
    if (auto reason = structural_check(dk)) return VerifyResult::reject(*reason);
    Bytes msg = signed_portion(dk);
    if (dk.signer_public_key) {
        if (!registry.contains(*dk.signer_public_key))
            return VerifyResult::reject(RejectReason::UnknownKey);
        if (!ed25519_verify(*dk.signer_public_key, msg, dk.signature))
            return VerifyResult::reject(RejectReason::BadSignature);
        return VerifyResult::accept();
    }
    if (registry.size() == 0) return VerifyResult::reject(RejectReason::UnknownKey);
    for (const auto& key : registry.keys()) {
        if (ed25519_verify(key, msg, dk.signature)) return VerifyResult::accept();
    }
    return VerifyResult::reject(RejectReason::BadSignature);
}

}  // namespace tracer
