#include "tracer/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>

#include <cstring>
#include <memory>
#include <stdexcept>

namespace tracer {

namespace {

constexpr char kRpikInfo[] = "EN-RPIK";
constexpr char kAemkInfo[] = "EN-AEMK";
constexpr char kRpiTag[] = "EN-RPI";

[[noreturn]] void fail(const char* what) {
    throw std::runtime_error(std::string("openssl: ") + what);
}

struct KdfDeleter {
    void operator()(EVP_KDF* p) const { EVP_KDF_free(p); }
    void operator()(EVP_KDF_CTX* p) const { EVP_KDF_CTX_free(p); }
};
struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

std::span<const std::uint8_t> info_span(const char* info) {
    return {reinterpret_cast<const std::uint8_t*>(info), std::strlen(info)};
}

KeyBytes derive_subkey(const TemporaryExposureKey& tek, const SubnetworkSalt& salt,
                       const char* info) {
    Bytes okm = hkdf_sha256(tek.key, salt.salt_bytes, info_span(info), 16);
    KeyBytes out{};
    std::copy(okm.begin(), okm.end(), out.begin());
    return out;
}

}  // namespace

IntervalNumber interval_number(std::uint64_t unix_seconds) {
    std::uint64_t q = unix_seconds / kIntervalSeconds;
    if (q > 0xFFFFFFFFull)
        throw std::out_of_range("interval_number: timestamp beyond 32-bit interval range");
    return {static_cast<std::uint32_t>(q)};
}

MetadataBytes make_metadata(std::int8_t tx_power_dbm) {
    return {0x40, static_cast<std::uint8_t>(tx_power_dbm), 0x00, 0x00};
}

TemporaryExposureKey generate_tek(RandomSource& rng, IntervalNumber day_epoch) {
    if (!day_epoch.day_aligned())
        throw std::invalid_argument("generate_tek: epoch not aligned to the rolling period");
    TemporaryExposureKey tek;
    tek.epoch = day_epoch;
    rng.fill(tek.key);
    return tek;
}

KeyBytes derive_rpik(const TemporaryExposureKey& tek, const SubnetworkSalt& salt) {
    return derive_subkey(tek, salt, kRpikInfo);
}

KeyBytes derive_aemk(const TemporaryExposureKey& tek, const SubnetworkSalt& salt) {
    return derive_subkey(tek, salt, kAemkInfo);
}

RollingProximityIdentifier derive_rpi(const KeyBytes& rpik, IntervalNumber interval) {
    KeyBytes padded{};
    std::memcpy(padded.data(), kRpiTag, 6);
    padded[12] = static_cast<std::uint8_t>(interval.value);
    padded[13] = static_cast<std::uint8_t>(interval.value >> 8);
    padded[14] = static_cast<std::uint8_t>(interval.value >> 16);
    padded[15] = static_cast<std::uint8_t>(interval.value >> 24);
    return {aes128_encrypt_block(rpik, padded), interval};
}

std::vector<RollingProximityIdentifier> rpi_sequence(const TemporaryExposureKey& tek,
                                                     const SubnetworkSalt& salt) {
    const KeyBytes rpik = derive_rpik(tek, salt);
    std::vector<RollingProximityIdentifier> out;
    out.reserve(kRollingPeriod);
    for (std::uint32_t k = 0; k < kRollingPeriod; ++k)
        out.push_back(derive_rpi(rpik, {tek.epoch.value + k}));
    return out;
}

MetadataBytes encrypt_metadata(const KeyBytes& aemk, const RollingProximityIdentifier& rpi,
                               const MetadataBytes& metadata) {
    MetadataBytes out;
    aes128_ctr_xor(aemk, rpi.bytes, metadata, out);
    return out;
}

MetadataBytes decrypt_metadata(const KeyBytes& aemk, const RollingProximityIdentifier& rpi,
                               const MetadataBytes& ciphertext) {
    return encrypt_metadata(aemk, rpi, ciphertext);
}

Bytes hkdf_sha256(std::span<const std::uint8_t> ikm, std::span<const std::uint8_t> salt,
                  std::span<const std::uint8_t> info, std::size_t length) {
    std::unique_ptr<EVP_KDF, KdfDeleter> kdf(EVP_KDF_fetch(nullptr, "HKDF", nullptr));
    if (!kdf) fail("HKDF fetch");
    std::unique_ptr<EVP_KDF_CTX, KdfDeleter> ctx(EVP_KDF_CTX_new(kdf.get()));
    if (!ctx) fail("HKDF ctx");

    OSSL_PARAM params[5];
    std::size_t n = 0;
    char digest[] = "SHA256";
    params[n++] = OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, digest, 0);
    params[n++] = OSSL_PARAM_construct_octet_string(
        OSSL_KDF_PARAM_KEY, const_cast<std::uint8_t*>(ikm.data()), ikm.size());
    if (!salt.empty()) {
        params[n++] = OSSL_PARAM_construct_octet_string(
            OSSL_KDF_PARAM_SALT, const_cast<std::uint8_t*>(salt.data()), salt.size());
    }
    if (!info.empty()) {
        params[n++] = OSSL_PARAM_construct_octet_string(
            OSSL_KDF_PARAM_INFO, const_cast<std::uint8_t*>(info.data()), info.size());
    }
    params[n] = OSSL_PARAM_construct_end();

    Bytes out(length);
    if (EVP_KDF_derive(ctx.get(), out.data(), out.size(), params) != 1) fail("HKDF derive");
    return out;
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 32> digest;
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != digest.size())
        fail("SHA-256");
    return digest;
}

KeyBytes aes128_encrypt_block(const KeyBytes& key, const KeyBytes& block) {
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (!ctx) fail("cipher ctx");
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.data(), nullptr) != 1)
        fail("AES-ECB init");
    EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
    KeyBytes out;
    int outl = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &outl, block.data(),
                          static_cast<int>(block.size())) != 1 ||
        outl != static_cast<int>(out.size()))
        fail("AES-ECB update");
    return out;
}

void aes128_ctr_xor(const KeyBytes& key, const KeyBytes& counter_block,
                    std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
    if (in.size() != out.size())
        throw std::invalid_argument("aes128_ctr_xor: size mismatch");
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (!ctx) fail("cipher ctx");
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(),
                           counter_block.data()) != 1)
        fail("AES-CTR init");
    int outl = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &outl, in.data(),
                          static_cast<int>(in.size())) != 1 ||
        outl != static_cast<int>(in.size()))
        fail("AES-CTR update");
}

}  // namespace tracer
