#pragma once

#include <optional>
#include <vector>

#include "tracer/bytes.hpp"
#include "tracer/crypto.hpp"
#include "tracer/random.hpp"

namespace tracer {

class Token;

using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

/// Ed25519 keypair held by a healthcare provider. Uploads are only
/// accepted when signed by a registered provider.
struct ProviderKeypair {
    PublicKey public_key{};
    std::array<std::uint8_t, 32> private_key{};
};

ProviderKeypair generate_provider_keypair();
ProviderKeypair generate_provider_keypair(RandomSource& rng);
/// Rebuild a keypair from its 32-byte private seed.
ProviderKeypair keypair_from_seed(std::span<const std::uint8_t> seed);

inline constexpr std::size_t kMaxDiagnosisTeks = 14;
inline constexpr std::uint8_t kDiagnosisEncodingVersion = 1;

/// The unit of reporting: the up-to-14 most recent daily keys of a
/// diagnosed token, the subnetwork they belong to, and a provider
/// signature over the canonical encoding.
///
/// signer_public_key travels with the in-memory value only (set by sign);
/// the wire encoding carries no key identity and decode leaves it empty.
struct DiagnosisKeySet {
    std::vector<TemporaryExposureKey> teks;  // ascending day epochs
    SubnetworkSalt salt;
    IntervalNumber issued_at;
    Signature signature{};
    std::optional<PublicKey> signer_public_key;
};

/// Extract the retained daily keys of a token. Throws std::runtime_error
/// if the token holds no key inside the 14-day window of `now`.
DiagnosisKeySet build_diagnosis_key_set(const Token& token, IntervalNumber now);

/// Canonical encoding (bit-exact):
///   version byte
///   salt length byte, salt bytes
///   issued_at, 4 bytes big-endian
///   TEK count byte
///   per TEK: 16 key bytes, 4 epoch bytes big-endian
///   64 signature bytes
/// The signature covers everything before it. Salt labels are registry
/// metadata and never hit the wire.
Bytes encode(const DiagnosisKeySet& dk);
DiagnosisKeySet decode(std::span<const std::uint8_t> data);  // throws DecodeError
Bytes signed_portion(const DiagnosisKeySet& dk);

/// Content digest used for network-wide dedup: SHA-256 of the canonical
/// encoding.
std::array<std::uint8_t, 32> digest(const DiagnosisKeySet& dk);

DiagnosisKeySet sign(const ProviderKeypair& keypair, DiagnosisKeySet dk);

enum class RejectReason { BadSignature, UnknownKey, StaleWindow, Malformed };
const char* to_string(RejectReason r);

struct VerifyResult {
    bool accepted = false;
    std::optional<RejectReason> reason;

    static VerifyResult accept() { return {true, std::nullopt}; }
    static VerifyResult reject(RejectReason r) { return {false, r}; }
};

/// Set of provider public keys a server or token trusts.
class ProviderRegistry {
public:
    /// Idempotent by key bytes; returns false when already present.
    bool add(const PublicKey& key);
    bool contains(const PublicKey& key) const;
    std::size_t size() const { return keys_.size(); }
    const std::vector<PublicKey>& keys() const { return keys_; }

    static std::string fingerprint(const PublicKey& key);

private:
    std::vector<PublicKey> keys_;
};

/// Structural checks, the 14-day epoch window against issued_at, then the
/// signature. A set carrying a signer claim is checked against exactly
/// that key (unknown-key when unregistered); a bare set from the wire is
/// checked against every registered key.
VerifyResult verify(const ProviderRegistry& registry, const DiagnosisKeySet& dk);

bool ed25519_verify(const PublicKey& key, std::span<const std::uint8_t> message,
                    const Signature& sig);

}  // namespace tracer
