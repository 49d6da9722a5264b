#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "tracer/bytes.hpp"
#include "tracer/random.hpp"

namespace tracer {

/// Seconds per identifier rotation period.
inline constexpr std::uint32_t kIntervalSeconds = 600;
/// Rotation periods per day; daily keys are aligned to this.
inline constexpr std::uint32_t kRollingPeriod = 144;
/// Days a token retains keys and observed payloads.
inline constexpr std::uint32_t kRetentionDays = 14;
/// Retention window in rotation periods (2016).
inline constexpr std::uint32_t kRetentionIntervals = kRollingPeriod * kRetentionDays;

/// Count of 10-minute periods since the Unix epoch. The clock unit of the
/// whole protocol: identifiers rotate once per interval, daily keys cover
/// kRollingPeriod consecutive intervals.
struct IntervalNumber {
    std::uint32_t value = 0;

    friend auto operator<=>(const IntervalNumber&, const IntervalNumber&) = default;

    /// First interval of the day this interval falls in.
    IntervalNumber day_start() const { return {value - value % kRollingPeriod}; }
    bool day_aligned() const { return value % kRollingPeriod == 0; }
};

/// floor(unix_seconds / 600). Throws std::out_of_range if the result does
/// not fit the 32-bit interval counter.
IntervalNumber interval_number(std::uint64_t unix_seconds);

/// Daily 16-byte secret from which all identifiers broadcast that day
/// derive. epoch is the day-aligned interval the key became valid.
struct TemporaryExposureKey {
    KeyBytes key{};
    IntervalNumber epoch;

    friend bool operator==(const TemporaryExposureKey&, const TemporaryExposureKey&) = default;
};

inline constexpr std::size_t kMaxSaltLen = 32;

/// Disease-specific derivation salt. Keys derived under distinct salts
/// live in disjoint identifier spaces, which is what splits one key
/// schedule into per-disease subnetworks. The empty salt is the baseline
/// network and derives exactly the same bytes as omitting the salt.
struct SubnetworkSalt {
    std::string label;  // registry name, e.g. "covid19"; not part of any wire format
    Bytes salt_bytes;   // 0..32 bytes fed to the KDF

    /// Subnetwork identity is the salt bytes; labels are registry-local.
    friend bool operator==(const SubnetworkSalt& a, const SubnetworkSalt& b) {
        return a.salt_bytes == b.salt_bytes;
    }
};

/// 16-byte beacon payload valid for one interval within one subnetwork.
struct RollingProximityIdentifier {
    KeyBytes bytes{};
    IntervalNumber interval;

    friend bool operator==(const RollingProximityIdentifier&,
                           const RollingProximityIdentifier&) = default;
};

inline constexpr std::size_t kMetadataLen = 4;
using MetadataBytes = std::array<std::uint8_t, kMetadataLen>;

/// Metadata plaintext layout: version byte 0x40, signed transmit power in
/// dBm, two reserved zero bytes.
MetadataBytes make_metadata(std::int8_t tx_power_dbm);

/// Fresh daily key bound to day_epoch. Throws std::invalid_argument if the
/// epoch is not day-aligned.
TemporaryExposureKey generate_tek(RandomSource& rng, IntervalNumber day_epoch);

/// HKDF-SHA-256 with the subnetwork salt as the extraction salt and info
/// string "EN-RPIK". Identifier-derivation key for one (tek, salt) pair.
KeyBytes derive_rpik(const TemporaryExposureKey& tek, const SubnetworkSalt& salt);

/// As derive_rpik with info string "EN-AEMK"; encrypts beacon metadata.
KeyBytes derive_aemk(const TemporaryExposureKey& tek, const SubnetworkSalt& salt);

/// AES-128 encryption of the padded block "EN-RPI" || 6 zero bytes ||
/// interval as 4 little-endian bytes, keyed by rpik.
RollingProximityIdentifier derive_rpi(const KeyBytes& rpik, IntervalNumber interval);

/// All kRollingPeriod identifiers of one day, intervals epoch..epoch+143
/// in order.
std::vector<RollingProximityIdentifier> rpi_sequence(const TemporaryExposureKey& tek,
                                                     const SubnetworkSalt& salt);

/// AES-128-CTR keyed by aemk with the identifier bytes as the counter
/// block. Encryption and decryption are the same operation.
MetadataBytes encrypt_metadata(const KeyBytes& aemk, const RollingProximityIdentifier& rpi,
                               const MetadataBytes& metadata);
MetadataBytes decrypt_metadata(const KeyBytes& aemk, const RollingProximityIdentifier& rpi,
                               const MetadataBytes& ciphertext);

// Primitives backing the derivations, exposed for the modules that need
// digests and for direct vector tests.
Bytes hkdf_sha256(std::span<const std::uint8_t> ikm, std::span<const std::uint8_t> salt,
                  std::span<const std::uint8_t> info, std::size_t length);
std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);
KeyBytes aes128_encrypt_block(const KeyBytes& key, const KeyBytes& block);
void aes128_ctr_xor(const KeyBytes& key, const KeyBytes& counter_block,
                    std::span<const std::uint8_t> in, std::span<std::uint8_t> out);

}  // namespace tracer
