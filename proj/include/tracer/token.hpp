#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tracer/crypto.hpp"
#include "tracer/diagnosis.hpp"
#include "tracer/random.hpp"

namespace tracer {

/// One identifier heard over the air, with the interval it was heard in.
/// This is the only memory a token keeps of its contacts.
struct ObservedPayload {
    KeyBytes rpi_bytes{};
    MetadataBytes aem_bytes{};
    IntervalNumber heard_at;
    std::optional<int> rssi_hint;  // dB, simulator-provided; never gates matching
};

/// A match between a stored payload and an identifier recomputed from a
/// reported key set.
struct ExposureEvent {
    IntervalNumber interval;
    std::string disease_label;

    friend bool operator==(const ExposureEvent&, const ExposureEvent&) = default;
};

enum class ObserveOutcome { Stored, Duplicate, RejectedStale };

struct MatchOutcome {
    enum class Status { Matched, NoMatch, WrongSubnetwork };
    Status status = Status::NoMatch;
    std::vector<ExposureEvent> events;  // ascending interval, deduplicated
};

/// Matching accepts payloads heard within this many intervals of the
/// derived identifier's interval, absorbing clock skew between devices.
inline constexpr std::uint32_t kClockSkewIntervals = 1;

/// The tracer token as a pure state machine: key rotation, payload
/// collection with 14-day retention, diagnosis-key matching, and
/// owner-change reinitialization. Single-threaded by contract; distinct
/// instances share nothing.
class Token {
public:
    Token(SubnetworkSalt salt, IntervalNumber now, RandomSource& rng);

    /// Advance the token clock. Crossing a day boundary rotates in a fresh
    /// daily key; keys and payloads older than 14 days are dropped. Throws
    /// std::invalid_argument on clock regression.
    void tick(IntervalNumber now, RandomSource& rng);

    struct BeaconPayload {
        KeyBytes rpi{};
        MetadataBytes aem{};
    };

    /// The beacon broadcast during `now`: the interval's identifier under
    /// the token's salt plus encrypted metadata. Stable within one
    /// interval. Requires the clock to have been ticked into now's day.
    BeaconPayload advertise(IntervalNumber now) const;

    /// Store a heard payload. Duplicates on (rpi bytes, interval) collapse;
    /// payloads outside the retention window are rejected.
    ObserveOutcome observe(const ObservedPayload& payload);

    /// Recompute every identifier a verified key set could have broadcast
    /// and intersect with the payload store. A set from a different
    /// subnetwork is skipped wholesale and can never flag exposure.
    MatchOutcome match_diagnosis_keys(const DiagnosisKeySet& dk);

    /// Owner change: wipe keys, payloads and the exposure flag, keep the
    /// salt, restart the clock at `now`.
    void reinitialize(IntervalNumber now, RandomSource& rng);

    const SubnetworkSalt& salt() const { return salt_; }
    IntervalNumber clock() const { return clock_; }
    IntervalNumber created_at() const { return created_at_; }
    const TemporaryExposureKey& current_tek() const { return tek_history_.back(); }
    /// All retained daily keys, ascending epoch; the last entry is current.
    std::span<const TemporaryExposureKey> tek_history() const { return tek_history_; }
    const std::vector<ObservedPayload>& payload_store() const { return payload_store_; }
    bool exposed() const { return exposure_label_.has_value(); }
    const std::optional<std::string>& exposure_label() const { return exposure_label_; }

    std::optional<int> last_rssi_for(const KeyBytes& rpi) const;

    /// Versioned, length-prefixed binary snapshot for simulator
    /// checkpointing. Stable within one artifact version only.
    Bytes snapshot() const;
    static Token restore(std::span<const std::uint8_t> data);  // throws DecodeError

private:
    Token() = default;

    void prune(IntervalNumber now);
    void rebuild_index();
    bool in_retention(IntervalNumber heard_at) const;

    SubnetworkSalt salt_;
    IntervalNumber created_at_{};
    IntervalNumber clock_{};
    std::vector<TemporaryExposureKey> tek_history_;
    std::vector<ObservedPayload> payload_store_;
    std::optional<std::string> exposure_label_;

    struct KeyBytesHash {
        std::size_t operator()(const KeyBytes& k) const {
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i) v = v << 8 | k[i];
            return static_cast<std::size_t>(v);
        }
    };
    std::unordered_map<KeyBytes, std::vector<std::size_t>, KeyBytesHash> by_rpi_;
};

}  // namespace tracer
