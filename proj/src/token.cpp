#include "tracer/token.hpp"

#include <algorithm>
#include <stdexcept>

namespace tracer {

namespace {
constexpr std::uint8_t kSnapshotVersion = 1;
}

Token::Token(SubnetworkSalt salt, IntervalNumber now, RandomSource& rng)
    : salt_(std::move(salt)), created_at_(now), clock_(now) {
    tek_history_.push_back(generate_tek(rng, now.day_start()));
}

void Token::tick(IntervalNumber now, RandomSource& rng) {
    if (now.value < clock_.value)
        throw std::invalid_argument("tick: clock regression");
    clock_ = now;
    if (now.day_start().value > current_tek().epoch.value) {
        tek_history_.push_back(generate_tek(rng, now.day_start()));
    }
    prune(now);
}

void Token::prune(IntervalNumber now) {
    // Daily keys: keep the current day plus the 13 before it.
    const std::uint32_t day = now.day_start().value;
    const std::uint32_t oldest_epoch =
        day >= kRetentionIntervals - kRollingPeriod ? day - (kRetentionIntervals - kRollingPeriod)
                                                    : 0;
    std::erase_if(tek_history_,
                  [&](const TemporaryExposureKey& t) { return t.epoch.value < oldest_epoch; });

    const std::size_t before = payload_store_.size();
    std::erase_if(payload_store_,
                  [&](const ObservedPayload& p) { return !in_retention(p.heard_at); });
    if (payload_store_.size() != before) rebuild_index();
}

bool Token::in_retention(IntervalNumber heard_at) const {
    if (heard_at.value > clock_.value) return false;
    return clock_.value - heard_at.value <= kRetentionIntervals;
}

Token::BeaconPayload Token::advertise(IntervalNumber now) const {
    const TemporaryExposureKey& tek = current_tek();
    if (now.day_start().value != tek.epoch.value)
        throw std::logic_error("advertise: clock not ticked into the current day");
    const KeyBytes rpik = derive_rpik(tek, salt_);
    const KeyBytes aemk = derive_aemk(tek, salt_);
    RollingProximityIdentifier rpi = derive_rpi(rpik, now);
    // Fixed transmit power; the simulator's range model reads it back out.
    MetadataBytes aem = encrypt_metadata(aemk, rpi, make_metadata(-16));
    return {rpi.bytes, aem};
}

ObserveOutcome Token::observe(const ObservedPayload& payload) {
    if (!in_retention(payload.heard_at)) return ObserveOutcome::RejectedStale;
    auto it = by_rpi_.find(payload.rpi_bytes);
    if (it != by_rpi_.end()) {
        for (std::size_t idx : it->second) {
            if (payload_store_[idx].heard_at == payload.heard_at)
                return ObserveOutcome::Duplicate;
        }
    }
    payload_store_.push_back(payload);
    by_rpi_[payload.rpi_bytes].push_back(payload_store_.size() - 1);
    return ObserveOutcome::Stored;
}

MatchOutcome Token::match_diagnosis_keys(const DiagnosisKeySet& dk) {
    MatchOutcome out;
    if (!(dk.salt == salt_)) {
        out.status = MatchOutcome::Status::WrongSubnetwork;
        return out;
    }
    for (const auto& tek : dk.teks) {
        const KeyBytes rpik = derive_rpik(tek, salt_);
        for (std::uint32_t k = 0; k < kRollingPeriod; ++k) {
            const IntervalNumber interval{tek.epoch.value + k};
            const RollingProximityIdentifier rpi = derive_rpi(rpik, interval);
            auto it = by_rpi_.find(rpi.bytes);
            if (it == by_rpi_.end()) continue;
            for (std::size_t idx : it->second) {
                const IntervalNumber heard = payload_store_[idx].heard_at;
                const std::uint32_t skew = heard.value > interval.value
                                               ? heard.value - interval.value
                                               : interval.value - heard.value;
                if (skew <= kClockSkewIntervals)
                    out.events.push_back({heard, salt_.label});
            }
        }
    }
    std::sort(out.events.begin(), out.events.end(),
              [](const ExposureEvent& a, const ExposureEvent& b) {
                  return a.interval.value < b.interval.value;
              });
    out.events.erase(std::unique(out.events.begin(), out.events.end()), out.events.end());
    if (!out.events.empty()) {
        out.status = MatchOutcome::Status::Matched;
        exposure_label_ = salt_.label;
    }
    return out;
}

void Token::reinitialize(IntervalNumber now, RandomSource& rng) {
    if (now.value < clock_.value)
        throw std::invalid_argument("reinitialize: clock regression");
    tek_history_.clear();
    payload_store_.clear();
    by_rpi_.clear();
    exposure_label_.reset();
    created_at_ = now;
    clock_ = now;
    tek_history_.push_back(generate_tek(rng, now.day_start()));
}

std::optional<int> Token::last_rssi_for(const KeyBytes& rpi) const {
    auto it = by_rpi_.find(rpi);
    if (it == by_rpi_.end() || it->second.empty()) return std::nullopt;
    return payload_store_[it->second.back()].rssi_hint;
}

void Token::rebuild_index() {
    by_rpi_.clear();
    for (std::size_t i = 0; i < payload_store_.size(); ++i)
        by_rpi_[payload_store_[i].rpi_bytes].push_back(i);
}

Bytes Token::snapshot() const {
    Bytes body;
    append_u8(body, kSnapshotVersion);
    append_u32_be(body, created_at_.value);
    append_u32_be(body, clock_.value);
    append_u16_be(body, static_cast<std::uint16_t>(salt_.label.size()));
    append_bytes(body, {reinterpret_cast<const std::uint8_t*>(salt_.label.data()),
                        salt_.label.size()});
    append_u8(body, static_cast<std::uint8_t>(salt_.salt_bytes.size()));
    append_bytes(body, salt_.salt_bytes);
    if (exposure_label_) {
        append_u8(body, 1);
        append_u16_be(body, static_cast<std::uint16_t>(exposure_label_->size()));
        append_bytes(body, {reinterpret_cast<const std::uint8_t*>(exposure_label_->data()),
                            exposure_label_->size()});
    } else {
        append_u8(body, 0);
    }
    append_u8(body, static_cast<std::uint8_t>(tek_history_.size()));
    for (const auto& tek : tek_history_) {
        append_bytes(body, tek.key);
        append_u32_be(body, tek.epoch.value);
    }
    append_u32_be(body, static_cast<std::uint32_t>(payload_store_.size()));
    for (const auto& p : payload_store_) {
        append_bytes(body, p.rpi_bytes);
        append_bytes(body, p.aem_bytes);
        append_u32_be(body, p.heard_at.value);
        if (p.rssi_hint) {
            append_u8(body, 1);
            append_u16_be(body, static_cast<std::uint16_t>(static_cast<std::int16_t>(*p.rssi_hint)));
        } else {
            append_u8(body, 0);
        }
    }
    Bytes out;
    append_u32_be(out, static_cast<std::uint32_t>(body.size()));
    append_bytes(out, body);
    return out;
}

Token Token::restore(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    const std::uint32_t length = r.u32_be();
    if (length != r.remaining()) throw DecodeError("snapshot: length prefix mismatch");
    if (r.u8() != kSnapshotVersion) throw DecodeError("snapshot: unsupported version");

    Token t;
    t.created_at_ = {r.u32_be()};
    t.clock_ = {r.u32_be()};
    const std::uint16_t label_len = r.u16_be();
    Bytes label = r.bytes(label_len);
    t.salt_.label.assign(label.begin(), label.end());
    const std::uint8_t salt_len = r.u8();
    if (salt_len > kMaxSaltLen) throw DecodeError("snapshot: salt too long");
    t.salt_.salt_bytes = r.bytes(salt_len);
    if (r.u8() != 0) {
        const std::uint16_t exp_len = r.u16_be();
        Bytes exp = r.bytes(exp_len);
        t.exposure_label_ = std::string(exp.begin(), exp.end());
    }
    const std::uint8_t tek_count = r.u8();
    if (tek_count == 0 || tek_count > kMaxDiagnosisTeks)
        throw DecodeError("snapshot: bad key count");
    for (std::uint8_t i = 0; i < tek_count; ++i) {
        TemporaryExposureKey tek;
        tek.key = r.array<16>();
        tek.epoch = {r.u32_be()};
        t.tek_history_.push_back(tek);
    }
    const std::uint32_t payload_count = r.u32_be();
    for (std::uint32_t i = 0; i < payload_count; ++i) {
        ObservedPayload p;
        p.rpi_bytes = r.array<16>();
        p.aem_bytes = r.array<4>();
        p.heard_at = {r.u32_be()};
        if (r.u8() != 0) p.rssi_hint = static_cast<std::int16_t>(r.u16_be());
        t.payload_store_.push_back(p);
    }
    r.expect_done();
    t.rebuild_index();
    return t;
}

}  // namespace tracer
