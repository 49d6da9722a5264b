#include <doctest.h>

#include <set>

#include "matching_oracle.hpp"
#include "tracer/token.hpp"

using namespace tracer;

namespace {

// A mid-epoch day boundary region: day start 2057472, previous day 2057328.
constexpr std::uint32_t kDay = 2057472;

SubnetworkSalt baseline() { return {"covid19", {}}; }

Token make_token(IntervalNumber now, std::uint64_t seed = 1) {
    DeterministicRandom rng(seed);
    return Token(baseline(), now, rng);
}

/// A beacon as another token would hear it during `interval`.
ObservedPayload heard_from(const Token& emitter, IntervalNumber interval) {
    const Token::BeaconPayload beacon = emitter.advertise(interval);
    return ObservedPayload{beacon.rpi, beacon.aem, interval, std::nullopt};
}

DiagnosisKeySet unsigned_set(const Token& token, IntervalNumber issued_at) {
    DiagnosisKeySet dk;
    dk.teks.assign(token.tek_history().begin(), token.tek_history().end());
    dk.salt = token.salt();
    dk.issued_at = issued_at;
    return dk;
}

}  // namespace

TEST_CASE("a fresh token carries one day-aligned key") {
    const Token token = make_token({kDay + 37});
    CHECK(token.tek_history().size() == 1);
    CHECK(token.current_tek().epoch.value == kDay);
    CHECK(token.clock().value == kDay + 37);
    CHECK(token.created_at().value == kDay + 37);
    CHECK_FALSE(token.exposed());
}

TEST_CASE("advertise derives the interval's identifier under the token's salt") {
    const Token token = make_token({kDay});
    const Token::BeaconPayload beacon = token.advertise({kDay + 5});

    const KeyBytes rpik = derive_rpik(token.current_tek(), token.salt());
    const KeyBytes aemk = derive_aemk(token.current_tek(), token.salt());
    const RollingProximityIdentifier rpi = derive_rpi(rpik, {kDay + 5});
    CHECK(beacon.rpi == rpi.bytes);
    CHECK(beacon.aem == encrypt_metadata(aemk, rpi, make_metadata(-16)));
    CHECK(decrypt_metadata(aemk, rpi, beacon.aem) == make_metadata(-16));

    // Stable within an interval, fresh across intervals.
    CHECK(token.advertise({kDay + 5}).rpi == beacon.rpi);
    CHECK(token.advertise({kDay + 6}).rpi != beacon.rpi);
}

TEST_CASE("advertise refuses interval outside the current key's day") {
    const Token token = make_token({kDay + 10});
    CHECK_THROWS_AS((void)token.advertise({kDay + kRollingPeriod}), std::logic_error);
    CHECK_THROWS_AS((void)token.advertise({kDay - 1}), std::logic_error);
}

TEST_CASE("clock may not run backwards") {
    DeterministicRandom rng(3);
    Token token = make_token({kDay + 10});
    CHECK_THROWS_AS(token.tick({kDay + 9}, rng), std::invalid_argument);
    token.tick({kDay + 10}, rng);  // same interval is fine
    token.tick({kDay + 11}, rng);
}

TEST_CASE("a key rotates in at each day boundary") {
    DeterministicRandom rng(4);
    Token token = make_token({kDay});
    for (std::uint32_t i = 1; i <= 3 * kRollingPeriod; ++i) token.tick({kDay + i}, rng);
    // Ticked across three midnights: four daily keys.
    REQUIRE(token.tek_history().size() == 4);
    std::set<KeyBytes> distinct;
    for (std::size_t d = 0; d < 4; ++d) {
        CHECK(token.tek_history()[d].epoch.value == kDay + d * kRollingPeriod);
        distinct.insert(token.tek_history()[d].key);
    }
    CHECK(distinct.size() == 4);  // fresh randomness each day
    CHECK(token.current_tek().epoch.value == kDay + 3 * kRollingPeriod);
}

TEST_CASE("key history is capped at the retention window") {
    DeterministicRandom rng(5);
    Token token = make_token({kDay});
    // A month of day boundaries, coarse ticks.
    for (std::uint32_t day = 1; day <= 30; ++day) {
        token.tick({kDay + day * kRollingPeriod}, rng);
    }
    CHECK(token.tek_history().size() == kRetentionDays);
    CHECK(token.tek_history().front().epoch.value ==
          kDay + (30 - (kRetentionDays - 1)) * kRollingPeriod);
}

TEST_CASE("observations deduplicate on identifier and interval") {
    Token receiver = make_token({kDay + 10}, 6);
    const Token emitter = make_token({kDay}, 7);

    const ObservedPayload p = heard_from(emitter, {kDay + 1});
    CHECK(receiver.observe(p) == ObserveOutcome::Stored);
    CHECK(receiver.observe(p) == ObserveOutcome::Duplicate);
    CHECK(receiver.payload_store().size() == 1);

    // Same identifier heard again in another interval is new evidence.
    ObservedPayload later = p;
    later.heard_at = {kDay + 2};
    CHECK(receiver.observe(later) == ObserveOutcome::Stored);
    CHECK(receiver.payload_store().size() == 2);
}

TEST_CASE("observations outside the retention window are rejected") {
    Token receiver = make_token({kDay}, 8);
    ObservedPayload p;
    p.rpi_bytes = KeyBytes{1, 2, 3};
    p.heard_at = {kDay - kRetentionIntervals};  // exactly at the edge: kept
    CHECK(receiver.observe(p) == ObserveOutcome::Stored);
    p.rpi_bytes = KeyBytes{4, 5, 6};
    p.heard_at = {kDay - kRetentionIntervals - 1};
    CHECK(receiver.observe(p) == ObserveOutcome::RejectedStale);
    p.heard_at = {kDay + 1};  // the future is not observable
    CHECK(receiver.observe(p) == ObserveOutcome::RejectedStale);
}

TEST_CASE("old payloads are pruned as the clock advances") {
    DeterministicRandom rng(9);
    Token receiver = make_token({kDay}, 9);
    const Token emitter = make_token({kDay}, 10);
    CHECK(receiver.observe(heard_from(emitter, {kDay})) == ObserveOutcome::Stored);
    receiver.tick({kDay + kRetentionIntervals}, rng);
    CHECK(receiver.payload_store().size() == 1);
    receiver.tick({kDay + kRetentionIntervals + 1}, rng);
    CHECK(receiver.payload_store().empty());
}

TEST_CASE("matching flags exposure exactly for shared-interval contacts") {
    Token receiver = make_token({kDay}, 11);
    Token emitter = make_token({kDay}, 12);
    DeterministicRandom rng(13);

    for (std::uint32_t i = 0; i < 6; ++i) {
        emitter.tick({kDay + i}, rng);
        receiver.tick({kDay + i}, rng);
        CHECK(receiver.observe(heard_from(emitter, {kDay + i})) == ObserveOutcome::Stored);
    }

    const DiagnosisKeySet dk = unsigned_set(emitter, {kDay + 10});
    const MatchOutcome outcome = receiver.match_diagnosis_keys(dk);
    REQUIRE(outcome.status == MatchOutcome::Status::Matched);
    REQUIRE(outcome.events.size() == 6);
    for (std::uint32_t i = 0; i < 6; ++i) {
        CHECK(outcome.events[i].interval.value == kDay + i);
        CHECK(outcome.events[i].disease_label == "covid19");
    }
    CHECK(receiver.exposed());
    CHECK(receiver.exposure_label() == "covid19");
}

TEST_CASE("a key set from another subnetwork is skipped wholesale") {
    Token receiver = make_token({kDay}, 14);
    Token emitter = make_token({kDay}, 15);
    CHECK(receiver.observe(heard_from(emitter, {kDay})) == ObserveOutcome::Stored);

    DiagnosisKeySet dk = unsigned_set(emitter, {kDay + 1});
    dk.salt = SubnetworkSalt{"tb", {0x01}};
    const MatchOutcome outcome = receiver.match_diagnosis_keys(dk);
    CHECK(outcome.status == MatchOutcome::Status::WrongSubnetwork);
    CHECK(outcome.events.empty());
    CHECK_FALSE(receiver.exposed());
}

TEST_CASE("matching absorbs one interval of clock skew, no more") {
    const Token emitter = make_token({kDay}, 16);
    const DiagnosisKeySet dk = unsigned_set(emitter, {kDay + 20});
    const Token::BeaconPayload beacon = emitter.advertise({kDay + 7});

    for (const auto& [offset, expected] :
         std::vector<std::pair<std::int32_t, bool>>{{-2, false}, {-1, true}, {0, true},
                                                    {1, true}, {2, false}}) {
        Token receiver = make_token({kDay + 20}, 17);
        ObservedPayload p{beacon.rpi, beacon.aem, {kDay + 7 + offset}, std::nullopt};
        REQUIRE(receiver.observe(p) == ObserveOutcome::Stored);
        const MatchOutcome outcome = receiver.match_diagnosis_keys(dk);
        CHECK((outcome.status == MatchOutcome::Status::Matched) == expected);
        if (expected) {
            REQUIRE(outcome.events.size() == 1);
            CHECK(outcome.events[0].interval.value == kDay + 7 + offset);
        }
    }
}

TEST_CASE("exposure flag is monotonic across later non-matches") {
    Token receiver = make_token({kDay}, 18);
    Token emitter = make_token({kDay}, 19);
    CHECK(receiver.observe(heard_from(emitter, {kDay})) == ObserveOutcome::Stored);
    CHECK(receiver.match_diagnosis_keys(unsigned_set(emitter, {kDay + 1})).status ==
          MatchOutcome::Status::Matched);
    CHECK(receiver.exposed());

    const Token stranger = make_token({kDay}, 20);
    CHECK(receiver.match_diagnosis_keys(unsigned_set(stranger, {kDay + 1})).status ==
          MatchOutcome::Status::NoMatch);
    CHECK(receiver.exposed());
}

TEST_CASE("matching equals the brute-force oracle on randomized instances") {
    DeterministicRandom rng(424242);
    for (int instance = 0; instance < 50; ++instance) {
        // A key set of 1..5 daily keys with gaps.
        DiagnosisKeySet dk;
        Bytes salt_bytes(rng.next_u64() % 5);
        rng.fill(salt_bytes);
        dk.salt = SubnetworkSalt{"fuzz", salt_bytes};
        const std::uint32_t base_day =
            (2000000 + static_cast<std::uint32_t>(rng.next_u64() % 10000)) /
            kRollingPeriod * kRollingPeriod;
        std::uint32_t epoch = base_day;
        const std::size_t tek_count = 1 + rng.next_u64() % 5;
        for (std::size_t i = 0; i < tek_count; ++i) {
            dk.teks.push_back(generate_tek(rng, {epoch}));
            epoch += kRollingPeriod * (1 + rng.next_u64() % 2);
        }
        dk.issued_at = {epoch};

        DeterministicRandom token_rng(instance);
        Token receiver(dk.salt, {epoch + kRollingPeriod - 1}, token_rng);

        const std::size_t payload_count = rng.next_u64() % 200;
        for (std::size_t i = 0; i < payload_count; ++i) {
            ObservedPayload p;
            if (rng.next_u64() % 2 == 0) {
                // Planted hit near a real identifier, skew in [-2, 2].
                const auto& tek = dk.teks[rng.next_u64() % dk.teks.size()];
                const std::uint32_t k =
                    static_cast<std::uint32_t>(rng.next_u64() % kRollingPeriod);
                p.rpi_bytes = derive_rpi(derive_rpik(tek, dk.salt), {tek.epoch.value + k}).bytes;
                const std::int32_t skew = static_cast<std::int32_t>(rng.next_u64() % 5) - 2;
                p.heard_at = {static_cast<std::uint32_t>(tek.epoch.value + k + skew)};
            } else {
                rng.fill(p.rpi_bytes);
                p.heard_at = {base_day + static_cast<std::uint32_t>(
                                             rng.next_u64() % (6 * kRollingPeriod))};
            }
            (void)receiver.observe(p);
        }

        const MatchOutcome outcome = receiver.match_diagnosis_keys(dk);
        const auto expected =
            oracle::brute_force_match(dk, receiver.salt(), receiver.payload_store());
        REQUIRE(outcome.events.size() == expected.size());
        CHECK(outcome.events == expected);
        CHECK((outcome.status == MatchOutcome::Status::Matched) == !expected.empty());
    }
}

TEST_CASE("reinitialize severs the link to the previous owner") {
    DeterministicRandom rng(21);
    Token traded = make_token({kDay}, 22);
    Token bystander = make_token({kDay + 10}, 23);

    // The bystander hears the token's first owner for a while.
    for (std::uint32_t i = 0; i < 10; ++i) {
        CHECK(bystander.observe(heard_from(traded, {kDay + i})) == ObserveOutcome::Stored);
    }
    const DiagnosisKeySet old_keys = unsigned_set(traded, {kDay + 30});

    traded.reinitialize({kDay + 20}, rng);
    CHECK(traded.tek_history().size() == 1);
    CHECK(traded.payload_store().empty());
    CHECK_FALSE(traded.exposed());
    CHECK(traded.created_at().value == kDay + 20);
    CHECK(traded.salt() == baseline());
    CHECK(traded.current_tek().key != old_keys.teks.back().key);

    // Keys reported by the new owner share nothing with what the
    // bystander heard from the old one.
    const DiagnosisKeySet new_keys = unsigned_set(traded, {kDay + 30});
    const MatchOutcome outcome = bystander.match_diagnosis_keys(new_keys);
    CHECK(outcome.status == MatchOutcome::Status::NoMatch);
    CHECK(outcome.events.empty());
    CHECK_FALSE(bystander.exposed());

    // The old keys still match, of course; the severance is forward-only.
    CHECK(bystander.match_diagnosis_keys(old_keys).status == MatchOutcome::Status::Matched);
}

TEST_CASE("exposure survives a snapshot round trip") {
    DeterministicRandom rng(24);
    Token receiver = make_token({kDay + 4}, 25);
    Token emitter = make_token({kDay}, 26);
    for (std::uint32_t i = 0; i < 4; ++i) {
        ObservedPayload p = heard_from(emitter, {kDay + i});
        if (i % 2 == 0) p.rssi_hint = -52 - static_cast<int>(i);
        CHECK(receiver.observe(p) == ObserveOutcome::Stored);
    }
    receiver.tick({kDay + 50}, rng);
    CHECK(receiver.match_diagnosis_keys(unsigned_set(emitter, {kDay + 50})).status ==
          MatchOutcome::Status::Matched);

    const Bytes snap = receiver.snapshot();
    Token restored = Token::restore(snap);
    CHECK(restored.salt().label == receiver.salt().label);
    CHECK(restored.salt().salt_bytes == receiver.salt().salt_bytes);
    CHECK(restored.clock() == receiver.clock());
    CHECK(restored.created_at() == receiver.created_at());
    CHECK(restored.exposed());
    CHECK(restored.exposure_label() == receiver.exposure_label());
    REQUIRE(restored.tek_history().size() == receiver.tek_history().size());
    CHECK(restored.current_tek() == receiver.current_tek());
    REQUIRE(restored.payload_store().size() == receiver.payload_store().size());
    for (std::size_t i = 0; i < restored.payload_store().size(); ++i) {
        CHECK(restored.payload_store()[i].rpi_bytes == receiver.payload_store()[i].rpi_bytes);
        CHECK(restored.payload_store()[i].heard_at == receiver.payload_store()[i].heard_at);
        CHECK(restored.payload_store()[i].rssi_hint == receiver.payload_store()[i].rssi_hint);
    }
    // The restored index answers queries, not just the restored vectors.
    CHECK(restored.last_rssi_for(receiver.payload_store()[0].rpi_bytes) ==
          receiver.last_rssi_for(receiver.payload_store()[0].rpi_bytes));
    CHECK(restored.match_diagnosis_keys(unsigned_set(emitter, {kDay + 50})).events.size() == 4);

    // The snapshot is identical when nothing changed.
    CHECK(restored.snapshot() == snap);
}

TEST_CASE("corrupt snapshots are rejected") {
    const Token token = make_token({kDay}, 27);
    const Bytes snap = token.snapshot();

    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, snap.size() / 2, snap.size() - 1}) {
        Bytes truncated(snap.begin(), snap.begin() + cut);
        CHECK_THROWS_AS((void)Token::restore(truncated), DecodeError);
    }

    Bytes versioned = snap;
    versioned[4] = 0x7f;  // version byte sits after the length prefix
    CHECK_THROWS_AS((void)Token::restore(versioned), DecodeError);

    Bytes extended = snap;
    extended.push_back(0);
    CHECK_THROWS_AS((void)Token::restore(extended), DecodeError);
}
