#include "tracer/sim.hpp"

#include <cmath>
#include <optional>
#include <ostream>

#include <json.hpp>

#include "tracer/diagnosis.hpp"
#include "tracer/token.hpp"
#include "tracer/transcript.hpp"

namespace tracer {
namespace {

using nlohmann::json;

struct SimToken {
    const TokenSpec* spec;
    Token token;
    DeterministicRandom rng;
    std::uint64_t fetch_cursor = 0;
};

/// Log-distance received-power sketch. Stored with observations for
/// completeness but never serialized and never consulted by matching, so
/// libm rounding differences cannot leak into transcripts.
int rssi_hint(double distance) {
    const double d = std::max(distance, 0.05);
    return static_cast<int>(std::lround(-40.0 - 20.0 * std::log10(d)));
}

}  // namespace

std::vector<std::string> RunSummary::notified_tokens() const {
    std::vector<std::string> out;
    out.reserve(first_notified.size());
    for (const auto& [id, t] : first_notified) {
        (void)t;
        out.push_back(id);
    }
    return out;  // map iteration is already sorted
}

RunSummary run_scenario(const Scenario& scenario, std::ostream& out) {
    RunSummary summary;
    TranscriptWriter writer(out);

    const IntervalNumber interval0 = interval_number(scenario.start_unix);

    // Provider keypairs are derived from the scenario seed, one substream
    // per label, so signatures reproduce bit-for-bit.
    std::map<std::string, ProviderKeypair> providers;
    ProviderRegistry registry;
    for (const ScriptedEvent& event : scenario.events) {
        if (event.kind != ScriptedEvent::Kind::Diagnose) continue;
        if (providers.contains(event.provider)) continue;
        DeterministicRandom rng(mix_seed(scenario.seed, "provider:" + event.provider));
        std::array<std::uint8_t, 32> seed_bytes{};
        rng.fill(seed_bytes);
        ProviderKeypair keypair = keypair_from_seed(seed_bytes);
        registry.add(keypair.public_key);
        providers.emplace(event.provider, keypair);
    }

    ServerNetwork network(scenario.topology, registry);

    std::vector<SimToken> tokens;
    tokens.reserve(scenario.tokens.size());
    for (const TokenSpec& spec : scenario.tokens) {
        DeterministicRandom rng(mix_seed(scenario.seed, "token:" + spec.id));
        SubnetworkSalt salt{spec.salt_label, scenario.salts.at(spec.salt_label)};
        Token token(std::move(salt), interval0, rng);
        tokens.push_back(SimToken{&spec, std::move(token), std::move(rng)});
    }

    DeterministicRandom loss_rng(mix_seed(scenario.seed, "loss"));

    writer.write(json{{"kind", "header"},
                      {"version", 1},
                      {"seed", scenario.seed},
                      {"config_sha256", to_hex(config_digest(scenario))},
                      {"start_unix", scenario.start_unix},
                      {"duration", scenario.duration},
                      {"beacon_interval", scenario.beacon_interval},
                      {"fetch_interval", scenario.fetch_interval},
                      {"radius", scenario.radius},
                      {"packet_loss", scenario.packet_loss},
                      {"tokens", scenario.tokens.size()},
                      {"nodes", scenario.topology.nodes.size()}});
    for (const SimToken& tok : tokens) {
        writer.write(json{{"kind", "token"},
                          {"id", tok.spec->id},
                          {"salt", tok.spec->salt_label},
                          {"salt_hex", to_hex(scenario.salts.at(tok.spec->salt_label))},
                          {"home", tok.spec->home},
                          {"created_interval", interval0.value}});
    }

    // Uploads by digest, for latency accounting at notify time.
    std::map<std::string, std::uint32_t> upload_times;

    IntervalNumber current = interval0;
    std::size_t next_event = 0;
    const double radius2 = scenario.radius * scenario.radius;

    for (std::uint32_t t = 0; t < scenario.duration; ++t) {
        const IntervalNumber now = interval_number(scenario.start_unix + t);
        if (now != current) {
            for (SimToken& tok : tokens) tok.token.tick(now, tok.rng);
            current = now;
        }

        // Beacon round: every token broadcasts, every other token within
        // the radius hears it unless the loss draw kills that delivery.
        if (t % scenario.beacon_interval == 0) {
            std::vector<std::pair<double, double>> pos(tokens.size());
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                pos[i] = tokens[i].spec->position_at(t);
            }
            std::vector<std::optional<Token::BeaconPayload>> beacon(tokens.size());
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                for (std::size_t j = 0; j < tokens.size(); ++j) {
                    if (i == j) continue;
                    const double dx = pos[i].first - pos[j].first;
                    const double dy = pos[i].second - pos[j].second;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 > radius2) continue;
                    // One draw per candidate delivery, unconditionally, so
                    // the same geometry consumes the same stream at every
                    // loss rate.
                    const bool delivered = loss_rng.next_unit() >= scenario.packet_loss;
                    if (!beacon[i]) beacon[i] = tokens[i].token.advertise(now);
                    const double distance = std::sqrt(d2);
                    ++summary.contact_records;
                    if (delivered) {
                        ++summary.delivered_contacts;
                        ObservedPayload payload{beacon[i]->rpi, beacon[i]->aem, now,
                                                rssi_hint(distance)};
                        if (tokens[j].token.observe(payload) == ObserveOutcome::Stored) {
                            ++summary.observations_stored;
                        }
                    }
                    writer.write(json{{"kind", "contact"},
                                      {"t", t},
                                      {"emitter", tokens[i].spec->id},
                                      {"receiver", tokens[j].spec->id},
                                      {"interval", now.value},
                                      {"distance", distance},
                                      {"delivered", delivered}});
                }
            }
        }

        // Download round: each token pulls everything new from its home
        // node and matches it. Runs before this second's submissions, so a
        // set is never visible in the instant it is uploaded.
        if (t % scenario.fetch_interval == 0) {
            for (SimToken& tok : tokens) {
                auto result = network.fetch(tok.spec->home, tok.fetch_cursor);
                tok.fetch_cursor = result.cursor;
                if (result.sets.empty()) continue;
                writer.write(json{{"kind", "fetch"},
                                  {"t", t},
                                  {"token", tok.spec->id},
                                  {"node", tok.spec->home},
                                  {"new_sets", result.sets.size()},
                                  {"cursor", result.cursor}});
                for (const DiagnosisKeySet& dk : result.sets) {
                    MatchOutcome outcome = tok.token.match_diagnosis_keys(dk);
                    if (outcome.status != MatchOutcome::Status::Matched) continue;
                    const std::string digest_hex = to_hex(digest(dk));
                    const auto* entry = network.node(tok.spec->home).find(digest(dk));
                    const std::uint64_t hops = entry ? entry->hop_count : 0;
                    const std::uint64_t latency =
                        t - static_cast<std::uint64_t>(upload_times.at(digest_hex));
                    writer.write(json{{"kind", "notify"},
                                      {"t", t},
                                      {"token", tok.spec->id},
                                      {"digest", digest_hex},
                                      {"events", outcome.events.size()},
                                      {"first_interval", outcome.events.front().interval.value},
                                      {"last_interval", outcome.events.back().interval.value},
                                      {"latency_seconds", latency},
                                      {"hops", hops}});
                    summary.notifications.push_back(RunSummary::Notification{
                        t, tok.spec->id, digest_hex, latency, hops, outcome.events.size()});
                    summary.first_notified.try_emplace(tok.spec->id, t);
                }
            }
        }

        // Scripted diagnoses and owner swaps.
        while (next_event < scenario.events.size() && scenario.events[next_event].t == t) {
            const ScriptedEvent& event = scenario.events[next_event++];
            SimToken* tok = nullptr;
            for (SimToken& candidate : tokens) {
                if (candidate.spec->id == event.token_id) tok = &candidate;
            }
            if (event.kind == ScriptedEvent::Kind::Reset) {
                tok->token.reinitialize(now, tok->rng);
                writer.write(json{{"kind", "reset"}, {"t", t}, {"token", tok->spec->id}});
                continue;
            }
            DiagnosisKeySet dk =
                sign(providers.at(event.provider), build_diagnosis_key_set(tok->token, now));
            const NodeId node = event.node.value_or(tok->spec->home);
            const SubmitResult result = network.submit(node, dk);
            const std::string digest_hex = to_hex(digest(dk));
            const std::uint32_t window_start = dk.teks.front().epoch.value;
            const std::uint32_t window_end = dk.teks.back().epoch.value + kRollingPeriod;
            writer.write(json{{"kind", "diagnose"},
                              {"t", t},
                              {"token", tok->spec->id},
                              {"provider", event.provider},
                              {"node", node},
                              {"digest", digest_hex},
                              {"teks", dk.teks.size()},
                              {"window_start", window_start},
                              {"window_end", window_end},
                              {"status", to_string(result.status)}});
            upload_times.try_emplace(digest_hex, t);
            summary.uploads.push_back(RunSummary::Upload{digest_hex, t, tok->spec->id, node,
                                                         to_string(result.status), window_start,
                                                         window_end});
        }

        // One relay hop per simulated second.
        network.propagate_step();
    }

    for (NodeId id : network.node_ids()) {
        const NodeMetrics& m = network.node(id).metrics();
        writer.write(json{{"kind", "node"},
                          {"id", id},
                          {"submits", m.submits_received},
                          {"relays_received", m.relays_received},
                          {"relays_sent", m.relays_sent},
                          {"relay_bytes", m.relay_bytes_sent},
                          {"fetch_responses", m.fetch_responses_sent},
                          {"fetch_bytes", m.fetch_bytes_sent},
                          {"rejected", m.rejected},
                          {"log_entries", network.node(id).max_sequence()},
                          {"messages", m.messages()}});
    }
    const ThroughputReport throughput = throughput_report(network);
    for (const auto& upload : throughput.uploads) {
        json histogram = json::object();
        for (const auto& [hop, count] : upload.nodes_at_hop) {
            histogram[std::to_string(hop)] = count;
        }
        writer.write(json{
            {"kind", "hops"}, {"digest", upload.digest_hex}, {"histogram", std::move(histogram)}});
    }

    summary.records_written = writer.records_written();
    writer.finish();
    return summary;
}

}  // namespace tracer
