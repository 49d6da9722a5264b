#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracer/bytes.hpp"
#include "tracer/server.hpp"

namespace tracer {

/// Scenario rejection. Collects every offending field so an operator can
/// fix a file in one pass; what() joins them.
class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Position from `t` onward, until the next waypoint. Scripts are
/// piecewise-constant: tokens teleport at waypoints and sit still between
/// them.
struct Waypoint {
    std::uint32_t t = 0;
    double x = 0.0;
    double y = 0.0;
};

struct TokenSpec {
    std::string id;
    std::string salt_label;
    NodeId home = 0;  // server node this token submits to and fetches from
    std::vector<Waypoint> script;

    /// Position at simulated second `t` (last waypoint at or before t).
    std::pair<double, double> position_at(std::uint32_t t) const;
};

/// Timed script entry: either a diagnosis (build + sign + submit the
/// token's keys under `provider`) or an owner-change reset.
struct ScriptedEvent {
    enum class Kind { Diagnose, Reset };
    Kind kind = Kind::Diagnose;
    std::uint32_t t = 0;
    std::string token_id;
    std::string provider;          // diagnose only
    std::optional<NodeId> node;    // diagnose only; defaults to the token's home
};

struct Scenario {
    std::uint64_t seed = 0;
    std::uint64_t start_unix = 1600000000;  // 2020-09-13T12:26:40Z
    std::uint32_t duration = 0;             // simulated seconds
    std::uint32_t beacon_interval = 5;      // seconds between broadcast rounds
    std::uint32_t fetch_interval = 60;      // seconds between token downloads
    double radius = 2.5;                    // metres; hard geometric cutoff
    double packet_loss = 0.0;               // per-delivery drop probability
    std::map<std::string, Bytes> salts;     // label -> salt bytes (may be empty)
    Topology topology;
    std::vector<TokenSpec> tokens;
    std::vector<ScriptedEvent> events;      // sorted by t, file order on ties

    const TokenSpec* find_token(const std::string& id) const;
};

/// Parse and validate a scenario document. Malformed JSON raises the
/// parser's own error; a well-formed document that violates the schema
/// raises ScenarioError naming every offending field.
Scenario parse_scenario(const std::string& json_text);

/// SHA-256 over the canonical serialization of the effective scenario
/// (defaults filled in, seed overrides applied). Recorded in transcript
/// headers so a transcript pins the exact configuration that produced it.
std::array<std::uint8_t, 32> config_digest(const Scenario& scenario);

}  // namespace tracer
