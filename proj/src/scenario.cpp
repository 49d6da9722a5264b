#include "tracer/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tracer/crypto.hpp"

namespace tracer {
namespace {

using nlohmann::json;

std::string join_problems(const std::vector<std::string>& problems) {
    std::ostringstream out;
    out << "invalid scenario:";
    for (const auto& p : problems) out << "\n  - " << p;
    return out.str();
}

/// Accumulates schema violations so one pass reports them all.
struct Checker {
    std::vector<std::string> problems;

    void fail(const std::string& message) { problems.push_back(message); }

    bool require_keys(const json& obj, const std::string& where,
                      const std::set<std::string>& required,
                      const std::set<std::string>& optional) {
        bool ok = true;
        for (const auto& [key, value] : obj.items()) {
            (void)value;
            if (!required.contains(key) && !optional.contains(key)) {
                fail(where + ": unknown field '" + key + "'");
                ok = false;
            }
        }
        for (const auto& key : required) {
            if (!obj.contains(key)) {
                fail(where + ": missing field '" + key + "'");
                ok = false;
            }
        }
        return ok;
    }

    bool unsigned_field(const json& obj, const std::string& where, const std::string& key,
                        std::uint64_t& out, std::uint64_t max = UINT64_MAX) {
        if (!obj.contains(key)) return false;
        const json& v = obj.at(key);
        if (!v.is_number_unsigned()) {
            fail(where + "." + key + ": expected an unsigned integer");
            return false;
        }
        std::uint64_t value = v.get<std::uint64_t>();
        if (value > max) {
            fail(where + "." + key + ": exceeds " + std::to_string(max));
            return false;
        }
        out = value;
        return true;
    }

    bool double_field(const json& obj, const std::string& where, const std::string& key,
                      double& out) {
        if (!obj.contains(key)) return false;
        const json& v = obj.at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            fail(where + "." + key + ": expected a finite number");
            return false;
        }
        out = v.get<double>();
        return true;
    }

    bool string_field(const json& obj, const std::string& where, const std::string& key,
                      std::string& out) {
        if (!obj.contains(key)) return false;
        const json& v = obj.at(key);
        if (!v.is_string() || v.get<std::string>().empty()) {
            fail(where + "." + key + ": expected a non-empty string");
            return false;
        }
        out = v.get<std::string>();
        return true;
    }
};

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

std::pair<double, double> TokenSpec::position_at(std::uint32_t t) const {
    const Waypoint* current = &script.front();
    for (const Waypoint& wp : script) {
        if (wp.t > t) break;
        current = &wp;
    }
    return {current->x, current->y};
}

const TokenSpec* Scenario::find_token(const std::string& id) const {
    for (const TokenSpec& spec : tokens) {
        if (spec.id == id) return &spec;
    }
    return nullptr;
}

Scenario parse_scenario(const std::string& json_text) {
    json doc = json::parse(json_text);  // malformed text raises here

    Checker check;
    Scenario out;
    if (!doc.is_object()) {
        throw ScenarioError({"scenario: expected a top-level object"});
    }
    check.require_keys(doc, "scenario", {"seed", "duration", "servers", "tokens"},
                       {"start_unix", "beacon_interval", "fetch_interval", "radius",
                        "packet_loss", "salts", "events"});

    check.unsigned_field(doc, "scenario", "seed", out.seed);
    check.unsigned_field(doc, "scenario", "start_unix", out.start_unix);
    std::uint64_t duration = 0;
    if (check.unsigned_field(doc, "scenario", "duration", duration, UINT32_MAX)) {
        out.duration = static_cast<std::uint32_t>(duration);
    }
    std::uint64_t beacon = out.beacon_interval;
    if (check.unsigned_field(doc, "scenario", "beacon_interval", beacon, UINT32_MAX)) {
        if (beacon == 0) {
            check.fail("scenario.beacon_interval: must be at least 1 second");
        } else {
            out.beacon_interval = static_cast<std::uint32_t>(beacon);
        }
    }
    std::uint64_t fetch = out.fetch_interval;
    if (check.unsigned_field(doc, "scenario", "fetch_interval", fetch, UINT32_MAX)) {
        if (fetch == 0) {
            check.fail("scenario.fetch_interval: must be at least 1 second");
        } else {
            out.fetch_interval = static_cast<std::uint32_t>(fetch);
        }
    }
    if (check.double_field(doc, "scenario", "radius", out.radius) && out.radius <= 0.0) {
        check.fail("scenario.radius: must be positive");
    }
    if (check.double_field(doc, "scenario", "packet_loss", out.packet_loss) &&
        (out.packet_loss < 0.0 || out.packet_loss > 1.0)) {
        check.fail("scenario.packet_loss: must lie in [0, 1]");
    }

    // The whole run must fit the 32-bit interval counter.
    const std::uint64_t end_unix = out.start_unix + out.duration;
    if (end_unix / kIntervalSeconds > UINT32_MAX) {
        check.fail("scenario.start_unix: start_unix + duration overflows the interval counter");
    }

    // Salt registry: label -> hex bytes; distinct labels must be distinct
    // subnetworks, i.e. distinct bytes.
    if (doc.contains("salts")) {
        const json& salts = doc.at("salts");
        if (!salts.is_object()) {
            check.fail("scenario.salts: expected an object of label -> hex string");
        } else {
            for (const auto& [label, value] : salts.items()) {
                const std::string where = "scenario.salts." + label;
                if (label.empty()) {
                    check.fail("scenario.salts: empty label");
                    continue;
                }
                if (!value.is_string()) {
                    check.fail(where + ": expected a hex string");
                    continue;
                }
                Bytes bytes;
                try {
                    bytes = from_hex(value.get<std::string>());
                } catch (const DecodeError&) {
                    check.fail(where + ": not valid hex");
                    continue;
                }
                if (bytes.size() > kMaxSaltLen) {
                    check.fail(where + ": longer than " + std::to_string(kMaxSaltLen) +
                               " bytes");
                    continue;
                }
                for (const auto& [other, other_bytes] : out.salts) {
                    if (other_bytes == bytes) {
                        check.fail("scenario.salts: '" + other + "' and '" + label +
                                   "' carry identical bytes");
                    }
                }
                out.salts.emplace(label, std::move(bytes));
            }
        }
    }

    // Server topology.
    std::set<NodeId> node_ids;
    if (doc.contains("servers")) {
        const json& servers = doc.at("servers");
        if (!servers.is_object() ||
            !check.require_keys(servers, "scenario.servers", {"nodes"}, {"edges"})) {
            if (!servers.is_object()) {
                check.fail("scenario.servers: expected an object with 'nodes' and 'edges'");
            }
        } else {
            const json& nodes = servers.at("nodes");
            if (!nodes.is_array() || nodes.empty()) {
                check.fail("scenario.servers.nodes: expected a non-empty array of node ids");
            } else {
                for (std::size_t i = 0; i < nodes.size(); ++i) {
                    if (!nodes[i].is_number_unsigned()) {
                        check.fail("scenario.servers.nodes[" + std::to_string(i) +
                                   "]: expected an unsigned id");
                        continue;
                    }
                    NodeId id = nodes[i].get<NodeId>();
                    if (!node_ids.insert(id).second) {
                        check.fail("scenario.servers.nodes: duplicate id " + std::to_string(id));
                        continue;
                    }
                    out.topology.nodes.push_back(id);
                }
            }
            if (servers.contains("edges")) {
                const json& edges = servers.at("edges");
                if (!edges.is_array()) {
                    check.fail("scenario.servers.edges: expected an array of [a, b] pairs");
                } else {
                    for (std::size_t i = 0; i < edges.size(); ++i) {
                        const std::string where =
                            "scenario.servers.edges[" + std::to_string(i) + "]";
                        const json& e = edges[i];
                        if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() ||
                            !e[1].is_number_unsigned()) {
                            check.fail(where + ": expected [a, b] with unsigned ids");
                            continue;
                        }
                        NodeId a = e[0].get<NodeId>();
                        NodeId b = e[1].get<NodeId>();
                        if (a == b) {
                            check.fail(where + ": self-loop on node " + std::to_string(a));
                            continue;
                        }
                        if (!node_ids.contains(a) || !node_ids.contains(b)) {
                            check.fail(where + ": endpoint not in servers.nodes");
                            continue;
                        }
                        out.topology.edges.emplace_back(a, b);
                    }
                }
            }
        }
    }

    // Tokens.
    std::set<std::string> token_ids;
    if (doc.contains("tokens")) {
        const json& tokens = doc.at("tokens");
        if (!tokens.is_array()) {
            check.fail("scenario.tokens: expected an array");
        } else {
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                const std::string where = "scenario.tokens[" + std::to_string(i) + "]";
                const json& tok = tokens[i];
                if (!tok.is_object()) {
                    check.fail(where + ": expected an object");
                    continue;
                }
                check.require_keys(tok, where, {"id", "salt", "home", "script"}, {});
                TokenSpec spec;
                if (check.string_field(tok, where, "id", spec.id)) {
                    if (!token_ids.insert(spec.id).second) {
                        check.fail(where + ".id: duplicate token id '" + spec.id + "'");
                    }
                }
                if (check.string_field(tok, where, "salt", spec.salt_label) &&
                    !out.salts.contains(spec.salt_label)) {
                    check.fail(where + ".salt: unknown salt label '" + spec.salt_label + "'");
                }
                std::uint64_t home = 0;
                if (check.unsigned_field(tok, where, "home", home)) {
                    spec.home = home;
                    if (!node_ids.contains(spec.home)) {
                        check.fail(where + ".home: node " + std::to_string(home) +
                                   " not in servers.nodes");
                    }
                }
                if (tok.contains("script")) {
                    const json& script = tok.at("script");
                    if (!script.is_array() || script.empty()) {
                        check.fail(where + ".script: expected a non-empty waypoint array");
                    } else {
                        for (std::size_t w = 0; w < script.size(); ++w) {
                            const std::string wwhere =
                                where + ".script[" + std::to_string(w) + "]";
                            const json& wp_json = script[w];
                            if (!wp_json.is_object() ||
                                !check.require_keys(wp_json, wwhere, {"t", "x", "y"}, {})) {
                                continue;
                            }
                            Waypoint wp;
                            std::uint64_t wt = 0;
                            check.unsigned_field(wp_json, wwhere, "t", wt, UINT32_MAX);
                            wp.t = static_cast<std::uint32_t>(wt);
                            check.double_field(wp_json, wwhere, "x", wp.x);
                            check.double_field(wp_json, wwhere, "y", wp.y);
                            if (w == 0 && wp.t != 0) {
                                check.fail(wwhere + ".t: first waypoint must start at t = 0");
                            }
                            if (!spec.script.empty() && wp.t <= spec.script.back().t) {
                                check.fail(wwhere + ".t: waypoint times must be increasing");
                            }
                            spec.script.push_back(wp);
                        }
                    }
                }
                out.tokens.push_back(std::move(spec));
            }
        }
    }

    // Scripted events.
    if (doc.contains("events")) {
        const json& events = doc.at("events");
        if (!events.is_array()) {
            check.fail("scenario.events: expected an array");
        } else {
            for (std::size_t i = 0; i < events.size(); ++i) {
                const std::string where = "scenario.events[" + std::to_string(i) + "]";
                const json& ev = events[i];
                if (!ev.is_object()) {
                    check.fail(where + ": expected an object");
                    continue;
                }
                ScriptedEvent event;
                const bool is_diagnose = ev.contains("diagnose");
                const bool is_reset = ev.contains("reset");
                if (is_diagnose == is_reset) {
                    check.fail(where + ": expected exactly one of 'diagnose' or 'reset'");
                    continue;
                }
                if (is_diagnose) {
                    check.require_keys(ev, where, {"t", "diagnose", "provider"}, {"node"});
                    event.kind = ScriptedEvent::Kind::Diagnose;
                    check.string_field(ev, where, "diagnose", event.token_id);
                    check.string_field(ev, where, "provider", event.provider);
                    std::uint64_t node = 0;
                    if (check.unsigned_field(ev, where, "node", node)) {
                        if (!node_ids.contains(node)) {
                            check.fail(where + ".node: node " + std::to_string(node) +
                                       " not in servers.nodes");
                        }
                        event.node = node;
                    }
                } else {
                    check.require_keys(ev, where, {"t", "reset"}, {});
                    event.kind = ScriptedEvent::Kind::Reset;
                    check.string_field(ev, where, "reset", event.token_id);
                }
                std::uint64_t t = 0;
                if (check.unsigned_field(ev, where, "t", t, UINT32_MAX)) {
                    event.t = static_cast<std::uint32_t>(t);
                    if (event.t >= out.duration) {
                        check.fail(where + ".t: at or beyond scenario duration");
                    }
                }
                if (!event.token_id.empty() && !token_ids.contains(event.token_id)) {
                    check.fail(where + ": unknown token '" + event.token_id + "'");
                }
                out.events.push_back(std::move(event));
            }
        }
    }

    if (!check.problems.empty()) throw ScenarioError(std::move(check.problems));

    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const ScriptedEvent& a, const ScriptedEvent& b) { return a.t < b.t; });
    return out;
}

std::array<std::uint8_t, 32> config_digest(const Scenario& scenario) {
    json doc;
    doc["seed"] = scenario.seed;
    doc["start_unix"] = scenario.start_unix;
    doc["duration"] = scenario.duration;
    doc["beacon_interval"] = scenario.beacon_interval;
    doc["fetch_interval"] = scenario.fetch_interval;
    doc["radius"] = scenario.radius;
    doc["packet_loss"] = scenario.packet_loss;
    json salts = json::object();
    for (const auto& [label, bytes] : scenario.salts) salts[label] = to_hex(bytes);
    doc["salts"] = std::move(salts);
    json nodes = json::array();
    for (NodeId id : scenario.topology.nodes) nodes.push_back(id);
    json edges = json::array();
    for (const auto& [a, b] : scenario.topology.edges) edges.push_back(json::array({a, b}));
    doc["servers"] = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
    json tokens = json::array();
    for (const TokenSpec& spec : scenario.tokens) {
        json script = json::array();
        for (const Waypoint& wp : spec.script) {
            script.push_back({{"t", wp.t}, {"x", wp.x}, {"y", wp.y}});
        }
        tokens.push_back({{"id", spec.id},
                          {"salt", spec.salt_label},
                          {"home", spec.home},
                          {"script", std::move(script)}});
    }
    doc["tokens"] = std::move(tokens);
    json events = json::array();
    for (const ScriptedEvent& event : scenario.events) {
        json ev{{"t", event.t}};
        if (event.kind == ScriptedEvent::Kind::Diagnose) {
            ev["diagnose"] = event.token_id;
            ev["provider"] = event.provider;
            if (event.node) ev["node"] = *event.node;
        } else {
            ev["reset"] = event.token_id;
        }
        events.push_back(std::move(ev));
    }
    doc["events"] = std::move(events);

    const std::string canonical = doc.dump();
    return sha256(
        std::span(reinterpret_cast<const std::uint8_t*>(canonical.data()), canonical.size()));
}

}  // namespace tracer
