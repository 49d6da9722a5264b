#include <doctest.h>

#include <fstream>
#include <sstream>

#include "tracer/sim.hpp"
#include "tracer/transcript.hpp"

using namespace tracer;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing fixture ", path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Scenario load_fixture(const std::string& name) {
    return parse_scenario(slurp(std::string(TRACER_FIXTURE_DIR) + "/" + name));
}

struct RunOutput {
    RunSummary summary;
    std::string transcript_text;
};

RunOutput run(const Scenario& scenario) {
    std::ostringstream out;
    RunSummary summary = run_scenario(scenario, out);
    return {std::move(summary), out.str()};
}

/// Every problem string the parser reports for a scenario document.
std::vector<std::string> problems_of(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const ScenarioError& e) {
        return e.problems();
    }
    return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
    for (const auto& p : problems) {
        if (p.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("scenario validation names every offending field") {
    // A document that is wrong in several independent ways at once.
    const std::string text = R"({
        "seed": 1,
        "duration": 100,
        "beacon_interval": 0,
        "packet_loss": 1.5,
        "surprise": true,
        "salts": {"covid19": "", "alias": ""},
        "servers": {"nodes": [1, 1], "edges": [[1, 1], [1, 9]]},
        "tokens": [
            {"id": "a", "salt": "nope", "home": 7,
             "script": [{"t": 5, "x": 0, "y": 0}, {"t": 5, "x": 1, "y": 1}]},
            {"id": "a", "salt": "covid19", "home": 1, "script": [{"t": 0, "x": 0, "y": 0}]}
        ],
        "events": [
            {"t": 100, "diagnose": "a", "provider": "p"},
            {"t": 0, "diagnose": "ghost", "provider": "p", "reset": "a"}
        ]
    })";
    const auto problems = problems_of(text);
    CHECK(mentions(problems, "unknown field 'surprise'"));
    CHECK(mentions(problems, "beacon_interval"));
    CHECK(mentions(problems, "packet_loss"));
    CHECK(mentions(problems, "identical bytes"));
    CHECK(mentions(problems, "duplicate id 1"));
    CHECK(mentions(problems, "self-loop"));
    CHECK(mentions(problems, "endpoint not in servers.nodes"));
    CHECK(mentions(problems, "unknown salt label 'nope'"));
    CHECK(mentions(problems, "node 7 not in servers.nodes"));
    CHECK(mentions(problems, "first waypoint must start at t = 0"));
    CHECK(mentions(problems, "waypoint times must be increasing"));
    CHECK(mentions(problems, "duplicate token id 'a'"));
    CHECK(mentions(problems, "at or beyond scenario duration"));
    CHECK(mentions(problems, "exactly one of 'diagnose' or 'reset'"));
    CHECK(problems.size() >= 14);

    // what() carries the same list, one line per problem.
    try {
        (void)parse_scenario(text);
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& e) {
        CHECK(std::string(e.what()).find("invalid scenario:") == 0);
        CHECK(std::string(e.what()).find("surprise") != std::string::npos);
    }

    // Missing required keys are reported before anything else can run.
    CHECK(mentions(problems_of("{}"), "missing field 'seed'"));
    CHECK(mentions(problems_of("{}"), "missing field 'tokens'"));

    // Structurally broken JSON is the parser's error, not a schema report.
    CHECK_THROWS_AS((void)parse_scenario("{nope"), nlohmann::json::parse_error);
}

TEST_CASE("fixture scenarios all validate") {
    for (const char* name :
         {"two_tokens_contact.json", "two_tokens_far.json", "two_salts.json",
          "partition.json", "swap_reset.json", "tree_85.json", "e2e_20.json"}) {
        CAPTURE(name);
        CHECK_NOTHROW((void)load_fixture(name));
    }
}

TEST_CASE("movement scripts are piecewise constant") {
    const Scenario scenario = parse_scenario(R"({
        "seed": 1, "duration": 100,
        "salts": {"covid19": ""},
        "servers": {"nodes": [1]},
        "tokens": [{"id": "a", "salt": "covid19", "home": 1,
                    "script": [{"t": 0, "x": 0, "y": 0}, {"t": 10, "x": 5, "y": -3}]}]
    })");
    const TokenSpec& spec = scenario.tokens[0];
    CHECK(spec.position_at(0) == std::pair{0.0, 0.0});
    CHECK(spec.position_at(9) == std::pair{0.0, 0.0});
    CHECK(spec.position_at(10) == std::pair{5.0, -3.0});
    CHECK(spec.position_at(99) == std::pair{5.0, -3.0});
    CHECK(scenario.find_token("a") == &spec);
    CHECK(scenario.find_token("b") == nullptr);
}

TEST_CASE("config digest pins the effective configuration") {
    const std::string text = slurp(std::string(TRACER_FIXTURE_DIR) + "/two_tokens_contact.json");
    const Scenario first = parse_scenario(text);
    const Scenario second = parse_scenario(text);
    CHECK(config_digest(first) == config_digest(second));

    Scenario reseeded = parse_scenario(text);
    reseeded.seed += 1;
    CHECK(config_digest(reseeded) != config_digest(first));
}

TEST_CASE("two tokens a metre apart: contact, upload, one-cycle notification") {
    const Scenario scenario = load_fixture("two_tokens_contact.json");
    const auto [summary, text] = run(scenario);

    // 1440 beacon rounds, both directions, zero loss.
    CHECK(summary.contact_records == 2880);
    CHECK(summary.delivered_contacts == 2880);
    // Each token stores one payload per rotation interval of exposure; the
    // 7200s run touches 13 intervals.
    CHECK(summary.observations_stored == 26);

    REQUIRE(summary.uploads.size() == 1);
    CHECK(summary.uploads[0].token_id == "alice");
    CHECK(summary.uploads[0].t == 3600);
    CHECK(summary.uploads[0].node == 1);
    CHECK(summary.uploads[0].status == "accepted");
    CHECK(summary.uploads[0].window_end - summary.uploads[0].window_start == kRollingPeriod);

    // bob is notified at the first fetch after the upload, never alice.
    REQUIRE(summary.notifications.size() == 1);
    const auto& n = summary.notifications[0];
    CHECK(n.token_id == "bob");
    CHECK(n.t == 3660);
    CHECK(n.latency_seconds == scenario.fetch_interval);
    CHECK(n.hops == 0);
    CHECK(n.events == 7);  // intervals shared before the upload
    CHECK(summary.notified_tokens() == std::vector<std::string>{"bob"});
    CHECK(summary.first_notified.at("bob") == 3660);

    // The transcript reads back verified and is consistent with the summary.
    std::istringstream in(text);
    const Transcript transcript = read_transcript(in);
    CHECK(transcript.records.size() == summary.records_written);
    CHECK(transcript.of_kind("header").size() == 1);
    CHECK(transcript.of_kind("token").size() == 2);
    CHECK(transcript.of_kind("contact").size() == 2880);
    CHECK(transcript.of_kind("diagnose").size() == 1);
    CHECK(transcript.of_kind("notify").size() == 1);
    CHECK(transcript.of_kind("node").size() == 1);
    CHECK(transcript.of_kind("hops").size() == 1);

    const nlohmann::json& header = *transcript.of_kind("header")[0];
    CHECK(header.at("seed") == scenario.seed);
    CHECK(header.at("config_sha256") == to_hex(config_digest(scenario)));

    const nlohmann::json& notify = *transcript.of_kind("notify")[0];
    CHECK(notify.at("token") == "bob");
    CHECK(notify.at("latency_seconds") == 60);

    // No distance field anywhere carries an rssi; radio strength is a hint,
    // not transcript material.
    CHECK(text.find("rssi") == std::string::npos);
}

TEST_CASE("the same scenario produces byte-identical transcripts") {
    const Scenario scenario = load_fixture("two_tokens_contact.json");
    const auto first = run(scenario);
    const auto second = run(scenario);
    CHECK(first.transcript_text == second.transcript_text);

    // A different seed produces a different transcript.
    Scenario reseeded = scenario;
    reseeded.seed += 1;
    CHECK(run(reseeded).transcript_text != first.transcript_text);
}

TEST_CASE("tokens out of radius never hear each other") {
    const auto [summary, text] = run(load_fixture("two_tokens_far.json"));
    CHECK(summary.contact_records == 0);
    CHECK(summary.delivered_contacts == 0);
    CHECK(summary.observations_stored == 0);
    REQUIRE(summary.uploads.size() == 1);
    CHECK(summary.uploads[0].status == "accepted");
    CHECK(summary.notifications.empty());
    CHECK(summary.first_notified.empty());
}

TEST_CASE("tokens on different subnetworks share space but never notify") {
    const auto [summary, text] = run(load_fixture("two_salts.json"));
    // Proximity and radio are salt-blind: contacts and observations happen.
    CHECK(summary.contact_records == 2880);
    CHECK(summary.delivered_contacts == 2880);
    CHECK(summary.observations_stored == 26);
    REQUIRE(summary.uploads.size() == 1);
    CHECK(summary.uploads[0].status == "accepted");
    // Matching is not: carol's token drops alice's key set wholesale.
    CHECK(summary.notifications.empty());
}

TEST_CASE("a partitioned home node never delivers the upload") {
    const auto [summary, text] = run(load_fixture("partition.json"));
    CHECK(summary.contact_records > 0);
    REQUIRE(summary.uploads.size() == 1);
    CHECK(summary.uploads[0].status == "accepted");
    CHECK(summary.notifications.empty());

    // The upload exists on exactly one of the two nodes.
    std::istringstream in(text);
    const Transcript transcript = read_transcript(in);
    std::uint64_t total_log_entries = 0;
    for (const auto* node : transcript.of_kind("node")) {
        total_log_entries += node->at("log_entries").get<std::uint64_t>();
    }
    CHECK(total_log_entries == 1);
}

TEST_CASE("an owner reset severs pre-reset observations from post-reset keys") {
    const auto [summary, text] = run(load_fixture("swap_reset.json"));
    // Plenty of contact happened before the owner change...
    CHECK(summary.contact_records == 720);
    CHECK(summary.observations_stored > 0);
    REQUIRE(summary.uploads.size() == 1);
    CHECK(summary.uploads[0].status == "accepted");
    // ...but the post-reset key set shares nothing with what bob heard.
    CHECK(summary.notifications.empty());

    std::istringstream in(text);
    const Transcript transcript = read_transcript(in);
    CHECK(transcript.of_kind("reset").size() == 1);
    CHECK(transcript.of_kind("reset")[0]->at("token") == "alice");
}

TEST_CASE("packet loss only ever removes contacts and notifications") {
    const Scenario base = load_fixture("two_tokens_contact.json");
    std::uint64_t previous_delivered = UINT64_MAX;
    std::size_t previous_notified = SIZE_MAX;
    for (double loss : {0.0, 0.5, 0.95}) {
        CAPTURE(loss);
        Scenario scenario = base;
        scenario.packet_loss = loss;
        const auto [summary, text] = run(scenario);
        // The candidate set is pure geometry, identical at every loss rate.
        CHECK(summary.contact_records == 2880);
        CHECK(summary.delivered_contacts <= previous_delivered);
        CHECK(summary.notified_tokens().size() <= previous_notified);
        previous_delivered = summary.delivered_contacts;
        previous_notified = summary.notified_tokens().size();
        if (loss == 0.0) CHECK(summary.delivered_contacts == 2880);
        if (loss > 0.0) CHECK(summary.delivered_contacts < 2880);
    }
}

TEST_CASE("notification hops reflect the relay distance to the home node") {
    const Scenario scenario = parse_scenario(R"({
        "seed": 3, "duration": 1200, "beacon_interval": 5, "fetch_interval": 60,
        "salts": {"covid19": ""},
        "servers": {"nodes": [1, 2, 3], "edges": [[1, 2], [2, 3]]},
        "tokens": [
            {"id": "alice", "salt": "covid19", "home": 1, "script": [{"t": 0, "x": 0, "y": 0}]},
            {"id": "bob", "salt": "covid19", "home": 3, "script": [{"t": 0, "x": 1, "y": 0}]}
        ],
        "events": [{"t": 600, "diagnose": "alice", "provider": "clinic"}]
    })");
    const auto [summary, text] = run(scenario);
    REQUIRE(summary.notifications.size() == 1);
    CHECK(summary.notifications[0].token_id == "bob");
    CHECK(summary.notifications[0].hops == 2);
    // Two relay hops happen within the same 60s fetch window, so the
    // latency is still a single cycle.
    CHECK(summary.notifications[0].latency_seconds == 60);
}

TEST_CASE("repeat uploads of identical key sets deduplicate at the server") {
    const Scenario scenario = parse_scenario(R"({
        "seed": 4, "duration": 600, "beacon_interval": 5, "fetch_interval": 60,
        "salts": {"covid19": ""},
        "servers": {"nodes": [1]},
        "tokens": [
            {"id": "alice", "salt": "covid19", "home": 1, "script": [{"t": 0, "x": 0, "y": 0}]}
        ],
        "events": [
            {"t": 60, "diagnose": "alice", "provider": "clinic"},
            {"t": 60, "diagnose": "alice", "provider": "clinic"}
        ]
    })");
    const auto [summary, text] = run(scenario);
    REQUIRE(summary.uploads.size() == 2);
    CHECK(summary.uploads[0].status == "accepted");
    CHECK(summary.uploads[1].status == "duplicate");
    CHECK(summary.uploads[0].digest_hex == summary.uploads[1].digest_hex);
}
