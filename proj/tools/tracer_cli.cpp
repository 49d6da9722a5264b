// tracer: scenario runner, report printer and provider-key tooling for the
// tracer-token protocol artifact.
//
// Exit codes are a stable contract:
//   0 success, 1 usage (bad flags, missing files),
//   2 validation (well-formed input that violates the schema),
//   3 integrity (unparseable or corrupt input).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tracer/diagnosis.hpp"
#include "tracer/report.hpp"
#include "tracer/scenario.hpp"
#include "tracer/sim.hpp"
#include "tracer/transcript.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIntegrity = 3;

using nlohmann::json;

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

bool write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << content;
    return bool(out);
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override, const std::string& format) {
    const auto text = read_file(scenario_path);
    if (!text) {
        std::cerr << "error: cannot open scenario file " << scenario_path << "\n";
        return kExitUsage;
    }

    tracer::Scenario scenario;
    try {
        scenario = tracer::parse_scenario(*text);
    } catch (const tracer::ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const json::parse_error& e) {
        std::cerr << "error: scenario is not valid JSON: " << e.what() << "\n";
        return kExitIntegrity;
    }
    // The override replaces the scenario seed before the effective config
    // is hashed into the transcript header.
    if (seed_override) scenario.seed = *seed_override;

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::string transcript_path = (std::filesystem::path(out_dir) / "transcript.jsonl").string();
    {
        std::ofstream transcript_out(transcript_path, std::ios::binary);
        if (!transcript_out) {
            std::cerr << "error: cannot write " << transcript_path << "\n";
            return kExitUsage;
        }
        tracer::run_scenario(scenario, transcript_out);
    }

    const tracer::Transcript transcript = tracer::read_transcript_file(transcript_path);
    const bool records = format == "records";
    const std::string ext = records ? ".jsonl" : ".txt";
    const std::string latency_path = (std::filesystem::path(out_dir) / ("latency" + ext)).string();
    const std::string throughput_path =
        (std::filesystem::path(out_dir) / ("throughput" + ext)).string();
    if (!write_file(latency_path, records ? tracer::render_latency_records(transcript)
                                          : tracer::render_latency_human(transcript)) ||
        !write_file(throughput_path, records ? tracer::render_throughput_records(transcript)
                                             : tracer::render_throughput_human(transcript))) {
        std::cerr << "error: cannot write reports under " << out_dir << "\n";
        return kExitUsage;
    }

    const tracer::ReportSummary summary = tracer::summarize(transcript);
    if (records) {
        std::cout << json{{"kind", "run"},
                          {"transcript", transcript_path},
                          {"latency", latency_path},
                          {"throughput", throughput_path},
                          {"records", transcript.records.size()},
                          {"tokens", summary.tokens},
                          {"notified", summary.notified}}
                         .dump()
                  << "\n";
    } else {
        std::cout << "wrote " << transcript_path << " (" << transcript.records.size()
                  << " records), " << latency_path << ", " << throughput_path << "; notified "
                  << summary.notified << " of " << summary.tokens << " tokens\n";
    }
    return 0;
}

int cmd_keygen(const std::string& out_path) {
    const tracer::ProviderKeypair keypair = tracer::generate_provider_keypair();
    json doc{{"public", tracer::to_hex(keypair.public_key)},
             {"secret", tracer::to_hex(keypair.private_key)}};
    if (!write_file(out_path, doc.dump(2) + "\n")) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return kExitUsage;
    }
    std::cout << "wrote " << out_path << " (fingerprint "
              << tracer::ProviderRegistry::fingerprint(keypair.public_key) << ")\n";
    return 0;
}

/// Registry file: {"keys": ["<64 hex chars>", ...]} in add order.
std::vector<tracer::PublicKey> load_registry(const std::string& path, bool& exists) {
    std::vector<tracer::PublicKey> keys;
    const auto text = read_file(path);
    exists = text.has_value();
    if (!text) return keys;
    const json doc = json::parse(*text);
    for (const auto& entry : doc.at("keys")) {
        const tracer::Bytes bytes = tracer::from_hex(entry.get<std::string>());
        if (bytes.size() != 32) throw tracer::DecodeError("registry key is not 32 bytes");
        tracer::PublicKey key{};
        std::copy(bytes.begin(), bytes.end(), key.begin());
        keys.push_back(key);
    }
    return keys;
}

int cmd_registry_add(const std::string& key_path, const std::string& registry_path) {
    const auto text = read_file(key_path);
    if (!text) {
        std::cerr << "error: cannot open key file " << key_path << "\n";
        return kExitUsage;
    }
    tracer::PublicKey key{};
    try {
        const json doc = json::parse(*text);
        const tracer::Bytes bytes = tracer::from_hex(doc.at("public").get<std::string>());
        if (bytes.size() != 32) {
            std::cerr << "error: " << key_path << ": public key is not 32 bytes\n";
            return kExitValidation;
        }
        std::copy(bytes.begin(), bytes.end(), key.begin());
    } catch (const json::parse_error& e) {
        std::cerr << "error: " << key_path << " is not valid JSON: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const std::exception& e) {
        std::cerr << "error: " << key_path << ": " << e.what() << "\n";
        return kExitValidation;
    }

    bool exists = false;
    std::vector<tracer::PublicKey> keys;
    try {
        keys = load_registry(registry_path, exists);
    } catch (const json::parse_error& e) {
        std::cerr << "error: " << registry_path << " is not valid JSON: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const std::exception& e) {
        std::cerr << "error: " << registry_path << ": " << e.what() << "\n";
        return kExitValidation;
    }

    const std::string fingerprint = tracer::ProviderRegistry::fingerprint(key);
    for (const auto& existing : keys) {
        if (existing == key) {
            std::cout << fingerprint << " already registered, no change\n";
            return 0;
        }
    }
    keys.push_back(key);
    json list = json::array();
    for (const auto& k : keys) list.push_back(tracer::to_hex(k));
    if (!write_file(registry_path, json{{"keys", std::move(list)}}.dump(2) + "\n")) {
        std::cerr << "error: cannot write " << registry_path << "\n";
        return kExitUsage;
    }
    std::cout << "registered " << fingerprint << " (" << keys.size() << " total)\n";
    return 0;
}

int cmd_registry_list(const std::string& registry_path) {
    bool exists = false;
    std::vector<tracer::PublicKey> keys;
    try {
        keys = load_registry(registry_path, exists);
    } catch (const json::parse_error& e) {
        std::cerr << "error: " << registry_path << " is not valid JSON: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const std::exception& e) {
        std::cerr << "error: " << registry_path << ": " << e.what() << "\n";
        return kExitValidation;
    }
    for (const auto& key : keys) {
        std::cout << tracer::ProviderRegistry::fingerprint(key) << " " << tracer::to_hex(key)
                  << "\n";
    }
    return 0;
}

int cmd_report(const std::string& transcript_path, const std::string& format) {
    if (!std::filesystem::exists(transcript_path)) {
        std::cerr << "error: cannot open transcript " << transcript_path << "\n";
        return kExitUsage;
    }
    tracer::Transcript transcript;
    try {
        transcript = tracer::read_transcript_file(transcript_path);
    } catch (const tracer::IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIntegrity;
    }
    std::cout << (format == "records" ? tracer::render_records(transcript)
                                      : tracer::render_human(transcript));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tracer-token contact tracing artifact"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    std::string run_format = "human";
    CLI::App* run = app.add_subcommand("run", "execute a scenario and write its transcript");
    run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    std::uint64_t seed_value = 0;
    CLI::Option* seed_opt =
        run->add_option("--seed", seed_value, "override the scenario seed");
    run->add_option("--format", run_format, "report file format")
        ->check(CLI::IsMember({"human", "records"}));

    std::string keygen_out;
    CLI::App* keygen = app.add_subcommand("keygen", "generate a provider keypair file");
    keygen->add_option("--out", keygen_out, "keypair output path")->required();

    CLI::App* registry = app.add_subcommand("registry", "manage the provider-key registry");
    registry->require_subcommand(1);
    std::string key_path;
    std::string registry_path = "registry.json";
    CLI::App* registry_add = registry->add_subcommand("add", "register a provider public key");
    registry_add->add_option("--key", key_path, "keypair or public-key JSON file")->required();
    registry_add->add_option("--registry", registry_path, "registry file");
    CLI::App* registry_list = registry->add_subcommand("list", "print registered fingerprints");
    registry_list->add_option("--registry", registry_path, "registry file");

    std::string transcript_path;
    std::string report_format = "human";
    CLI::App* report = app.add_subcommand("report", "render reports from a transcript");
    report->add_option("--transcript", transcript_path, "transcript JSONL file")->required();
    report->add_option("--format", report_format, "output format")
        ->check(CLI::IsMember({"human", "records"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    if (seed_opt->count() > 0) seed_override = seed_value;

    try {
        if (run->parsed()) return cmd_run(scenario_path, out_dir, seed_override, run_format);
        if (keygen->parsed()) return cmd_keygen(keygen_out);
        if (registry_add->parsed()) return cmd_registry_add(key_path, registry_path);
        if (registry_list->parsed()) return cmd_registry_list(registry_path);
        if (report->parsed()) return cmd_report(transcript_path, report_format);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
