#include "tracer/report.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace tracer {
namespace {

using nlohmann::json;

std::string short_digest(const std::string& hex) { return hex.substr(0, 16); }

}  // namespace

LatencyReport notification_latency(const Transcript& transcript) {
    LatencyReport report;

    std::map<std::string, std::string> salt_of_token;  // id -> salt hex
    for (const json* token : transcript.of_kind("token")) {
        salt_of_token[token->at("id")] = token->at("salt_hex");
    }

    std::set<std::string> notified;
    for (const json* notify : transcript.of_kind("notify")) {
        const std::string token = notify->at("token");
        if (!notified.insert(token).second) continue;
        LatencyReport::Row row;
        row.token = token;
        row.digest_hex = notify->at("digest");
        row.t = notify->at("t").get<std::uint64_t>();
        row.seconds = notify->at("latency_seconds").get<std::uint64_t>();
        row.hops = notify->at("hops").get<std::uint64_t>();
        ++report.seconds_histogram[row.seconds];
        ++report.hops_histogram[row.hops];
        report.first_notifications.push_back(std::move(row));
    }

    // Ground-truth prediction from the contact log and upload windows.
    std::set<std::string> predicted;
    for (const json* diagnose : transcript.of_kind("diagnose")) {
        if (diagnose->at("status").get_ref<const std::string&>() != "accepted") continue;
        const std::string emitter = diagnose->at("token");
        const std::uint64_t submit_t = diagnose->at("t").get<std::uint64_t>();
        const std::uint64_t window_start = diagnose->at("window_start").get<std::uint64_t>();
        const std::uint64_t window_end = diagnose->at("window_end").get<std::uint64_t>();
        const std::string& salt_hex = salt_of_token.at(emitter);
        for (const json* contact : transcript.of_kind("contact")) {
            if (!contact->at("delivered").get<bool>()) continue;
            if (contact->at("emitter").get_ref<const std::string&>() != emitter) continue;
            if (contact->at("t").get<std::uint64_t>() > submit_t) continue;
            const std::uint64_t interval = contact->at("interval").get<std::uint64_t>();
            if (interval < window_start || interval >= window_end) continue;
            const std::string receiver = contact->at("receiver");
            if (receiver == emitter || salt_of_token.at(receiver) != salt_hex) continue;
            predicted.insert(receiver);
        }
    }
    for (const std::string& token : predicted) {
        if (!notified.contains(token)) report.never_notified.push_back(token);
    }
    return report;
}

ReportSummary summarize(const Transcript& transcript) {
    ReportSummary summary;
    summary.tokens = transcript.of_kind("token").size();
    summary.uploads = transcript.of_kind("diagnose").size();
    std::set<std::string> contacted;
    for (const json* contact : transcript.of_kind("contact")) {
        ++summary.contact_records;
        if (contact->at("delivered").get<bool>()) {
            ++summary.delivered_contacts;
            contacted.insert(contact->at("receiver").get<std::string>());
        }
    }
    summary.contacted = contacted.size();
    std::set<std::string> notified;
    for (const json* notify : transcript.of_kind("notify")) {
        notified.insert(notify->at("token").get<std::string>());
    }
    summary.notified = notified.size();
    return summary;
}

ThroughputTables throughput_tables(const Transcript& transcript) {
    ThroughputTables tables;
    for (const json* node : transcript.of_kind("node")) {
        ThroughputTables::NodeRow row;
        row.node = node->at("id").get<std::uint64_t>();
        row.log_entries = node->at("log_entries").get<std::uint64_t>();
        row.submits = node->at("submits").get<std::uint64_t>();
        row.relays_received = node->at("relays_received").get<std::uint64_t>();
        row.relays_sent = node->at("relays_sent").get<std::uint64_t>();
        row.relay_bytes = node->at("relay_bytes").get<std::uint64_t>();
        row.fetch_responses = node->at("fetch_responses").get<std::uint64_t>();
        row.fetch_bytes = node->at("fetch_bytes").get<std::uint64_t>();
        row.rejected = node->at("rejected").get<std::uint64_t>();
        row.messages = node->at("messages").get<std::uint64_t>();
        tables.nodes.push_back(row);
    }
    for (const json* hops : transcript.of_kind("hops")) {
        ThroughputTables::UploadRow row;
        row.digest_hex = hops->at("digest");
        for (const auto& [hop, count] : hops->at("histogram").items()) {
            row.nodes_at_hop[std::stoull(hop)] = count.get<std::uint64_t>();
        }
        tables.uploads.push_back(std::move(row));
    }
    return tables;
}

std::string render_latency_human(const Transcript& transcript) {
    const ReportSummary summary = summarize(transcript);
    const LatencyReport latency = notification_latency(transcript);

    std::ostringstream out;
    out << "Run summary\n"
        << "  tokens " << summary.tokens << "   contacted " << summary.contacted
        << "   notified " << summary.notified << "   uploads " << summary.uploads << "\n"
        << "  contact records " << summary.contact_records << " (delivered "
        << summary.delivered_contacts << ")\n\n";

    out << "Notification latency (from submit to match)\n";
    out << "  " << std::left << std::setw(16) << "token" << std::setw(18) << "upload"
        << std::right << std::setw(8) << "t" << std::setw(10) << "seconds" << std::setw(6)
        << "hops" << "\n";
    if (latency.first_notifications.empty()) out << "  (none)\n";
    for (const auto& row : latency.first_notifications) {
        out << "  " << std::left << std::setw(16) << row.token << std::setw(18)
            << short_digest(row.digest_hex) << std::right << std::setw(8) << row.t
            << std::setw(10) << row.seconds << std::setw(6) << row.hops << "\n";
    }
    out << "  never notified:";
    if (latency.never_notified.empty()) {
        out << " (none)\n";
    } else {
        for (const auto& token : latency.never_notified) out << " " << token;
        out << "\n";
    }
    out << "  histogram seconds->tokens:";
    for (const auto& [seconds, count] : latency.seconds_histogram) {
        out << " " << seconds << ":" << count;
    }
    out << "\n  histogram hops->tokens:";
    for (const auto& [hops, count] : latency.hops_histogram) {
        out << " " << hops << ":" << count;
    }
    out << "\n";
    return out.str();
}

std::string render_throughput_human(const Transcript& transcript) {
    const ThroughputTables throughput = throughput_tables(transcript);

    std::ostringstream out;
    out << "Node throughput\n";
    out << "  " << std::right << std::setw(6) << "node" << std::setw(6) << "log" << std::setw(9)
        << "submits" << std::setw(10) << "relay_in" << std::setw(11) << "relay_out"
        << std::setw(12) << "relay_B" << std::setw(9) << "fetches" << std::setw(12) << "fetch_B"
        << std::setw(10) << "rejected" << std::setw(9) << "msgs" << "\n";
    for (const auto& row : throughput.nodes) {
        out << "  " << std::setw(6) << row.node << std::setw(6) << row.log_entries
            << std::setw(9) << row.submits << std::setw(10) << row.relays_received
            << std::setw(11) << row.relays_sent << std::setw(12) << row.relay_bytes
            << std::setw(9) << row.fetch_responses << std::setw(12) << row.fetch_bytes
            << std::setw(10) << row.rejected << std::setw(9) << row.messages << "\n";
    }
    out << "Upload spread (nodes reached per hop)\n";
    if (throughput.uploads.empty()) out << "  (none)\n";
    for (const auto& row : throughput.uploads) {
        out << "  " << short_digest(row.digest_hex) << " ";
        for (const auto& [hop, count] : row.nodes_at_hop) out << " " << hop << ":" << count;
        out << "\n";
    }
    return out.str();
}

std::string render_latency_records(const Transcript& transcript) {
    const ReportSummary summary = summarize(transcript);
    const LatencyReport latency = notification_latency(transcript);

    std::ostringstream out;
    auto emit = [&out](const json& record) { out << record.dump() << '\n'; };

    emit(json{{"kind", "report_summary"},
              {"tokens", summary.tokens},
              {"contacted", summary.contacted},
              {"notified", summary.notified},
              {"uploads", summary.uploads},
              {"contact_records", summary.contact_records},
              {"delivered_contacts", summary.delivered_contacts}});
    for (const auto& row : latency.first_notifications) {
        emit(json{{"kind", "latency"},
                  {"token", row.token},
                  {"digest", row.digest_hex},
                  {"t", row.t},
                  {"seconds", row.seconds},
                  {"hops", row.hops}});
    }
    for (const auto& token : latency.never_notified) {
        emit(json{{"kind", "never_notified"}, {"token", token}});
    }
    for (const auto& [seconds, count] : latency.seconds_histogram) {
        emit(json{{"kind", "latency_histogram"}, {"seconds", seconds}, {"count", count}});
    }
    for (const auto& [hops, count] : latency.hops_histogram) {
        emit(json{{"kind", "hops_histogram"}, {"hops", hops}, {"count", count}});
    }
    return out.str();
}

std::string render_throughput_records(const Transcript& transcript) {
    const ThroughputTables throughput = throughput_tables(transcript);

    std::ostringstream out;
    auto emit = [&out](const json& record) { out << record.dump() << '\n'; };

    for (const auto& row : throughput.nodes) {
        emit(json{{"kind", "node_throughput"},
                  {"node", row.node},
                  {"log_entries", row.log_entries},
                  {"submits", row.submits},
                  {"relays_received", row.relays_received},
                  {"relays_sent", row.relays_sent},
                  {"relay_bytes", row.relay_bytes},
                  {"fetch_responses", row.fetch_responses},
                  {"fetch_bytes", row.fetch_bytes},
                  {"rejected", row.rejected},
                  {"messages", row.messages}});
    }
    for (const auto& row : throughput.uploads) {
        json histogram = json::object();
        for (const auto& [hop, count] : row.nodes_at_hop) {
            histogram[std::to_string(hop)] = count;
        }
        emit(json{{"kind", "upload_spread"},
                  {"digest", row.digest_hex},
                  {"histogram", std::move(histogram)}});
    }
    return out.str();
}

std::string render_human(const Transcript& transcript) {
    return render_latency_human(transcript) + "\n" + render_throughput_human(transcript);
}

std::string render_records(const Transcript& transcript) {
    return render_latency_records(transcript) + render_throughput_records(transcript);
}

}  // namespace tracer
