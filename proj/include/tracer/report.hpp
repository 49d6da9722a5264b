#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tracer/transcript.hpp"

namespace tracer {

/// Per-token notification delay, measured from the matching upload's
/// submit. Tokens the ground truth says should have been reached but never
/// were are reported, not dropped.
struct LatencyReport {
    struct Row {
        std::string token;
        std::string digest_hex;  // upload that triggered the first notification
        std::uint64_t t = 0;
        std::uint64_t seconds = 0;
        std::uint64_t hops = 0;
    };
    std::vector<Row> first_notifications;        // transcript order
    std::vector<std::string> never_notified;     // predicted but unreached, sorted
    std::map<std::uint64_t, std::uint64_t> seconds_histogram;
    std::map<std::uint64_t, std::uint64_t> hops_histogram;
};

/// The prediction rule behind never_notified: a token is predicted for an
/// accepted upload when some delivered contact has the diagnosed token as
/// emitter, happened at or before the submit, falls inside the upload's
/// TEK window, and both tokens share a subnetwork.
LatencyReport notification_latency(const Transcript& transcript);

struct ReportSummary {
    std::uint64_t tokens = 0;
    std::uint64_t contacted = 0;  // tokens that received >= 1 delivered beacon
    std::uint64_t notified = 0;
    std::uint64_t uploads = 0;
    std::uint64_t contact_records = 0;
    std::uint64_t delivered_contacts = 0;
};
ReportSummary summarize(const Transcript& transcript);

struct ThroughputTables {
    struct NodeRow {
        std::uint64_t node = 0;
        std::uint64_t log_entries = 0;
        std::uint64_t submits = 0;
        std::uint64_t relays_received = 0;
        std::uint64_t relays_sent = 0;
        std::uint64_t relay_bytes = 0;
        std::uint64_t fetch_responses = 0;
        std::uint64_t fetch_bytes = 0;
        std::uint64_t rejected = 0;
        std::uint64_t messages = 0;
    };
    struct UploadRow {
        std::string digest_hex;
        std::map<std::uint64_t, std::uint64_t> nodes_at_hop;
    };
    std::vector<NodeRow> nodes;
    std::vector<UploadRow> uploads;
};
ThroughputTables throughput_tables(const Transcript& transcript);

// Renderers, one per table family plus the combined report. The records
// variants emit one structured record per line with stable field names.
std::string render_latency_human(const Transcript& transcript);
std::string render_latency_records(const Transcript& transcript);
std::string render_throughput_human(const Transcript& transcript);
std::string render_throughput_records(const Transcript& transcript);
std::string render_human(const Transcript& transcript);
std::string render_records(const Transcript& transcript);

}  // namespace tracer
