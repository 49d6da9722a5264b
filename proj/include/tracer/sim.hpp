#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tracer/scenario.hpp"

namespace tracer {

/// Programmatic run results, for callers that don't want to re-parse the
/// transcript they just wrote. The transcript is the complete record; this
/// is the digest of it.
struct RunSummary {
    struct Upload {
        std::string digest_hex;
        std::uint32_t t = 0;
        std::string token_id;
        NodeId node = 0;
        std::string status;
        std::uint32_t window_start = 0;  // first covered interval
        std::uint32_t window_end = 0;    // one past the last covered interval
    };
    struct Notification {
        std::uint32_t t = 0;
        std::string token_id;
        std::string digest_hex;
        std::uint64_t latency_seconds = 0;  // since the matching upload's submit
        std::uint64_t hops = 0;             // relay hops to the token's home node
        std::size_t events = 0;
    };

    std::uint64_t contact_records = 0;     // in-radius beacon deliveries attempted
    std::uint64_t delivered_contacts = 0;  // survived packet loss
    std::uint64_t observations_stored = 0;
    std::vector<Upload> uploads;
    std::vector<Notification> notifications;
    std::map<std::string, std::uint32_t> first_notified;  // token id -> t
    std::uint64_t records_written = 0;

    std::vector<std::string> notified_tokens() const;  // sorted ids
};

/// Execute a validated scenario, streaming the transcript to `out`.
/// Deterministic: the transcript bytes are a pure function of the
/// scenario value.
RunSummary run_scenario(const Scenario& scenario, std::ostream& out);

}  // namespace tracer
