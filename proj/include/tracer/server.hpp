#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "tracer/bytes.hpp"
#include "tracer/diagnosis.hpp"

namespace tracer {

using NodeId = std::uint64_t;

// Wire formats. SUBMIT is one canonical diagnosis-key-set encoding; RELAY
// prefixes it with the 8-byte origin node id; FETCH is an 8-byte cursor;
// FETCH-RESPONSE is a 4-byte count followed by that many canonical
// encodings. All integers big-endian.
Bytes encode_submit(const DiagnosisKeySet& dk);
DiagnosisKeySet decode_submit(std::span<const std::uint8_t> msg);

struct RelayMessage {
    NodeId origin = 0;
    Bytes canonical;
};
Bytes encode_relay(NodeId origin, std::span<const std::uint8_t> canonical);
RelayMessage decode_relay(std::span<const std::uint8_t> msg);

Bytes encode_fetch(std::uint64_t cursor);
std::uint64_t decode_fetch(std::span<const std::uint8_t> msg);

Bytes encode_fetch_response(std::span<const Bytes> canonicals);
std::vector<DiagnosisKeySet> decode_fetch_response(std::span<const std::uint8_t> msg);

enum class SubmitStatus { Accepted, Duplicate, BadSignature, UnknownKey, StaleWindow, Malformed };
const char* to_string(SubmitStatus s);

struct SubmitResult {
    SubmitStatus status = SubmitStatus::Malformed;
    std::uint64_t sequence = 0;  // valid when accepted

    bool accepted() const { return status == SubmitStatus::Accepted; }
};

struct NodeMetrics {
    std::uint64_t submits_received = 0;
    std::uint64_t relays_received = 0;
    std::uint64_t relays_sent = 0;
    std::uint64_t relay_bytes_sent = 0;
    std::uint64_t fetch_responses_sent = 0;
    std::uint64_t fetch_bytes_sent = 0;
    std::uint64_t rejected = 0;

    std::uint64_t messages() const {
        return submits_received + relays_received + relays_sent + fetch_responses_sent;
    }
};

/// Client-side download bookkeeping: the highest sequence already seen on
/// one node.
struct FetchCursor {
    std::uint64_t last_seen_sequence = 0;
};

/// One key server: append-only verified log, digest dedup, flood relay to
/// peers, and cursor-based incremental fetch. Each node owns its state
/// exclusively; the network advances everything in explicit steps.
class ServerNode {
public:
    ServerNode(NodeId id, std::vector<NodeId> peers, ProviderRegistry registry);

    struct LogEntry {
        std::uint64_t sequence = 0;  // 1-based arrival order on this node
        DiagnosisKeySet dk;
        Bytes canonical;
        std::array<std::uint8_t, 32> digest{};
        NodeId origin = 0;               // node the upload entered the network at
        std::uint64_t hop_count = 0;     // hops from the upload node
        std::uint64_t arrival_step = 0;  // propagation step counter at insertion
    };

    /// Verify, dedupe by content digest, append, queue for relay.
    SubmitResult submit(const DiagnosisKeySet& dk, std::uint64_t current_step = 0);
    /// Same through the SUBMIT wire format.
    SubmitResult handle_submit_bytes(std::span<const std::uint8_t> msg,
                                     std::uint64_t current_step = 0);

    struct FetchResult {
        std::vector<DiagnosisKeySet> sets;
        std::uint64_t cursor = 0;
    };

    /// Everything past the cursor, in log order. A cursor beyond the log
    /// resets to zero rather than losing data.
    FetchResult fetch(std::uint64_t cursor);
    /// FETCH bytes in, FETCH-RESPONSE bytes out.
    Bytes handle_fetch_bytes(std::span<const std::uint8_t> msg);

    NodeId id() const { return id_; }
    const std::vector<NodeId>& peers() const { return peers_; }
    const std::vector<LogEntry>& log() const { return log_; }
    std::uint64_t max_sequence() const { return log_.size(); }
    const NodeMetrics& metrics() const { return metrics_; }
    const LogEntry* find(const std::array<std::uint8_t, 32>& digest) const;

    // Relay plumbing driven by ServerNetwork.
    struct Pending {
        std::size_t entry_index = 0;
        std::optional<NodeId> received_from;
    };
    std::vector<Pending> take_outbox();
    void receive_relay(std::span<const std::uint8_t> relay_bytes, NodeId sender,
                       std::uint64_t hop_count, std::uint64_t step);
    void count_relay_sent(std::size_t bytes);

private:
    SubmitResult insert(DiagnosisKeySet dk, Bytes canonical, std::optional<NodeId> from,
                        NodeId origin, std::uint64_t hop_count, std::uint64_t step);

    NodeId id_;
    std::vector<NodeId> peers_;
    ProviderRegistry registry_;
    std::vector<LogEntry> log_;
    std::set<std::array<std::uint8_t, 32>> seen_;
    std::vector<Pending> outbox_;
    NodeMetrics metrics_;
};

struct Topology {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;  // undirected
};

/// The server federation as a synchronous round model: one propagate_step
/// moves every queued entry one hop. Deterministic flood with digest
/// dedup; a node relays an entry once, to every peer except the one it
/// came from.
class ServerNetwork {
public:
    ServerNetwork(const Topology& topology, ProviderRegistry registry);

    ServerNode& node(NodeId id);
    const ServerNode& node(NodeId id) const;
    const std::vector<NodeId>& node_ids() const { return ids_; }  // sorted

    SubmitResult submit(NodeId node, const DiagnosisKeySet& dk);
    ServerNode::FetchResult fetch(NodeId node, std::uint64_t cursor);

    /// One synchronous relay round; returns the number of messages
    /// delivered.
    std::size_t propagate_step();
    /// Steps until an idle round; returns rounds taken.
    std::size_t propagate_to_quiescence(std::size_t max_steps = 10000);

    std::uint64_t steps() const { return step_; }

private:
    std::vector<NodeId> ids_;
    std::map<NodeId, ServerNode> nodes_;
    std::uint64_t step_ = 0;
};

struct ThroughputReport {
    struct NodeRow {
        NodeId node = 0;
        std::uint64_t messages = 0;
        std::uint64_t submits = 0;
        std::uint64_t relays_received = 0;
        std::uint64_t relays_sent = 0;
        std::uint64_t relay_bytes = 0;
        std::uint64_t fetch_responses = 0;
        std::uint64_t fetch_bytes = 0;
        std::uint64_t log_entries = 0;
    };
    struct UploadRow {
        std::string digest_hex;
        std::map<std::uint64_t, std::uint64_t> nodes_at_hop;  // hop distance -> node count
    };
    std::vector<NodeRow> nodes;    // by node id
    std::vector<UploadRow> uploads;  // by digest hex
};

ThroughputReport throughput_report(const ServerNetwork& network);

}  // namespace tracer
