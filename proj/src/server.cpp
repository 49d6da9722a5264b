#include "tracer/server.hpp"

#include <algorithm>
#include <stdexcept>

namespace tracer {

Bytes encode_submit(const DiagnosisKeySet& dk) { return encode(dk); }

DiagnosisKeySet decode_submit(std::span<const std::uint8_t> msg) { return decode(msg); }

Bytes encode_relay(NodeId origin, std::span<const std::uint8_t> canonical) {
    Bytes out;
    append_u64_be(out, origin);
    append_bytes(out, canonical);
    return out;
}

RelayMessage decode_relay(std::span<const std::uint8_t> msg) {
    ByteReader r(msg);
    RelayMessage out;
    out.origin = r.u64_be();
    out.canonical = r.bytes(r.remaining());
    decode(out.canonical);  // must parse as a canonical encoding
    return out;
}

Bytes encode_fetch(std::uint64_t cursor) {
    Bytes out;
    append_u64_be(out, cursor);
    return out;
}

std::uint64_t decode_fetch(std::span<const std::uint8_t> msg) {
    ByteReader r(msg);
    std::uint64_t cursor = r.u64_be();
    r.expect_done();
    return cursor;
}

Bytes encode_fetch_response(std::span<const Bytes> canonicals) {
    Bytes out;
    append_u32_be(out, static_cast<std::uint32_t>(canonicals.size()));
    for (const Bytes& c : canonicals) append_bytes(out, c);
    return out;
}

std::vector<DiagnosisKeySet> decode_fetch_response(std::span<const std::uint8_t> msg) {
    ByteReader r(msg);
    const std::uint32_t count = r.u32_be();
    std::vector<DiagnosisKeySet> out;
    out.reserve(count);
    Bytes rest = r.bytes(r.remaining());
    std::span<const std::uint8_t> cursor(rest);
    for (std::uint32_t i = 0; i < count; ++i) {
        // Canonical encodings are self-delimiting: peek the two length
        // bytes to find each boundary.
        if (cursor.size() < 2) throw DecodeError("fetch response: truncated");
        const std::size_t salt_len = cursor[1];
        const std::size_t header = 1 + 1 + salt_len + 4 + 1;
        if (cursor.size() < header) throw DecodeError("fetch response: truncated");
        const std::size_t tek_count = cursor[header - 1];
        const std::size_t total = header + tek_count * 20 + 64;
        if (cursor.size() < total) throw DecodeError("fetch response: truncated");
        out.push_back(decode(cursor.first(total)));
        cursor = cursor.subspan(total);
    }
    if (!cursor.empty()) throw DecodeError("fetch response: trailing bytes");
    return out;
}

const char* to_string(SubmitStatus s) {
    switch (s) {
        case SubmitStatus::Accepted: return "accepted";
        case SubmitStatus::Duplicate: return "duplicate";
        case SubmitStatus::BadSignature: return "bad-signature";
        case SubmitStatus::UnknownKey: return "unknown-key";
        case SubmitStatus::StaleWindow: return "stale-window";
        case SubmitStatus::Malformed: return "malformed";
    }
    return "unknown";
}

namespace {
SubmitStatus from_reject(RejectReason r) {
    switch (r) {
        case RejectReason::BadSignature: return SubmitStatus::BadSignature;
        case RejectReason::UnknownKey: return SubmitStatus::UnknownKey;
        case RejectReason::StaleWindow: return SubmitStatus::StaleWindow;
        case RejectReason::Malformed: return SubmitStatus::Malformed;
    }
    return SubmitStatus::Malformed;
}
}  // namespace

ServerNode::ServerNode(NodeId id, std::vector<NodeId> peers, ProviderRegistry registry)
    : id_(id), peers_(std::move(peers)), registry_(std::move(registry)) {
    std::sort(peers_.begin(), peers_.end());
}

SubmitResult ServerNode::insert(DiagnosisKeySet dk, Bytes canonical, std::optional<NodeId> from,
                                NodeId origin, std::uint64_t hop_count, std::uint64_t step) {
    const auto dig = sha256(canonical);
    if (seen_.contains(dig)) return {SubmitStatus::Duplicate, 0};
    VerifyResult v = verify(registry_, dk);
    if (!v.accepted) {
        ++metrics_.rejected;
        return {from_reject(*v.reason), 0};
    }
    seen_.insert(dig);
    LogEntry entry;
    entry.sequence = log_.size() + 1;
    entry.dk = std::move(dk);
    entry.canonical = std::move(canonical);
    entry.digest = dig;
    entry.origin = origin;
    entry.hop_count = hop_count;
    entry.arrival_step = step;
    log_.push_back(std::move(entry));
    outbox_.push_back({log_.size() - 1, from});
    return {SubmitStatus::Accepted, log_.back().sequence};
}

SubmitResult ServerNode::submit(const DiagnosisKeySet& dk, std::uint64_t current_step) {
    ++metrics_.submits_received;
    return insert(dk, encode(dk), std::nullopt, id_, 0, current_step);
}

SubmitResult ServerNode::handle_submit_bytes(std::span<const std::uint8_t> msg,
                                             std::uint64_t current_step) {
    ++metrics_.submits_received;
    DiagnosisKeySet dk;
    try {
        dk = decode_submit(msg);
    } catch (const DecodeError&) {
        ++metrics_.rejected;
        return {SubmitStatus::Malformed, 0};
    }
    return insert(std::move(dk), Bytes(msg.begin(), msg.end()), std::nullopt, id_, 0,
                  current_step);
}

ServerNode::FetchResult ServerNode::fetch(std::uint64_t cursor) {
    if (cursor > log_.size()) cursor = 0;  // unknown cursor resets, never skips
    FetchResult out;
    std::vector<Bytes> canonicals;
    for (std::size_t i = cursor; i < log_.size(); ++i) {
        out.sets.push_back(log_[i].dk);
        canonicals.push_back(log_[i].canonical);
    }
    out.cursor = log_.size();
    ++metrics_.fetch_responses_sent;
    metrics_.fetch_bytes_sent += encode_fetch_response(canonicals).size();
    return out;
}

Bytes ServerNode::handle_fetch_bytes(std::span<const std::uint8_t> msg) {
    std::uint64_t cursor = decode_fetch(msg);
    if (cursor > log_.size()) cursor = 0;
    std::vector<Bytes> canonicals;
    for (std::size_t i = cursor; i < log_.size(); ++i) canonicals.push_back(log_[i].canonical);
    Bytes response = encode_fetch_response(canonicals);
    ++metrics_.fetch_responses_sent;
    metrics_.fetch_bytes_sent += response.size();
    return response;
}

const ServerNode::LogEntry* ServerNode::find(const std::array<std::uint8_t, 32>& digest) const {
    for (const auto& entry : log_) {
        if (entry.digest == digest) return &entry;
    }
    return nullptr;
}

std::vector<ServerNode::Pending> ServerNode::take_outbox() {
    std::vector<Pending> out;
    out.swap(outbox_);
    return out;
}

void ServerNode::receive_relay(std::span<const std::uint8_t> relay_bytes, NodeId sender,
                               std::uint64_t hop_count, std::uint64_t step) {
    ++metrics_.relays_received;
    RelayMessage msg;
    try {
        msg = decode_relay(relay_bytes);
    } catch (const DecodeError&) {
        ++metrics_.rejected;
        return;
    }
    DiagnosisKeySet dk = decode(msg.canonical);
    insert(std::move(dk), std::move(msg.canonical), sender, msg.origin, hop_count, step);
}

void ServerNode::count_relay_sent(std::size_t bytes) {
    ++metrics_.relays_sent;
    metrics_.relay_bytes_sent += bytes;
}

ServerNetwork::ServerNetwork(const Topology& topology, ProviderRegistry registry) {
    ids_ = topology.nodes;
    std::sort(ids_.begin(), ids_.end());
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end())
        throw std::invalid_argument("topology: duplicate node id");
    std::map<NodeId, std::vector<NodeId>> adjacency;
    for (NodeId id : ids_) adjacency[id];
    for (auto [a, b] : topology.edges) {
        if (a == b) throw std::invalid_argument("topology: self loop");
        if (!adjacency.contains(a) || !adjacency.contains(b))
            throw std::invalid_argument("topology: edge references unknown node");
        if (std::find(adjacency[a].begin(), adjacency[a].end(), b) != adjacency[a].end())
            continue;  // duplicate edge
        adjacency[a].push_back(b);
        adjacency[b].push_back(a);
    }
    for (NodeId id : ids_) nodes_.emplace(id, ServerNode(id, adjacency[id], registry));
}

ServerNode& ServerNetwork::node(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::invalid_argument("unknown node id");
    return it->second;
}

const ServerNode& ServerNetwork::node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::invalid_argument("unknown node id");
    return it->second;
}

SubmitResult ServerNetwork::submit(NodeId id, const DiagnosisKeySet& dk) {
    return node(id).submit(dk, step_);
}

ServerNode::FetchResult ServerNetwork::fetch(NodeId id, std::uint64_t cursor) {
    return node(id).fetch(cursor);
}

std::size_t ServerNetwork::propagate_step() {
    ++step_;
    struct Delivery {
        NodeId to;
        NodeId from;
        Bytes bytes;
        std::uint64_t hop;
    };
    std::vector<Delivery> deliveries;
    // Snapshot every outbox first so one step moves entries exactly one hop.
    for (NodeId id : ids_) {
        ServerNode& sender = nodes_.at(id);
        for (const auto& pending : sender.take_outbox()) {
            const auto& entry = sender.log()[pending.entry_index];
            Bytes bytes = encode_relay(entry.origin, entry.canonical);
            for (NodeId peer : sender.peers()) {
                if (pending.received_from && *pending.received_from == peer) continue;
                deliveries.push_back({peer, id, bytes, entry.hop_count});
                sender.count_relay_sent(bytes.size());
            }
        }
    }
    for (auto& d : deliveries) {
        nodes_.at(d.to).receive_relay(d.bytes, d.from, d.hop + 1, step_);
    }
    return deliveries.size();
}

std::size_t ServerNetwork::propagate_to_quiescence(std::size_t max_steps) {
    std::size_t rounds = 0;
    while (rounds < max_steps) {
        ++rounds;
        if (propagate_step() == 0) break;
    }
    return rounds;
}

ThroughputReport throughput_report(const ServerNetwork& network) {
    ThroughputReport report;
    std::map<std::string, ThroughputReport::UploadRow> uploads;
    for (NodeId id : network.node_ids()) {
        const ServerNode& node = network.node(id);
        const NodeMetrics& m = node.metrics();
        report.nodes.push_back({id, m.messages(), m.submits_received, m.relays_received,
                                m.relays_sent, m.relay_bytes_sent, m.fetch_responses_sent,
                                m.fetch_bytes_sent, node.max_sequence()});
        for (const auto& entry : node.log()) {
            auto& row = uploads[to_hex(entry.digest)];
            row.digest_hex = to_hex(entry.digest);
            ++row.nodes_at_hop[entry.hop_count];
        }
    }
    for (auto& [_, row] : uploads) report.uploads.push_back(std::move(row));
    return report;
}

}  // namespace tracer
