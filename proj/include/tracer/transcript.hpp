#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tracer {

/// A transcript that cannot be trusted: truncated, bit-rotted, or
/// structurally broken.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Line-delimited transcript emitter. One JSON object per line, each with
/// a "kind" field; finish() appends an "end" record carrying the count and
/// SHA-256 of every preceding byte, which is what makes truncation and
/// bit-rot detectable later.
class TranscriptWriter {
public:
    explicit TranscriptWriter(std::ostream& out);
    ~TranscriptWriter();

    TranscriptWriter(const TranscriptWriter&) = delete;
    TranscriptWriter& operator=(const TranscriptWriter&) = delete;

    void write(const nlohmann::json& record);
    /// Writes the end record. No further writes are allowed.
    void finish();

    std::uint64_t records_written() const { return records_; }

private:
    struct Hasher;
    std::ostream& out_;
    std::unique_ptr<Hasher> hasher_;
    std::uint64_t records_ = 0;
    bool finished_ = false;
};

/// A verified transcript: every record in file order, end record last.
struct Transcript {
    std::vector<nlohmann::json> records;

    bool empty() const { return records.empty(); }
    /// Records of one kind, file order.
    std::vector<const nlohmann::json*> of_kind(const std::string& kind) const;
};

/// Parse and verify. An entirely empty stream is a valid empty transcript;
/// anything else must be well-formed JSONL whose final record is an "end"
/// record matching the preceding bytes. Throws IntegrityError otherwise.
Transcript read_transcript(std::istream& in);
Transcript read_transcript_file(const std::string& path);

}  // namespace tracer
