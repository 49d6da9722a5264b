#include "tracer/transcript.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "tracer/bytes.hpp"
#include "tracer/crypto.hpp"

namespace tracer {

using nlohmann::json;

/// Incremental SHA-256 over the raw bytes written so far.
struct TranscriptWriter::Hasher {
    EVP_MD_CTX* ctx;

    Hasher() : ctx(EVP_MD_CTX_new()) {
        if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
            throw std::runtime_error("sha256 init failed");
        }
    }
    ~Hasher() { EVP_MD_CTX_free(ctx); }

    void update(const std::string& data) {
        if (EVP_DigestUpdate(ctx, data.data(), data.size()) != 1) {
            throw std::runtime_error("sha256 update failed");
        }
    }
    std::array<std::uint8_t, 32> final() {
        std::array<std::uint8_t, 32> out{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) {
            throw std::runtime_error("sha256 final failed");
        }
        return out;
    }
};

TranscriptWriter::TranscriptWriter(std::ostream& out)
    : out_(out), hasher_(std::make_unique<Hasher>()) {}

TranscriptWriter::~TranscriptWriter() = default;

void TranscriptWriter::write(const json& record) {
    if (finished_) throw std::logic_error("transcript already finished");
    std::string line = record.dump();
    line.push_back('\n');
    hasher_->update(line);
    out_ << line;
    ++records_;
}

void TranscriptWriter::finish() {
    if (finished_) throw std::logic_error("transcript already finished");
    finished_ = true;
    json end{{"kind", "end"},
             {"records", records_},
             {"sha256", to_hex(hasher_->final())}};
    out_ << end.dump() << '\n';
    out_.flush();
}

std::vector<const json*> Transcript::of_kind(const std::string& kind) const {
    std::vector<const json*> out;
    for (const json& record : records) {
        if (record.at("kind").get_ref<const std::string&>() == kind) out.push_back(&record);
    }
    return out;
}

Transcript read_transcript(std::istream& in) {
    std::vector<json> records;
    std::string preceding;  // raw bytes of every line before the current one
    std::string line;
    bool saw_end = false;

    while (std::getline(in, line)) {
        if (saw_end) throw IntegrityError("transcript: data after the end record");
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw IntegrityError(std::string("transcript: unparseable record: ") + e.what());
        }
        if (!record.is_object() || !record.contains("kind") || !record.at("kind").is_string()) {
            throw IntegrityError("transcript: record without a kind");
        }
        if (record.at("kind").get_ref<const std::string&>() == "end") {
            if (!record.contains("records") || !record.at("records").is_number_unsigned() ||
                !record.contains("sha256") || !record.at("sha256").is_string()) {
                throw IntegrityError("transcript: malformed end record");
            }
            if (record.at("records").get<std::uint64_t>() != records.size()) {
                throw IntegrityError("transcript: end record count mismatch");
            }
            Bytes claimed;
            try {
                claimed = from_hex(record.at("sha256").get<std::string>());
            } catch (const DecodeError&) {
                throw IntegrityError("transcript: end record digest is not hex");
            }
            const auto actual = sha256(std::span(
                reinterpret_cast<const std::uint8_t*>(preceding.data()), preceding.size()));
            if (claimed.size() != actual.size() ||
                !std::equal(actual.begin(), actual.end(), claimed.begin())) {
                throw IntegrityError("transcript: end record digest mismatch");
            }
            saw_end = true;
            continue;
        }
        preceding += line;
        preceding.push_back('\n');
        records.push_back(std::move(record));
    }

    if (!saw_end && !(records.empty() && preceding.empty())) {
        throw IntegrityError("transcript: missing end record (truncated?)");
    }
    if (!records.empty() &&
        records.front().at("kind").get_ref<const std::string&>() != "header") {
        throw IntegrityError("transcript: first record is not a header");
    }
    return Transcript{std::move(records)};
}

Transcript read_transcript_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("transcript: cannot open " + path);
    return read_transcript(in);
}

}  // namespace tracer
