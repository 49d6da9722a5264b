#include <doctest.h>

#include <sstream>

#include "tracer/transcript.hpp"

using namespace tracer;
using nlohmann::json;

namespace {

/// A small finished transcript as raw text.
std::string sample_text() {
    std::ostringstream out;
    TranscriptWriter writer(out);
    writer.write(json{{"kind", "header"}, {"version", 1}});
    writer.finish();
    return out.str();
}

}  // namespace

TEST_CASE("written transcripts read back verified") {
    std::ostringstream out;
    TranscriptWriter writer(out);
    writer.write(json{{"kind", "header"}, {"version", 1}});
    writer.write(json{{"kind", "contact"}, {"t", 5}});
    writer.write(json{{"kind", "notify"}, {"t", 60}});
    CHECK(writer.records_written() == 3);
    writer.finish();
    CHECK_THROWS_AS(writer.write(json{{"kind", "late"}}), std::logic_error);
    CHECK_THROWS_AS(writer.finish(), std::logic_error);

    std::istringstream in(out.str());
    const Transcript transcript = read_transcript(in);
    REQUIRE(transcript.records.size() == 3);  // the end record is consumed, not kept
    CHECK(transcript.records[0].at("kind") == "header");
    CHECK(transcript.records[2].at("t") == 60);
    CHECK(transcript.of_kind("contact").size() == 1);
    CHECK(transcript.of_kind("end").empty());
    CHECK(transcript.of_kind("nonexistent").empty());
}

TEST_CASE("an empty stream is a valid empty transcript") {
    std::istringstream in("");
    CHECK(read_transcript(in).empty());
}

TEST_CASE("an unstarted but finished transcript is valid and empty") {
    std::ostringstream out;
    TranscriptWriter writer(out);
    writer.finish();
    std::istringstream in(out.str());
    CHECK(read_transcript(in).empty());
}

TEST_CASE("truncation loses the end record and is detected") {
    std::ostringstream out;
    TranscriptWriter writer(out);
    writer.write(json{{"kind", "header"}, {"version", 1}});
    writer.write(json{{"kind", "contact"}, {"t", 5}});
    writer.finish();
    const std::string text = out.str();

    // Drop the end record line entirely.
    const std::size_t second_last_newline = text.rfind('\n', text.size() - 2);
    std::istringstream missing_end(text.substr(0, second_last_newline + 1));
    CHECK_THROWS_WITH_AS(read_transcript(missing_end),
                         "transcript: missing end record (truncated?)", IntegrityError);

    // Cut mid-line: the tail is not even JSON.
    std::istringstream mid_line(text.substr(0, text.size() - 10));
    CHECK_THROWS_AS(read_transcript(mid_line), IntegrityError);
}

TEST_CASE("bit rot anywhere in the body is detected") {
    std::string text = sample_text();
    const std::size_t flip = text.find("version");
    REQUIRE(flip != std::string::npos);
    text[flip] = 'V';  // still valid JSON, different bytes
    std::istringstream in(text);
    CHECK_THROWS_WITH_AS(read_transcript(in), "transcript: end record digest mismatch",
                         IntegrityError);
}

TEST_CASE("a record count mismatch is detected") {
    std::ostringstream out;
    TranscriptWriter writer(out);
    writer.write(json{{"kind", "header"}, {"version", 1}});
    writer.write(json{{"kind", "contact"}, {"t", 5}});
    writer.finish();
    std::string text = out.str();
    const std::size_t pos = text.find("\"records\":2");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 11, "\"records\":3");
    std::istringstream in(text);
    CHECK_THROWS_WITH_AS(read_transcript(in), "transcript: end record count mismatch",
                         IntegrityError);
}

TEST_CASE("structural violations are rejected") {
    std::istringstream trailing(sample_text() + "{\"kind\":\"extra\"}\n");
    CHECK_THROWS_WITH_AS(read_transcript(trailing), "transcript: data after the end record",
                         IntegrityError);

    std::istringstream kindless("{\"t\":1}\n");
    CHECK_THROWS_WITH_AS(read_transcript(kindless), "transcript: record without a kind",
                         IntegrityError);

    std::istringstream garbage("not json at all\n");
    CHECK_THROWS_AS(read_transcript(garbage), IntegrityError);

    // A body that starts with something other than a header.
    std::ostringstream out;
    TranscriptWriter writer(out);
    writer.write(json{{"kind", "contact"}, {"t", 1}});
    writer.finish();
    std::istringstream headless(out.str());
    CHECK_THROWS_WITH_AS(read_transcript(headless), "transcript: first record is not a header",
                         IntegrityError);

    // An end record with a mangled digest field.
    std::string text = sample_text();
    const std::size_t digest_pos = text.rfind("\"sha256\":\"");
    REQUIRE(digest_pos != std::string::npos);
    text[digest_pos + 10] = 'z';
    std::istringstream bad_hex(text);
    CHECK_THROWS_WITH_AS(read_transcript(bad_hex), "transcript: end record digest is not hex",
                         IntegrityError);
}

TEST_CASE("reading a nonexistent transcript file fails with integrity error") {
    CHECK_THROWS_AS((void)read_transcript_file("/nonexistent/path/t.jsonl"), IntegrityError);
}
