#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoform/common.hpp"

namespace autoform {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

// Write via a sibling temp file + rename so a failed run never leaves a
// truncated artifact behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Hex FNV-1a digest of a file's bytes, for run manifests.
std::string file_digest(const std::filesystem::path& path);

// Calls fn(line_number, line) for every non-blank line; line numbers are
// 1-based. The caller parses; this keeps the numbering in one place.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(size_t, std::string_view)>& fn);

// Parses each non-blank line as a JSON object. Throws ParseError with
// path:line on malformed JSON or a non-object line.
void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(size_t, const json&)>& fn);

// Field accessors for JSONL records; `where` is the path:line prefix used in
// ParseError messages. Optional fields default to "".
std::string get_required_string(const json& j, const char* key,
                                const std::string& where);
std::string get_optional_string(const json& j, const char* key,
                                const std::string& where);

std::string to_jsonl(const std::vector<json>& records);
void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<json>& records);

// Current time as ISO-8601 UTC, e.g. "2024-05-01T12:30:05Z".
std::string utc_timestamp_now();

// The timestamp written into records when every provider in a run is
// deterministic, so reruns are byte-identical.
inline constexpr const char* kFixedTimestamp = "1970-01-01T00:00:00Z";

// Runs fn(i) for i in [0, count) on up to `parallelism` worker threads.
// The first exception is rethrown on the caller thread after all workers
// have stopped.
void parallel_for(size_t count, size_t parallelism, const std::function<void(size_t)>& fn);

}  // namespace autoform
