#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace autoform {

// Fatal problems with inputs or configuration. Per-record data failures are
// never exceptions; they travel as flags on the records themselves.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; message carries path and 1-based line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A remote provider gave up after retries.
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment failure around an external tool (missing binary, broken
// workspace). Distinct from a negative check verdict.
class InfrastructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Direction { formalize, informalize };

std::string_view direction_name(Direction d);
Direction direction_from_name(std::string_view name);

// FNV-1a, 64-bit. Used for input digests and mock-provider seeding.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 14695981039346656037ull);
std::string hex64(uint64_t v);

std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

// Collapse every whitespace run to a single space and trim the ends.
// This is the normalization used for prompt-copy equality.
std::string collapse_whitespace(std::string_view s);

// Default token estimator: ceil(bytes / 4).
size_t estimate_tokens(std::string_view text);

bool is_blank(std::string_view s);

// Single left-to-right scan over the template; slot values are inserted
// verbatim and never rescanned, unknown {tokens} pass through untouched.
std::string fill_template(
    std::string_view text,
    const std::vector<std::pair<std::string_view, std::string_view>>& slots);

}  // namespace autoform
