#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "autoform/common.hpp"

namespace autoform {

struct CompletionParams {
  double temperature = 0.0;
  size_t max_tokens = 512;
  std::vector<std::string> stop;
};

// Implementations must honor stop sequences (returned text never contains one)
// and max_tokens, and throw ProviderError on failure.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual std::string complete(const std::string& prompt,
                               const CompletionParams& params) = 0;
  virtual std::string id() const = 0;
  virtual bool deterministic() const { return false; }
};

// Truncates raw at the earliest occurrence of any stop sequence, then trims
// surrounding whitespace.
std::string extract_completion(const std::string& raw,
                               const std::vector<std::string>& stops);

// Test harness knobs; matching is on prompt substrings, checked in order.
struct MockCompletionScript {
  std::vector<std::pair<std::string, std::string>> canned;
  std::vector<std::string> fail_if_prompt_contains;
  std::vector<std::string> loop_if_prompt_contains;
  std::string loop_text =
      "nilpotent_of_nilpotent_of_nilpotent_of_nilpotent_of_quotient";
};

// Deterministic stand-in for a completion API: output depends only on the
// prompt bytes and the seed.
class MockCompletionProvider : public CompletionProvider {
 public:
  explicit MockCompletionProvider(uint64_t seed = 0, MockCompletionScript script = {});

  std::string complete(const std::string& prompt,
                       const CompletionParams& params) override;
  std::string id() const override;
  bool deterministic() const override { return true; }

 private:
  uint64_t seed_;
  MockCompletionScript script_;
};

}  // namespace autoform
