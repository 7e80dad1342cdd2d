#include "autoform/completion.hpp"

#include <array>
#include <random>

namespace autoform {

std::string extract_completion(const std::string& raw,
                               const std::vector<std::string>& stops) {
  size_t cut = raw.size();
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    size_t pos = raw.find(stop);
    if (pos != std::string::npos) cut = std::min(cut, pos);
  }
  return trim(std::string_view(raw).substr(0, cut));
}

MockCompletionProvider::MockCompletionProvider(uint64_t seed,
                                               MockCompletionScript script)
    : seed_(seed), script_(std::move(script)) {}

std::string MockCompletionProvider::complete(const std::string& prompt,
                                             const CompletionParams& params) {
  for (const auto& needle : script_.fail_if_prompt_contains)
    if (prompt.find(needle) != std::string::npos)
      throw ProviderError(id() + ": scripted failure on '" + needle + "'");
  for (const auto& needle : script_.loop_if_prompt_contains)
    if (prompt.find(needle) != std::string::npos)
      return extract_completion(script_.loop_text, params.stop);
  for (const auto& [needle, text] : script_.canned)
    if (prompt.find(needle) != std::string::npos)
      return extract_completion(text, params.stop);

  static constexpr std::array<const char*, 20> kVocab = {
      "group",    "ring",     "field",  "continuous", "measure",
      "prime",    "finite",   "nat",    "real",       "subgroup",
      "ideal",    "matrix",   "series", "integral",   "norm",
      "gcd",      "quotient", "dense",  "compact",    "cyclic"};

  uint64_t h = fnv1a64(prompt) ^ (seed_ * 0x9e3779b97f4a7c15ull);
  std::mt19937_64 rng(h);
  size_t words = 4 + static_cast<size_t>(rng() % 9);
  if (params.max_tokens < words) words = params.max_tokens;

  std::string out = "theorem mock_" + hex64(h).substr(8) + " :";
  for (size_t i = 0; i < words; ++i) {
    out += ' ';
    out += kVocab[rng() % kVocab.size()];
  }
  return extract_completion(out, params.stop);
}

std::string MockCompletionProvider::id() const {
  return "mock-complete/seed=" + std::to_string(seed_);
}

}  // namespace autoform
