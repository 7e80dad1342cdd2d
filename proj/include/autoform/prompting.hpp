#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "autoform/common.hpp"
#include "autoform/corpus.hpp"

namespace autoform {

struct PromptExample {
  std::string nl_text;
  std::string formal_text;

  bool operator==(const PromptExample&) const = default;
};

// JSONL, one {"nl": ..., "formal": ...} object per line; both fields required
// and non-empty.
std::vector<PromptExample> load_prompt_examples(const std::filesystem::path& path);

struct PromptStyle {
  std::string nl_label = "NL:";
  std::string formal_label = "Lean:";
  std::string reference_label = "Ref:";
  std::string block_separator = "\n\n";

  bool operator==(const PromptStyle&) const = default;
};

// Template text with {instruction}, {examples}, {references}, {query} slots.
// Loading a file strips one trailing newline so the rendered prompt can end at
// the open answer label.
struct PromptTemplate {
  std::string text;

  static PromptTemplate load_file(const std::filesystem::path& path);
  static PromptTemplate fewshot_default();
  static PromptTemplate retrieval_default();
};

struct RetrievalShot {
  std::vector<FormalStatement> references;
  PromptExample example;
};

struct Prompt {
  Direction direction = Direction::formalize;
  std::string instruction;
  std::vector<PromptExample> examples;
  // Either empty (few-shot) or aligned 1:1 with examples (retrieval).
  std::vector<std::vector<FormalStatement>> references_per_example;
  std::vector<FormalStatement> query_references;
  std::string query;
  std::string template_text;
  PromptStyle style;
  std::string rendered;  // always render_prompt() of the fields above
};

struct PromptOptions {
  std::string instruction;    // empty selects the per-direction default wording
  std::string template_text;  // empty selects the built-in template for the mode
  PromptStyle style;
};

std::string default_instruction(Direction direction);

// Marker that opens each example block for the given direction; doubles as the
// completion stop sequence.
std::string stop_marker(Direction direction, const PromptStyle& style = {});

// Stop sequences to pass to a completion provider for this prompt.
std::vector<std::string> stop_sequences(const Prompt& prompt);

std::string render_prompt(const Prompt& prompt);

// Keeps the last max_examples examples when more are given.
Prompt build_fewshot_prompt(const std::vector<PromptExample>& examples,
                            const std::string& query, Direction direction,
                            size_t max_examples, const PromptOptions& opts = {});

// Every shot must carry exactly as many references as the query does.
Prompt build_retrieval_prompt(const std::vector<RetrievalShot>& shots,
                              const std::string& query_nl,
                              const std::vector<FormalStatement>& query_references,
                              const PromptOptions& opts = {});

using TokenEstimator = std::function<size_t(std::string_view)>;

// Drops earliest whole examples (with their references) until the estimate
// fits; the query and instruction are never dropped. Null estimator means
// estimate_tokens.
Prompt truncate_to_budget(const Prompt& prompt, size_t budget,
                          const TokenEstimator& estimator = {});

}  // namespace autoform
