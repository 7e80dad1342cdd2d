#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoform/completion.hpp"
#include "autoform/corpus.hpp"
#include "autoform/embedding.hpp"
#include "autoform/ioutil.hpp"
#include "autoform/prompting.hpp"

namespace autoform {

enum class Method { fewshot, retrieval, finetuned_external };

std::string_view method_name(Method m);
Method method_from_name(std::string_view name);

// One translation attempt. A failed attempt is still a record: `error` holds
// "<stage>: <detail>" (stages: draft, embed, retrieve, prompt, completion) or
// the bare flag "empty-completion"; downstream metrics count it as a negative.
struct GenerationRecord {
  std::string problem_id;
  Direction direction = Direction::formalize;
  Method method = Method::fewshot;
  std::string prompt_rendered;  // the final prompt sent to the provider
  std::optional<std::string> draft_output;  // retrieval stage 1 result
  std::optional<std::vector<std::string>> retrieved_ids;
  std::string raw_completion;
  std::string extracted_statement;
  std::string provider_id;
  CompletionParams params;
  std::string timestamp;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }

  json to_json() const;
  static GenerationRecord from_json(const json& j, const std::string& where);
};

std::vector<GenerationRecord> load_records(const std::filesystem::path& path);
void save_records(const std::vector<GenerationRecord>& records,
                  const std::filesystem::path& path);

struct FewshotOptions {
  size_t max_examples = 12;
  std::optional<size_t> budget;  // token budget; unset = no truncation
  PromptOptions prompt;
};

GenerationRecord translate_fewshot(const BenchmarkProblem& problem,
                                   const std::vector<PromptExample>& examples,
                                   Direction direction, CompletionProvider& provider,
                                   const CompletionParams& params,
                                   const FewshotOptions& opts = {});

// References for the last `shots` examples: each example's formal text is
// embedded and its k nearest knowledge-base statements attached.
std::vector<RetrievalShot> prepare_retrieval_shots(
    const std::vector<PromptExample>& examples, size_t shots,
    const EmbeddingIndex& index, const StatementLookup& kb,
    EmbeddingProvider& embed_provider, size_t k);

struct RetrievalOptions {
  FewshotOptions draft;
  size_t shots = 3;
  std::optional<size_t> budget;
  PromptOptions prompt;
};

// Two-stage pipeline, formalization only: few-shot draft, embed the draft
// (not the problem text), retrieve k statements, final completion from the
// reference-augmented prompt.
GenerationRecord translate_with_retrieval(
    const BenchmarkProblem& problem,
    const std::vector<PromptExample>& fewshot_examples, const EmbeddingIndex& index,
    const StatementLookup& kb, EmbeddingProvider& embed_provider,
    CompletionProvider& completion_provider, size_t k, const CompletionParams& params,
    const RetrievalOptions& opts = {});

struct RunBatchConfig {
  Direction direction = Direction::formalize;
  Method method = Method::fewshot;
  std::vector<PromptExample> examples;
  CompletionParams params;
  size_t parallelism = 1;
  size_t k = 4;
  FewshotOptions fewshot;
  RetrievalOptions retrieval;

  CompletionProvider* completion_provider = nullptr;  // required
  // Required when method == retrieval; all non-owning.
  const EmbeddingIndex* index = nullptr;
  EmbeddingProvider* embed_provider = nullptr;
  const std::vector<FormalStatement>* kb = nullptr;
};

struct RunBatchResult {
  std::vector<GenerationRecord> records;  // sorted by problem_id
  json manifest;
};

// One record per problem, order-deterministic by problem id. Per-record
// failures are flagged, never fatal; only configuration problems throw.
// The manifest (and every record timestamp) is byte-stable across reruns and
// parallelism levels when all providers are deterministic.
RunBatchResult run_batch(const std::vector<BenchmarkProblem>& problems,
                         const RunBatchConfig& config);

}  // namespace autoform
