#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoform/completion.hpp"
#include "autoform/corpus.hpp"
#include "autoform/ioutil.hpp"
#include "autoform/prompting.hpp"

namespace autoform {

// One synthesized training pair: generated informal text against its genuine
// formal statement. A flagged pair stays in the audit log but is excluded
// from the emitted training set unless log-only mode is selected.
struct BacktranslationPair {
  std::string name;                // source statement name
  std::string synthetic_informal;  // generated, may be blank when flagged empty
  std::string formal;
  std::string teacher_id;
  bool looping = false;
  bool duplicate = false;
  bool empty = false;

  bool flagged() const { return looping || duplicate || empty; }
  std::vector<std::string> flag_names() const;
  json to_json() const;
};

// True iff some whitespace-or-underscore token n-gram of length <= ngram_len
// repeats >= min_repeats times consecutively. min_repeats >= 3, ngram_len >= 1.
bool detect_looping(std::string_view text, size_t min_repeats = 4,
                    size_t ngram_len = 8);

struct SynthesizeOptions {
  size_t parallelism = 1;
  std::optional<size_t> max_examples;  // unset = every prompt example
  size_t looping_min_repeats = 4;
  size_t looping_ngram_len = 8;
  PromptOptions prompt;
};

// One pair per corpus statement, in corpus order. The teacher is prompted in
// the informalization direction. A teacher failure flags the pair empty and
// the run continues. Duplicate means: same whitespace-collapsed informal text
// as an earlier pair with a different formal statement; the first occurrence
// stays unflagged.
std::vector<BacktranslationPair> synthesize(
    const std::vector<FormalStatement>& corpus,
    const std::vector<PromptExample>& prompt_examples, CompletionProvider& teacher,
    const CompletionParams& params, const SynthesizeOptions& opts = {});

struct FinetuneOptions {
  std::string separator = "\n###\n";  // joins informal and formal in `text`
  bool exclude_flagged = true;        // false = log-only: flags recorded, nothing dropped
};

struct FinetuneStats {
  size_t total = 0;
  size_t ok = 0;  // unflagged pairs
  size_t looping = 0;
  size_t duplicate = 0;
  size_t empty = 0;
  size_t emitted = 0;  // training lines written
  std::vector<std::pair<std::string, size_t>> informal_tokens;  // bucket, count
  std::vector<std::pair<std::string, size_t>> formal_tokens;

  json to_json() const;
};

// Writes train.jsonl (records with `informal`, `formal`, `text`), audit.jsonl
// (every pair with its flags) and stats.json under out_dir.
FinetuneStats emit_finetune_dataset(const std::vector<BacktranslationPair>& pairs,
                                    const std::filesystem::path& out_dir,
                                    const FinetuneOptions& opts = {});

}  // namespace autoform
