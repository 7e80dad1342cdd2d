#include "autoform/backtranslation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <unordered_map>

namespace autoform {

std::vector<std::string> BacktranslationPair::flag_names() const {
  std::vector<std::string> out;
  if (looping) out.push_back("looping");
  if (duplicate) out.push_back("duplicate");
  if (empty) out.push_back("empty");
  return out;
}

json BacktranslationPair::to_json() const {
  return json{{"name", name},
              {"informal", synthetic_informal},
              {"formal", formal},
              {"teacher", teacher_id},
              {"flags", flag_names()}};
}

namespace {

std::vector<std::string> loop_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '_') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace

bool detect_looping(std::string_view text, size_t min_repeats, size_t ngram_len) {
  if (min_repeats < 3) throw std::invalid_argument("min_repeats must be >= 3");
  if (ngram_len == 0) throw std::invalid_argument("ngram_len must be >= 1");

  auto tokens = loop_tokens(text);
  size_t n = tokens.size();
  for (size_t len = 1; len <= ngram_len && len * min_repeats <= n; ++len) {
    for (size_t start = 0; start + len * min_repeats <= n; ++start) {
      size_t repeats = 1;
      size_t pos = start + len;
      while (pos + len <= n &&
             std::equal(tokens.begin() + start, tokens.begin() + start + len,
                        tokens.begin() + pos)) {
        ++repeats;
        if (repeats >= min_repeats) return true;
        pos += len;
      }
    }
  }
  return false;
}

std::vector<BacktranslationPair> synthesize(
    const std::vector<FormalStatement>& corpus,
    const std::vector<PromptExample>& prompt_examples, CompletionProvider& teacher,
    const CompletionParams& params, const SynthesizeOptions& opts) {
  if (corpus.empty()) throw ConfigError("backtranslation corpus must be non-empty");
  if (prompt_examples.empty())
    throw ConfigError("backtranslation needs at least one prompt example");
  if (opts.parallelism == 0) throw ConfigError("parallelism must be >= 1");
  size_t max_examples = opts.max_examples.value_or(prompt_examples.size());

  std::vector<BacktranslationPair> pairs(corpus.size());
  parallel_for(corpus.size(), opts.parallelism, [&](size_t i) {
    BacktranslationPair& pair = pairs[i];
    pair.name = corpus[i].name;
    pair.formal = corpus[i].statement_text;
    pair.teacher_id = teacher.id();

    Prompt prompt = build_fewshot_prompt(prompt_examples, corpus[i].statement_text,
                                         Direction::informalize, max_examples,
                                         opts.prompt);
    CompletionParams effective = params;
    for (auto& stop : stop_sequences(prompt))
      if (std::find(effective.stop.begin(), effective.stop.end(), stop) ==
          effective.stop.end())
        effective.stop.push_back(std::move(stop));
    try {
      pair.synthetic_informal =
          extract_completion(teacher.complete(prompt.rendered, effective),
                             effective.stop);
    } catch (const ProviderError&) {
      pair.synthetic_informal.clear();
    }
  });

  std::unordered_map<std::string, size_t> first_by_text;
  for (size_t i = 0; i < pairs.size(); ++i) {
    BacktranslationPair& pair = pairs[i];
    if (is_blank(pair.synthetic_informal)) {
      pair.empty = true;
      continue;
    }
    pair.looping = detect_looping(pair.synthetic_informal, opts.looping_min_repeats,
                                  opts.looping_ngram_len);
    auto [it, inserted] =
        first_by_text.emplace(collapse_whitespace(pair.synthetic_informal), i);
    if (!inserted && pairs[it->second].formal != pair.formal) pair.duplicate = true;
  }
  return pairs;
}

namespace {

constexpr std::array<size_t, 5> kBucketEdges{8, 16, 32, 64, 128};
const std::array<const char*, 6> kBucketLabels{"<8",    "8-15",   "16-31",
                                               "32-63", "64-127", ">=128"};

std::vector<std::pair<std::string, size_t>> token_histogram(
    const std::vector<size_t>& counts) {
  std::array<size_t, 6> buckets{};
  for (size_t c : counts) {
    size_t b = 0;
    while (b < kBucketEdges.size() && c >= kBucketEdges[b]) ++b;
    ++buckets[b];
  }
  std::vector<std::pair<std::string, size_t>> out;
  for (size_t b = 0; b < buckets.size(); ++b)
    out.emplace_back(kBucketLabels[b], buckets[b]);
  return out;
}

}  // namespace

json FinetuneStats::to_json() const {
  auto histogram = [](const std::vector<std::pair<std::string, size_t>>& h) {
    json out = json::array();
    for (const auto& [label, count] : h) out.push_back(json::array({label, count}));
    return out;
  };
  return json{{"total", total},           {"ok", ok},
              {"looping", looping},       {"duplicate", duplicate},
              {"empty", empty},           {"emitted", emitted},
              {"informal_tokens", histogram(informal_tokens)},
              {"formal_tokens", histogram(formal_tokens)}};
}

FinetuneStats emit_finetune_dataset(const std::vector<BacktranslationPair>& pairs,
                                    const std::filesystem::path& out_dir,
                                    const FinetuneOptions& opts) {
  std::filesystem::create_directories(out_dir);

  FinetuneStats stats;
  stats.total = pairs.size();
  std::vector<json> train, audit;
  std::vector<size_t> informal_counts, formal_counts;
  for (const auto& pair : pairs) {
    stats.ok += pair.flagged() ? 0 : 1;
    stats.looping += pair.looping ? 1 : 0;
    stats.duplicate += pair.duplicate ? 1 : 0;
    stats.empty += pair.empty ? 1 : 0;
    audit.push_back(pair.to_json());
    if (pair.flagged() && opts.exclude_flagged) continue;
    train.push_back(
        {{"informal", pair.synthetic_informal},
         {"formal", pair.formal},
         {"text", pair.synthetic_informal + opts.separator + pair.formal}});
    informal_counts.push_back(split_whitespace(pair.synthetic_informal).size());
    formal_counts.push_back(split_whitespace(pair.formal).size());
  }
  stats.emitted = train.size();
  stats.informal_tokens = token_histogram(informal_counts);
  stats.formal_tokens = token_histogram(formal_counts);

  write_jsonl_atomic(out_dir / "train.jsonl", train);
  write_jsonl_atomic(out_dir / "audit.jsonl", audit);
  write_file_atomic(out_dir / "stats.json", stats.to_json().dump(2) + "\n");
  return stats;
}

}  // namespace autoform
