#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "autoform/backtranslation.hpp"
#include "autoform/checkers.hpp"
#include "autoform/engine.hpp"
#include "autoform/http_providers.hpp"

namespace autoform {

// One provider block. Secrets never appear here: `key_env` names an
// environment variable and a literal key in the config file is rejected at
// parse time, so config snapshots and manifests stay shareable.
struct ProviderSpec {
  std::string kind = "mock";  // "mock" | "http"
  std::string endpoint;
  std::string model;
  std::string key_env;
  int64_t timeout_ms = 30000;
  size_t attempts = 5;
  int64_t backoff_ms = 250;
  std::optional<uint64_t> seed;  // mock; unset = the run seed
  size_t dim = 16;               // mock embedding
  MockCompletionScript script;   // mock completion

  json to_json() const;
  static ProviderSpec from_json(const json& j, const std::string& where);
};

struct CheckerSpec {
  // "mock-ruleset" | "mock-latex-strict-ascii" | "typecheck-command" |
  // "latex-command"
  std::string kind = "mock-ruleset";
  bool default_ok = true;
  std::vector<CheckRule> rules;
  std::vector<std::string> command;
  std::string project_path;
  std::vector<std::string> imports;
  std::string template_path;
  std::string source_name;
  int64_t timeout_ms = 60000;

  json to_json() const;
  static CheckerSpec from_json(const json& j, const std::string& where);
};

struct BacktranslationSpec {
  std::string separator = "\n###\n";
  bool exclude_flagged = true;
  size_t min_repeats = 4;
  size_t ngram_len = 8;
  std::optional<size_t> max_examples;

  json to_json() const;
  static BacktranslationSpec from_json(const json& j, const std::string& where);
};

struct RunConfig {
  std::string benchmark_path;
  std::string kb_path;
  std::string index_path;
  std::string templates_dir;
  std::string out_dir;

  Method method = Method::fewshot;
  size_t k = 4;
  size_t shots = 3;
  size_t max_examples = 12;
  std::optional<size_t> budget;
  double temperature = 0.0;
  size_t max_tokens = 512;
  size_t parallelism = 1;
  uint64_t seed = 0;
  size_t batch = 64;

  ProviderSpec embedding;
  ProviderSpec completion;
  ProviderSpec teacher;
  CheckerSpec typecheck_checker;
  CheckerSpec latex_checker{.kind = "mock-latex-strict-ascii"};
  BacktranslationSpec backtranslation;

  json to_json() const;  // complete snapshot, manifest-safe
  static RunConfig from_json(const json& j, const std::string& where);
};

RunConfig load_run_config(const std::filesystem::path& path);

// Which parts of the config the current command actually uses; only those are
// validated so an eval run is not blocked by, say, an unset teacher block.
struct ConfigNeeds {
  bool benchmark = false;
  bool kb = false;
  bool index = false;
  bool out = false;
  bool embedding_provider = false;
  bool completion_provider = false;
  bool teacher_provider = false;
  bool typecheck_checker = false;
  bool latex_checker = false;
};

// Every problem, not just the first; empty means valid.
std::vector<std::string> validate_run_config(const RunConfig& config,
                                             const ConfigNeeds& needs);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const ProviderSpec& spec,
                                                           uint64_t run_seed);
std::unique_ptr<CompletionProvider> make_completion_provider(const ProviderSpec& spec,
                                                             uint64_t run_seed);
std::unique_ptr<Checker> make_checker(const CheckerSpec& spec);

}  // namespace autoform
