#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "autoform/backtranslation.hpp"
#include "autoform/checkers.hpp"
#include "autoform/config.hpp"
#include "autoform/corpus.hpp"
#include "autoform/engine.hpp"
#include "autoform/ioutil.hpp"
#include "autoform/metrics.hpp"
#include "autoform/prompting.hpp"

namespace fs = std::filesystem;
using namespace autoform;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Flags land here only when given on the command line, so the precedence is
// flags over config file over defaults.
struct Overrides {
  std::optional<std::string> config_file;
  std::optional<std::string> benchmark;
  std::optional<std::string> kb;
  std::optional<std::string> index;
  std::optional<std::string> templates;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<std::string> provider_kind;  // index: embedding, backtranslate: teacher
  std::optional<size_t> k;
  std::optional<size_t> shots;
  std::optional<size_t> max_examples;
  std::optional<size_t> budget;
  std::optional<size_t> max_tokens;
  std::optional<size_t> parallelism;
  std::optional<size_t> batch;
  std::optional<double> temperature;
  std::optional<uint64_t> seed;
  std::optional<std::string> prompt_template;

  // Subcommand-local inputs with no config-file home.
  std::string examples_file;
  std::string extract_dir;
  std::string records_file;
  std::string kb_prompts_file;
  std::string judgments_file;
  std::string bleu_mode = "corpus";
  std::vector<std::string> run_dirs;
  bool include_name = false;
};

RunConfig effective_config(const Overrides& o) {
  RunConfig c = o.config_file ? load_run_config(*o.config_file) : RunConfig{};
  if (o.benchmark) c.benchmark_path = *o.benchmark;
  if (o.kb) c.kb_path = *o.kb;
  if (o.index) c.index_path = *o.index;
  if (o.templates) c.templates_dir = *o.templates;
  if (o.out) c.out_dir = *o.out;
  if (o.method) c.method = method_from_name(*o.method);
  if (o.k) c.k = *o.k;
  if (o.shots) c.shots = *o.shots;
  if (o.max_examples) c.max_examples = *o.max_examples;
  if (o.budget) c.budget = *o.budget;
  if (o.max_tokens) c.max_tokens = *o.max_tokens;
  if (o.parallelism) c.parallelism = *o.parallelism;
  if (o.batch) c.batch = *o.batch;
  if (o.temperature) c.temperature = *o.temperature;
  if (o.seed) c.seed = *o.seed;
  return c;
}

int report_problems(const std::vector<std::string>& problems) {
  for (const auto& p : problems) std::fprintf(stderr, "autoform: config: %s\n", p.c_str());
  return 2;
}

// Manifest snapshot of the config. Parallelism is execution width, not an
// input: results are identical across worker counts, so it stays out of the
// hash and the snapshot.
json manifest_config(const RunConfig& config) {
  json j = config.to_json();
  j["params"].erase("parallelism");
  return j;
}

json input_entry(const fs::path& path) {
  return json{{"path", path.string()}, {"digest", file_digest(path)}};
}

// Deterministic runs pin both timestamps so a rerun is byte-identical.
json timings(bool deterministic, const std::string& started) {
  if (deterministic)
    return json{{"started", kFixedTimestamp}, {"finished", kFixedTimestamp}};
  return json{{"started", started}, {"finished", utc_timestamp_now()}};
}

json base_manifest(const std::string& command, const RunConfig& config,
                   json inputs, std::vector<std::string> outputs,
                   bool deterministic, const std::string& started) {
  json cfg = manifest_config(config);
  return json{{"command", command},
              {"config", cfg},
              {"config_hash", hex64(fnv1a64(cfg.dump()))},
              {"inputs", std::move(inputs)},
              {"outputs", std::move(outputs)},
              {"versions", json{{"autoform", kToolVersion}, {"record_format", 1}, {"index_format", 1}}},
              {"timings", timings(deterministic, started)}};
}

void write_manifest(const fs::path& path, const json& manifest) {
  write_file_atomic(path, manifest.dump(2) + "\n");
}

// Template files under templates_dir override the built-ins when present; an
// explicit --prompt-template wins over both.
std::string template_for(const RunConfig& config, const Overrides& o,
                         const char* filename) {
  if (o.prompt_template) return PromptTemplate::load_file(*o.prompt_template).text;
  if (!config.templates_dir.empty()) {
    fs::path p = fs::path(config.templates_dir) / filename;
    if (fs::exists(p)) return PromptTemplate::load_file(p).text;
  }
  return "";
}

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const Overrides& o) {
  RunConfig config = effective_config(o);
  std::string started = utc_timestamp_now();

  std::vector<std::string> problems;
  if (config.benchmark_path.empty() && config.kb_path.empty() && o.extract_dir.empty())
    problems.push_back("ingest needs at least one input (--benchmark, --kb or --extract)");
  ConfigNeeds needs;
  needs.benchmark = !config.benchmark_path.empty();
  needs.kb = !config.kb_path.empty();
  needs.out = true;
  for (auto& p : validate_run_config(config, needs)) problems.push_back(std::move(p));
  if (!o.extract_dir.empty() && !fs::is_directory(o.extract_dir))
    problems.push_back("extract directory does not exist: " + o.extract_dir);
  if (!problems.empty()) return report_problems(problems);

  fs::path out_dir = config.out_dir;
  fs::create_directories(out_dir);
  json inputs = json::object();
  std::vector<std::string> outputs;
  json counts = json::object();
  std::vector<std::string> warnings;

  if (!config.benchmark_path.empty()) {
    auto benchmark = load_benchmark(config.benchmark_path);
    save_benchmark(benchmark, out_dir / "benchmark.jsonl");
    inputs["benchmark"] = input_entry(config.benchmark_path);
    outputs.push_back("benchmark.jsonl");
    counts["problems"] = benchmark.size();
  }

  std::vector<FormalStatement> statements;
  if (!config.kb_path.empty()) {
    statements = load_knowledge_base(config.kb_path);
    inputs["kb"] = input_entry(config.kb_path);
  }
  if (!o.extract_dir.empty()) {
    fs::path root = o.extract_dir;
    std::vector<fs::path> sources;
    for (const auto& entry : fs::recursive_directory_iterator(root))
      if (entry.is_regular_file() && entry.path().extension() == ".lean")
        sources.push_back(entry.path());
    std::sort(sources.begin(), sources.end());  // directory iteration order is unspecified
    json extracted = json::array();
    for (const auto& src : sources) {
      std::string origin = fs::relative(src, root).generic_string();
      auto result = extract_declarations(read_file(src), origin);
      for (auto& s : result.statements) statements.push_back(std::move(s));
      for (auto& w : result.warnings) warnings.push_back(origin + ": " + w);
      extracted.push_back(input_entry(src));
    }
    inputs["extract"] = std::move(extracted);
    counts["source_files"] = sources.size();
  }
  if (!config.kb_path.empty() || !o.extract_dir.empty()) {
    save_knowledge_base(statements, out_dir / "kb.jsonl");
    outputs.push_back("kb.jsonl");
    counts["statements"] = statements.size();
  }
  for (const auto& w : warnings) std::fprintf(stderr, "autoform: warning: %s\n", w.c_str());
  counts["warnings"] = warnings.size();

  json manifest = base_manifest("ingest", config, std::move(inputs), outputs,
                                /*deterministic=*/true, started);
  manifest["counts"] = counts;
  manifest["warnings"] = warnings;
  write_manifest(out_dir / "manifest.json", manifest);

  std::string summary = "ingest:";
  if (counts.contains("problems"))
    summary += " " + std::to_string(counts["problems"].get<size_t>()) + " problems";
  if (counts.contains("statements"))
    summary += " " + std::to_string(counts["statements"].get<size_t>()) + " statements";
  std::printf("%s -> %s\n", summary.c_str(), out_dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// index

int cmd_index(const Overrides& o) {
  RunConfig config = effective_config(o);
  if (o.provider_kind) config.embedding.kind = *o.provider_kind;
  std::string started = utc_timestamp_now();

  // --out names the index file itself, not a directory.
  std::string out_file = o.out ? *o.out : config.index_path;
  std::vector<std::string> problems;
  if (out_file.empty())
    problems.push_back("index output file is required (--out)");
  ConfigNeeds needs;
  needs.kb = true;
  needs.embedding_provider = true;
  for (auto& p : validate_run_config(config, needs)) problems.push_back(std::move(p));
  if (!problems.empty()) return report_problems(problems);

  auto statements = load_knowledge_base(config.kb_path);
  auto provider = make_embedding_provider(config.embedding, config.seed);

  BuildIndexOptions opts;
  opts.batch_size = config.batch;
  opts.in_flight = config.parallelism;
  opts.include_name = o.include_name;
  EmbeddingIndex index = build_index(statements, *provider, opts);

  // A provider failure throws before this point, so no partial file appears.
  fs::path out_path = out_file;
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  index.save(out_path);

  json manifest = base_manifest("index", config,
                                json{{"kb", input_entry(config.kb_path)}},
                                {out_path.filename().string()},
                                provider->deterministic(), started);
  manifest["provider"] = provider->id();
  manifest["rows"] = index.size();
  manifest["dim"] = index.dim();
  manifest["include_name"] = o.include_name;
  write_manifest(out_path.string() + ".manifest.json", manifest);

  std::printf("index: %zu rows, dim %zu -> %s\n", index.size(), index.dim(),
              out_path.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// formalize / informalize

int cmd_translate(const Overrides& o, Direction direction) {
  RunConfig config = effective_config(o);
  std::string started = utc_timestamp_now();
  bool retrieval = config.method == Method::retrieval;

  std::vector<std::string> problems;
  if (o.examples_file.empty())
    problems.push_back("prompt examples file is required (--examples)");
  else if (!fs::exists(o.examples_file))
    problems.push_back("prompt examples file does not exist: " + o.examples_file);
  ConfigNeeds needs;
  needs.benchmark = true;
  needs.out = true;
  needs.completion_provider = true;
  if (retrieval) {
    needs.index = true;
    needs.kb = true;
    needs.embedding_provider = true;
  }
  for (auto& p : validate_run_config(config, needs)) problems.push_back(std::move(p));
  if (!problems.empty()) return report_problems(problems);

  auto benchmark = load_benchmark(config.benchmark_path);
  auto examples = load_prompt_examples(o.examples_file);
  auto completion = make_completion_provider(config.completion, config.seed);

  RunBatchConfig batch;
  batch.direction = direction;
  batch.method = config.method;
  batch.examples = std::move(examples);
  batch.params.temperature = config.temperature;
  batch.params.max_tokens = config.max_tokens;
  batch.parallelism = config.parallelism;
  batch.k = config.k;
  batch.fewshot.max_examples = config.max_examples;
  batch.fewshot.budget = config.budget;
  batch.fewshot.prompt.template_text = template_for(config, o, "fewshot.txt");
  batch.retrieval.draft.max_examples = config.max_examples;
  batch.retrieval.draft.budget = config.budget;
  batch.retrieval.shots = config.shots;
  batch.retrieval.budget = config.budget;
  batch.retrieval.prompt.template_text = template_for(config, o, "retrieval.txt");
  batch.completion_provider = completion.get();

  std::unique_ptr<EmbeddingProvider> embed;
  std::optional<EmbeddingIndex> index;
  std::vector<FormalStatement> kb;
  json inputs{{"benchmark", input_entry(config.benchmark_path)},
              {"examples", input_entry(o.examples_file)}};
  if (retrieval) {
    embed = make_embedding_provider(config.embedding, config.seed);
    index = EmbeddingIndex::load(config.index_path);
    kb = load_knowledge_base(config.kb_path);
    batch.embed_provider = embed.get();
    batch.index = &*index;
    batch.kb = &kb;
    inputs["index"] = input_entry(config.index_path);
    inputs["kb"] = input_entry(config.kb_path);
  }

  RunBatchResult result = run_batch(benchmark, batch);

  fs::path out_dir = config.out_dir;
  fs::create_directories(out_dir);
  save_records(result.records, out_dir / "records.jsonl");

  bool deterministic = completion->deterministic() && (!embed || embed->deterministic());
  std::string command(direction_name(direction));
  json manifest = base_manifest(command, config, std::move(inputs),
                                {"records.jsonl"}, deterministic, started);
  manifest["run"] = result.manifest;
  write_manifest(out_dir / "manifest.json", manifest);

  size_t failed = 0;
  for (const auto& r : result.records)
    if (!r.ok()) ++failed;
  std::printf("%s: %zu records, %zu failed -> %s\n", command.c_str(),
              result.records.size(), failed, (out_dir / "records.jsonl").string().c_str());
  return failed > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// backtranslate

int cmd_backtranslate(const Overrides& o) {
  RunConfig config = effective_config(o);
  if (o.provider_kind) config.teacher.kind = *o.provider_kind;
  std::string started = utc_timestamp_now();

  std::vector<std::string> problems;
  if (o.examples_file.empty())
    problems.push_back("prompt examples file is required (--prompt)");
  else if (!fs::exists(o.examples_file))
    problems.push_back("prompt examples file does not exist: " + o.examples_file);
  ConfigNeeds needs;
  needs.kb = true;
  needs.out = true;
  needs.teacher_provider = true;
  for (auto& p : validate_run_config(config, needs)) problems.push_back(std::move(p));
  if (!problems.empty()) return report_problems(problems);

  auto corpus = load_knowledge_base(config.kb_path);
  auto examples = load_prompt_examples(o.examples_file);
  auto teacher = make_completion_provider(config.teacher, config.seed);

  CompletionParams params;
  params.temperature = config.temperature;
  params.max_tokens = config.max_tokens;

  SynthesizeOptions opts;
  opts.parallelism = config.parallelism;
  opts.max_examples = config.backtranslation.max_examples;
  opts.looping_min_repeats = config.backtranslation.min_repeats;
  opts.looping_ngram_len = config.backtranslation.ngram_len;
  opts.prompt.template_text = template_for(config, o, "fewshot.txt");

  auto pairs = synthesize(corpus, examples, *teacher, params, opts);

  fs::path out_dir = config.out_dir;
  fs::create_directories(out_dir);
  FinetuneOptions emit;
  emit.separator = config.backtranslation.separator;
  emit.exclude_flagged = config.backtranslation.exclude_flagged;
  FinetuneStats stats = emit_finetune_dataset(pairs, out_dir, emit);

  json manifest = base_manifest("backtranslate", config,
                                json{{"kb", input_entry(config.kb_path)},
                                     {"prompt", input_entry(o.examples_file)}},
                                {"train.jsonl", "audit.jsonl", "stats.json"},
                                teacher->deterministic(), started);
  manifest["teacher"] = teacher->id();
  manifest["stats"] = stats.to_json();
  write_manifest(out_dir / "manifest.json", manifest);

  std::printf("backtranslate: %zu pairs, %zu emitted (%zu looping, %zu duplicate, %zu empty) -> %s\n",
              stats.total, stats.emitted, stats.looping, stats.duplicate, stats.empty,
              out_dir.string().c_str());
  return stats.empty > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// eval

struct GroupKey {
  std::string method;
  Direction direction;
  bool operator<(const GroupKey& other) const {
    if (method != other.method) return method < other.method;
    return static_cast<int>(direction) < static_cast<int>(other.direction);
  }
};

json outcome_line(const GenerationRecord& record, const RateOutcome& outcome) {
  return json{{"problem_id", outcome.problem_id},
              {"method", method_name(record.method)},
              {"direction", direction_name(record.direction)},
              {"generated", record.ok()},
              {"positive", outcome.positive},
              {"copy", outcome.copy},
              {"check", json{{"ok", outcome.check.ok},
                             {"diagnostics", outcome.check.diagnostics},
                             {"duration_ms", outcome.check.duration_ms},
                             {"timed_out", outcome.check.timed_out}}}};
}

int cmd_eval(const Overrides& o) {
  RunConfig config = effective_config(o);
  std::string started = utc_timestamp_now();

  std::vector<std::string> problems;
  if (o.records_file.empty())
    problems.push_back("records file is required (--records)");
  else if (!fs::exists(o.records_file))
    problems.push_back("records file does not exist: " + o.records_file);
  for (const auto& [label, path] : {std::pair{"kb-prompts", o.kb_prompts_file},
                                    std::pair{"judgments", o.judgments_file}})
    if (!path.empty() && !fs::exists(path))
      problems.push_back(std::string(label) + " file does not exist: " + path);
  if (!problems.empty()) return report_problems(problems);

  auto records = load_records(o.records_file);
  if (records.empty()) {
    std::fprintf(stderr, "autoform: config: records file is empty: %s\n",
                 o.records_file.c_str());
    return 2;
  }

  std::map<GroupKey, std::vector<GenerationRecord>> groups;
  for (auto& r : records)
    groups[{std::string(method_name(r.method)), r.direction}].push_back(std::move(r));
  bool has_formalize = false;
  bool has_informalize = false;
  for (const auto& [key, group] : groups) {
    (void)group;
    (key.direction == Direction::formalize ? has_formalize : has_informalize) = true;
  }

  ConfigNeeds needs;
  needs.benchmark = true;  // gold references for the text-overlap score
  needs.out = true;
  needs.typecheck_checker = has_formalize;
  needs.latex_checker = has_informalize;
  if (auto errors = validate_run_config(config, needs); !errors.empty())
    return report_problems(errors);

  auto benchmark = load_benchmark(config.benchmark_path);
  std::map<std::string, const BenchmarkProblem*> by_id;
  for (const auto& p : benchmark) by_id[p.id] = &p;

  std::vector<std::string> prompt_statements;
  if (!o.kb_prompts_file.empty())
    for (const auto& e : load_prompt_examples(o.kb_prompts_file))
      prompt_statements.push_back(e.formal_text);

  std::vector<Judgment> judgments;
  if (!o.judgments_file.empty()) judgments = load_judgments(o.judgments_file);

  std::unique_ptr<Checker> typecheck_checker, latex_checker;
  if (has_formalize) typecheck_checker = make_checker(config.typecheck_checker);
  if (has_informalize) latex_checker = make_checker(config.latex_checker);

  std::vector<EvalRow> rows;
  std::vector<json> outcome_lines;
  for (const auto& [key, group] : groups) {
    EvalRow row;
    row.method = key.method;
    row.direction = key.direction;
    row.n = group.size();

    // A failed generation has an empty candidate: it stays in n and drags the
    // corpus score down instead of being dropped.
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& r : group) {
      auto it = by_id.find(r.problem_id);
      if (it == by_id.end())
        throw ConfigError("record " + r.problem_id + " is not in the benchmark: " +
                          config.benchmark_path);
      const std::string& reference = key.direction == Direction::formalize
                                         ? it->second->formal_statement
                                         : it->second->nl_statement;
      pairs.emplace_back(r.ok() ? r.extracted_statement : "", reference);
    }
    row.bleu = o.bleu_mode == "mean" ? mean_sentence_bleu(pairs) : corpus_bleu(pairs);

    RateResult rate;
    if (key.direction == Direction::formalize) {
      rate = typecheck_rate(group, *typecheck_checker, prompt_statements,
                            config.parallelism);
      row.typecheck = rate.rate;
      row.typechecked = rate.positives;
      row.copies_excluded = rate.copies_excluded;
    } else {
      rate = compile_rate(group, *latex_checker, config.parallelism);
      row.compile = rate.rate;
      row.compiled = rate.positives;
    }
    for (size_t i = 0; i < group.size(); ++i)
      outcome_lines.push_back(outcome_line(group[i], rate.outcomes[i]));

    if (!o.judgments_file.empty()) {
      AccuracyResult acc = accuracy(group, judgments);
      row.accuracy = acc.rate;
      row.correct = acc.correct;
      row.unjudged = acc.unjudged;
    }
    rows.push_back(std::move(row));
  }

  EvalReport report = aggregate(std::move(rows));
  std::string table = render_report_table(report);

  fs::path out_dir = config.out_dir;
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "eval.json", report.to_json().dump(2) + "\n");
  write_file_atomic(out_dir / "report.txt", table);
  write_jsonl_atomic(out_dir / "outcomes.jsonl", outcome_lines);

  bool deterministic =
      (!typecheck_checker || config.typecheck_checker.kind.starts_with("mock-")) &&
      (!latex_checker || config.latex_checker.kind.starts_with("mock-"));
  json inputs{{"records", input_entry(o.records_file)},
              {"benchmark", input_entry(config.benchmark_path)}};
  if (!o.kb_prompts_file.empty()) inputs["kb_prompts"] = input_entry(o.kb_prompts_file);
  if (!o.judgments_file.empty()) inputs["judgments"] = input_entry(o.judgments_file);
  json manifest = base_manifest("eval", config, std::move(inputs),
                                {"eval.json", "report.txt", "outcomes.jsonl"},
                                deterministic, started);
  json checkers = json::array();
  if (typecheck_checker) checkers.push_back(typecheck_checker->id());
  if (latex_checker) checkers.push_back(latex_checker->id());
  manifest["checkers"] = checkers;
  manifest["bleu_mode"] = o.bleu_mode;
  write_manifest(out_dir / "manifest.json", manifest);

  std::fputs(table.c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const Overrides& o) {
  RunConfig config = effective_config(o);
  std::string started = utc_timestamp_now();

  std::vector<std::string> problems;
  std::vector<fs::path> eval_files;
  for (const auto& dir : o.run_dirs) {
    fs::path f = fs::path(dir) / "eval.json";
    if (fs::exists(f))
      eval_files.push_back(f);
    else
      problems.push_back("run directory has no eval.json: " + dir);
  }
  if (!problems.empty()) return report_problems(problems);

  std::vector<EvalRow> rows;
  json inputs = json::array();
  for (const auto& f : eval_files) {
    json j;
    try {
      j = json::parse(read_file(f));
    } catch (const json::parse_error& e) {
      throw ParseError(f.string() + ": " + e.what());
    }
    EvalReport part = EvalReport::from_json(j, f.string());
    for (auto& row : part.rows) rows.push_back(std::move(row));
    inputs.push_back(input_entry(f));
  }

  EvalReport combined = aggregate(std::move(rows));
  std::string table = render_report_table(combined);
  std::fputs(table.c_str(), stdout);

  if (!config.out_dir.empty()) {
    fs::path out_dir = config.out_dir;
    fs::create_directories(out_dir);
    write_file_atomic(out_dir / "report.json", combined.to_json().dump(2) + "\n");
    write_file_atomic(out_dir / "report.txt", table);
    json manifest = base_manifest("report", config, json{{"runs", std::move(inputs)}},
                                  {"report.json", "report.txt"},
                                  /*deterministic=*/true, started);
    write_manifest(out_dir / "manifest.json", manifest);
  }
  return 0;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const BatchError& e) {
    std::fprintf(stderr, "autoform: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "autoform: %s\n", e.what());
    return 2;
  }
}

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_file, "JSON config file");
  sub->add_option("--seed", o.seed, "run seed; seeds mock providers");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autoformalization pipeline"};
  app.require_subcommand(1);
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "validate corpus files and emit canonical copies");
  add_common(ingest, o);
  ingest->add_option("--benchmark", o.benchmark, "benchmark JSONL");
  ingest->add_option("--kb", o.kb, "knowledge-base JSONL");
  ingest->add_option("--extract", o.extract_dir, "formal-library source directory to scan");
  ingest->add_option("--out", o.out, "output directory");

  auto* index = app.add_subcommand("index", "embed the knowledge base into a vector index");
  add_common(index, o);
  index->add_option("--kb", o.kb, "knowledge-base JSONL");
  index->add_option("--provider", o.provider_kind, "embedding provider kind")
      ->check(CLI::IsMember({"mock", "http"}));
  index->add_option("--out", o.out, "index file to write");
  index->add_option("--batch", o.batch, "statements per embedding request");
  index->add_option("--parallelism", o.parallelism, "concurrent embedding batches");
  index->add_flag("--include-name", o.include_name, "embed the statement name with its text");

  auto add_translate_options = [&](CLI::App* sub) {
    add_common(sub, o);
    sub->add_option("--benchmark", o.benchmark, "benchmark JSONL");
    sub->add_option("--examples", o.examples_file, "prompt examples JSONL");
    sub->add_option("--method", o.method, "translation method")
        ->check(CLI::IsMember({"fewshot", "retrieval"}));
    sub->add_option("--index", o.index, "embedding index file");
    sub->add_option("--kb", o.kb, "knowledge-base JSONL");
    sub->add_option("--k", o.k, "retrieved statements per query");
    sub->add_option("--shots", o.shots, "retrieval prompt shots");
    sub->add_option("--max-examples", o.max_examples, "few-shot examples cap");
    sub->add_option("--budget", o.budget, "prompt token budget");
    sub->add_option("--prompt-template", o.prompt_template, "prompt template file");
    sub->add_option("--temperature", o.temperature, "sampling temperature");
    sub->add_option("--max-tokens", o.max_tokens, "completion token cap");
    sub->add_option("--parallelism", o.parallelism, "concurrent translations");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* formalize = app.add_subcommand("formalize", "translate natural language to formal statements");
  add_translate_options(formalize);
  auto* informalize = app.add_subcommand("informalize", "translate formal statements to natural language");
  add_translate_options(informalize);

  auto* backtranslate = app.add_subcommand("backtranslate", "synthesize informal text for knowledge-base statements");
  add_common(backtranslate, o);
  backtranslate->add_option("--kb", o.kb, "knowledge-base JSONL");
  backtranslate->add_option("--prompt", o.examples_file, "prompt examples JSONL");
  backtranslate->add_option("--teacher", o.provider_kind, "teacher provider kind")
      ->check(CLI::IsMember({"mock", "http"}));
  backtranslate->add_option("--temperature", o.temperature, "sampling temperature");
  backtranslate->add_option("--max-tokens", o.max_tokens, "completion token cap");
  backtranslate->add_option("--parallelism", o.parallelism, "concurrent teacher calls");
  backtranslate->add_option("--out", o.out, "output directory");

  auto* eval = app.add_subcommand("eval", "score a records file");
  add_common(eval, o);
  eval->add_option("--records", o.records_file, "records JSONL from formalize/informalize");
  eval->add_option("--benchmark", o.benchmark, "benchmark JSONL with gold statements");
  eval->add_option("--kb-prompts", o.kb_prompts_file, "prompt examples JSONL for copy exclusion");
  eval->add_option("--judgments", o.judgments_file, "human judgments JSONL");
  eval->add_option("--bleu", o.bleu_mode, "text-overlap aggregation")
      ->check(CLI::IsMember({"corpus", "mean"}));
  eval->add_option("--parallelism", o.parallelism, "concurrent checker runs");
  eval->add_option("--out", o.out, "output directory");

  auto* report = app.add_subcommand("report", "combine eval outputs into one table");
  add_common(report, o);
  report->add_option("--runs", o.run_dirs, "eval output directories")->expected(-1);
  report->add_option("--out", o.out, "output directory for the combined report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (ingest->parsed()) return run_guarded([&] { return cmd_ingest(o); });
  if (index->parsed()) return run_guarded([&] { return cmd_index(o); });
  if (formalize->parsed())
    return run_guarded([&] { return cmd_translate(o, Direction::formalize); });
  if (informalize->parsed())
    return run_guarded([&] { return cmd_translate(o, Direction::informalize); });
  if (backtranslate->parsed()) return run_guarded([&] { return cmd_backtranslate(o); });
  if (eval->parsed()) return run_guarded([&] { return cmd_eval(o); });
  if (report->parsed()) return run_guarded([&] { return cmd_report(o); });
  return 2;
}
