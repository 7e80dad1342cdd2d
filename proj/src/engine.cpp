#include "autoform/engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace autoform {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::fewshot: return "fewshot";
    case Method::retrieval: return "retrieval";
    case Method::finetuned_external: return "finetuned-external";
  }
  return "unknown";
}

Method method_from_name(std::string_view name) {
  if (name == "fewshot") return Method::fewshot;
  if (name == "retrieval") return Method::retrieval;
  if (name == "finetuned-external") return Method::finetuned_external;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

json GenerationRecord::to_json() const {
  json j{{"problem_id", problem_id},
         {"direction", std::string(direction_name(direction))},
         {"method", std::string(method_name(method))},
         {"prompt_rendered", prompt_rendered},
         {"raw_completion", raw_completion},
         {"extracted_statement", extracted_statement},
         {"provider_id", provider_id},
         {"params",
          {{"temperature", params.temperature},
           {"max_tokens", params.max_tokens},
           {"stop", params.stop}}},
         {"timestamp", timestamp}};
  if (draft_output) j["draft_output"] = *draft_output;
  if (retrieved_ids) j["retrieved_ids"] = *retrieved_ids;
  if (error) j["error"] = *error;
  return j;
}

GenerationRecord GenerationRecord::from_json(const json& j, const std::string& where) {
  GenerationRecord r;
  r.problem_id = get_required_string(j, "problem_id", where);
  try {
    r.direction = direction_from_name(get_required_string(j, "direction", where));
    r.method = method_from_name(get_required_string(j, "method", where));
  } catch (const ConfigError& e) {
    throw ParseError(where + ": " + e.what());
  }
  r.prompt_rendered = get_required_string(j, "prompt_rendered", where);
  r.raw_completion = get_required_string(j, "raw_completion", where);
  r.extracted_statement = get_required_string(j, "extracted_statement", where);
  r.provider_id = get_required_string(j, "provider_id", where);
  r.timestamp = get_required_string(j, "timestamp", where);

  auto p = j.find("params");
  if (p == j.end() || !p->is_object())
    throw ParseError(where + ": missing params object");
  r.params.temperature = p->value("temperature", 0.0);
  r.params.max_tokens = p->value("max_tokens", size_t{512});
  if (auto s = p->find("stop"); s != p->end())
    r.params.stop = s->get<std::vector<std::string>>();

  if (auto d = j.find("draft_output"); d != j.end())
    r.draft_output = d->get<std::string>();
  if (auto ids = j.find("retrieved_ids"); ids != j.end())
    r.retrieved_ids = ids->get<std::vector<std::string>>();
  if (auto e = j.find("error"); e != j.end()) r.error = e->get<std::string>();
  return r;
}

std::vector<GenerationRecord> load_records(const std::filesystem::path& path) {
  std::vector<GenerationRecord> out;
  for_each_json_line(path, [&](size_t line_no, const json& j) {
    out.push_back(GenerationRecord::from_json(
        j, path.string() + ":" + std::to_string(line_no)));
  });
  return out;
}

void save_records(const std::vector<GenerationRecord>& records,
                  const std::filesystem::path& path) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(r.to_json());
  write_jsonl_atomic(path, lines);
}

namespace {

CompletionParams merge_stops(const CompletionParams& params, const Prompt& prompt) {
  CompletionParams out = params;
  for (auto& stop : stop_sequences(prompt))
    if (std::find(out.stop.begin(), out.stop.end(), stop) == out.stop.end())
      out.stop.push_back(std::move(stop));
  return out;
}

void require_valid(const BenchmarkProblem& problem) {
  auto violations = validate_problem(problem);
  if (!violations.empty())
    throw std::invalid_argument("invalid problem '" + problem.id +
                                "': " + violations.front());
}

}  // namespace

GenerationRecord translate_fewshot(const BenchmarkProblem& problem,
                                   const std::vector<PromptExample>& examples,
                                   Direction direction, CompletionProvider& provider,
                                   const CompletionParams& params,
                                   const FewshotOptions& opts) {
  require_valid(problem);
  const std::string& query = direction == Direction::formalize
                                 ? problem.nl_statement
                                 : problem.formal_statement;
  Prompt prompt =
      build_fewshot_prompt(examples, query, direction, opts.max_examples, opts.prompt);
  if (opts.budget) prompt = truncate_to_budget(prompt, *opts.budget);

  GenerationRecord rec;
  rec.problem_id = problem.id;
  rec.direction = direction;
  rec.method = Method::fewshot;
  rec.prompt_rendered = prompt.rendered;
  rec.provider_id = provider.id();
  rec.params = merge_stops(params, prompt);
  rec.timestamp =
      provider.deterministic() ? kFixedTimestamp : utc_timestamp_now();
  try {
    rec.raw_completion = provider.complete(prompt.rendered, rec.params);
  } catch (const std::exception& e) {
    rec.error = std::string("completion: ") + e.what();
    return rec;
  }
  rec.extracted_statement = extract_completion(rec.raw_completion, rec.params.stop);
  if (rec.extracted_statement.empty()) rec.error = "empty-completion";
  return rec;
}

std::vector<RetrievalShot> prepare_retrieval_shots(
    const std::vector<PromptExample>& examples, size_t shots,
    const EmbeddingIndex& index, const StatementLookup& kb,
    EmbeddingProvider& embed_provider, size_t k) {
  size_t take = std::min(shots, examples.size());
  std::vector<RetrievalShot> out;
  out.reserve(take);
  for (size_t i = examples.size() - take; i < examples.size(); ++i) {
    auto vecs = embed_provider.embed({examples[i].formal_text});
    if (vecs.size() != 1)
      throw ProviderError("embedding provider returned " +
                          std::to_string(vecs.size()) + " vectors for one text");
    RetrievalShot shot;
    shot.example = examples[i];
    for (const auto& n : index.knn(vecs[0], k)) {
      const FormalStatement* s = kb.find(n.id);
      if (!s)
        throw ConfigError("retrieved id '" + n.id +
                          "' is not in the knowledge base; index and knowledge "
                          "base are out of sync");
      shot.references.push_back(*s);
    }
    out.push_back(std::move(shot));
  }
  return out;
}

GenerationRecord translate_with_retrieval(
    const BenchmarkProblem& problem,
    const std::vector<PromptExample>& fewshot_examples, const EmbeddingIndex& index,
    const StatementLookup& kb, EmbeddingProvider& embed_provider,
    CompletionProvider& completion_provider, size_t k, const CompletionParams& params,
    const RetrievalOptions& opts) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");

  GenerationRecord rec = translate_fewshot(problem, fewshot_examples,
                                           Direction::formalize, completion_provider,
                                           params, opts.draft);
  rec.method = Method::retrieval;
  bool det = completion_provider.deterministic() && embed_provider.deterministic();
  rec.timestamp = det ? kFixedTimestamp : utc_timestamp_now();
  if (rec.error) {
    rec.error = "draft: " + *rec.error;
    return rec;
  }
  rec.draft_output = rec.extracted_statement;
  rec.extracted_statement.clear();
  rec.raw_completion.clear();

  std::vector<float> draft_vec;
  try {
    auto vecs = embed_provider.embed({*rec.draft_output});
    if (vecs.size() != 1 || vecs[0].empty())
      throw ProviderError("embedding provider returned no vector for the draft");
    draft_vec = std::move(vecs[0]);
  } catch (const std::exception& e) {
    rec.error = std::string("embed: ") + e.what();
    return rec;
  }

  std::vector<FormalStatement> query_refs;
  std::vector<RetrievalShot> shots;
  try {
    std::vector<std::string> ids;
    for (const auto& n : index.knn(draft_vec, k)) {
      const FormalStatement* s = kb.find(n.id);
      if (!s)
        throw ConfigError("retrieved id '" + n.id +
                          "' is not in the knowledge base; index and knowledge "
                          "base are out of sync");
      ids.push_back(n.id);
      query_refs.push_back(*s);
    }
    rec.retrieved_ids = std::move(ids);
    shots = prepare_retrieval_shots(fewshot_examples, opts.shots, index, kb,
                                    embed_provider, k);
  } catch (const std::exception& e) {
    rec.error = std::string("retrieve: ") + e.what();
    return rec;
  }

  Prompt prompt;
  try {
    prompt = build_retrieval_prompt(shots, problem.nl_statement, query_refs,
                                    opts.prompt);
    if (opts.budget) prompt = truncate_to_budget(prompt, *opts.budget);
  } catch (const std::exception& e) {
    rec.error = std::string("prompt: ") + e.what();
    return rec;
  }

  rec.prompt_rendered = prompt.rendered;
  rec.params = merge_stops(params, prompt);
  try {
    rec.raw_completion = completion_provider.complete(prompt.rendered, rec.params);
  } catch (const std::exception& e) {
    rec.error = std::string("completion: ") + e.what();
    return rec;
  }
  rec.extracted_statement = extract_completion(rec.raw_completion, rec.params.stop);
  if (rec.extracted_statement.empty()) rec.error = "empty-completion";
  return rec;
}

namespace {

json options_json(const FewshotOptions& o) {
  json j{{"max_examples", o.max_examples},
         {"instruction", o.prompt.instruction},
         {"template", o.prompt.template_text}};
  if (o.budget) j["budget"] = *o.budget;
  return j;
}

json canonical_config_json(const RunBatchConfig& config) {
  json examples = json::array();
  for (const auto& ex : config.examples)
    examples.push_back({{"nl", ex.nl_text}, {"formal", ex.formal_text}});
  json j{{"direction", std::string(direction_name(config.direction))},
         {"method", std::string(method_name(config.method))},
         {"params",
          {{"temperature", config.params.temperature},
           {"max_tokens", config.params.max_tokens},
           {"stop", config.params.stop}}},
         {"examples_digest", hex64(fnv1a64(examples.dump()))},
         {"example_count", config.examples.size()}};
  if (config.method == Method::fewshot) {
    j["fewshot"] = options_json(config.fewshot);
  } else {
    j["draft"] = options_json(config.retrieval.draft);
    j["k"] = config.k;
    j["shots"] = config.retrieval.shots;
    j["retrieval_instruction"] = config.retrieval.prompt.instruction;
    j["retrieval_template"] = config.retrieval.prompt.template_text;
    if (config.retrieval.budget) j["retrieval_budget"] = *config.retrieval.budget;
  }
  return j;
}

}  // namespace

RunBatchResult run_batch(const std::vector<BenchmarkProblem>& problems,
                         const RunBatchConfig& config) {
  if (!config.completion_provider)
    throw ConfigError("run_batch needs a completion provider");
  if (config.examples.empty())
    throw ConfigError("run_batch needs at least one prompt example");
  if (config.parallelism == 0) throw ConfigError("parallelism must be >= 1");
  if (config.method == Method::retrieval) {
    if (config.direction != Direction::formalize)
      throw ConfigError("retrieval applies to formalization only");
    if (!config.index || !config.embed_provider || !config.kb)
      throw ConfigError(
          "retrieval needs an index, an embedding provider and a knowledge base");
    if (config.k == 0) throw ConfigError("k must be >= 1");
  }
  if (config.method == Method::finetuned_external)
    throw ConfigError(
        "finetuned-external records come from imported completions, not run_batch");
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& p : problems) {
      auto violations = validate_problem(p);
      if (!violations.empty())
        throw ConfigError("invalid problem '" + p.id + "': " + violations.front());
      if (!seen.insert(p.id).second)
        throw ConfigError("duplicate problem id '" + p.id + "'");
    }
  }

  std::optional<StatementLookup> kb;
  if (config.method == Method::retrieval) kb.emplace(*config.kb);

  bool det = config.completion_provider->deterministic() &&
             (config.method != Method::retrieval ||
              config.embed_provider->deterministic());
  std::string started = det ? kFixedTimestamp : utc_timestamp_now();

  std::vector<GenerationRecord> records(problems.size());
  parallel_for(problems.size(), config.parallelism, [&](size_t i) {
    if (config.method == Method::fewshot) {
      records[i] = translate_fewshot(problems[i], config.examples, config.direction,
                                     *config.completion_provider, config.params,
                                     config.fewshot);
    } else {
      records[i] = translate_with_retrieval(
          problems[i], config.examples, *config.index, *kb, *config.embed_provider,
          *config.completion_provider, config.k, config.params, config.retrieval);
    }
  });
  std::sort(records.begin(), records.end(),
            [](const GenerationRecord& a, const GenerationRecord& b) {
              return a.problem_id < b.problem_id;
            });

  size_t ok = 0;
  for (const auto& r : records) ok += r.ok() ? 1 : 0;

  json canonical = canonical_config_json(config);
  json providers = json::array({config.completion_provider->id()});
  if (config.method == Method::retrieval)
    providers.push_back(config.embed_provider->id());

  RunBatchResult result;
  result.records = std::move(records);
  result.manifest = json{{"config", canonical},
                         {"config_hash", hex64(fnv1a64(canonical.dump()))},
                         {"providers", providers},
                         {"problems", problems.size()},
                         {"ok", ok},
                         {"errors", problems.size() - ok},
                         {"started", started},
                         {"finished", det ? kFixedTimestamp : utc_timestamp_now()}};
  return result;
}

}  // namespace autoform
