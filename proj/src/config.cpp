#include "autoform/config.hpp"

#include <cstdlib>
#include <initializer_list>
#include <regex>
#include <set>
#include <string_view>

#include "autoform/ioutil.hpp"

namespace autoform {

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* candidate : allowed)
      if (key == candidate) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& get_object(const json& j, const char* key, const std::string& where) {
  static const json empty = json::object();
  auto it = j.find(key);
  if (it == j.end()) return empty;
  if (!it->is_object())
    throw ConfigError(where + "." + key + " must be an object");
  return *it;
}

std::string get_string(const json& j, const char* key, std::string fallback,
                       const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string())
    throw ConfigError(where + "." + key + " must be a string");
  return it->get<std::string>();
}

size_t get_count(const json& j, const char* key, size_t fallback,
                 const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_unsigned())
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  return it->get<size_t>();
}

std::optional<size_t> get_optional_count(const json& j, const char* key,
                                         const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned())
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  return it->get<size_t>();
}

int64_t get_ms(const json& j, const char* key, int64_t fallback,
               const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer() || it->get<int64_t>() < 0)
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  return it->get<int64_t>();
}

double get_number(const json& j, const char* key, double fallback,
                  const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number())
    throw ConfigError(where + "." + key + " must be a number");
  return it->get<double>();
}

bool get_bool(const json& j, const char* key, bool fallback,
              const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean())
    throw ConfigError(where + "." + key + " must be a boolean");
  return it->get<bool>();
}

std::vector<std::string> get_string_list(const json& j, const char* key,
                                         const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return {};
  if (!it->is_array())
    throw ConfigError(where + "." + key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& element : *it) {
    if (!element.is_string())
      throw ConfigError(where + "." + key + " must be an array of strings");
    out.push_back(element.get<std::string>());
  }
  return out;
}

json string_list_json(const std::vector<std::string>& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back(v);
  return out;
}

}  // namespace

json ProviderSpec::to_json() const {
  json script_json{
      {"canned", json::array()},
      {"fail_if_prompt_contains", string_list_json(script.fail_if_prompt_contains)},
      {"loop_if_prompt_contains", string_list_json(script.loop_if_prompt_contains)},
      {"loop_text", script.loop_text}};
  for (const auto& [needle, text] : script.canned)
    script_json["canned"].push_back(json::array({needle, text}));

  json j{{"kind", kind},
         {"endpoint", endpoint},
         {"model", model},
         {"key_env", key_env},
         {"timeout_ms", timeout_ms},
         {"attempts", attempts},
         {"backoff_ms", backoff_ms},
         {"dim", dim},
         {"script", std::move(script_json)}};
  if (seed) j["seed"] = *seed;
  return j;
}

ProviderSpec ProviderSpec::from_json(const json& j, const std::string& where) {
  for (const char* forbidden : {"key", "api_key", "token", "secret"})
    if (j.contains(forbidden))
      throw ConfigError(where + ": a literal key must not appear in a config "
                        "file; set " + where +
                        ".key_env to the name of an environment variable");
  reject_unknown_keys(j,
                      {"kind", "endpoint", "model", "key_env", "timeout_ms",
                       "attempts", "backoff_ms", "seed", "dim", "script"},
                      where);
  ProviderSpec spec;
  spec.kind = get_string(j, "kind", spec.kind, where);
  spec.endpoint = get_string(j, "endpoint", "", where);
  spec.model = get_string(j, "model", "", where);
  spec.key_env = get_string(j, "key_env", "", where);
  spec.timeout_ms = get_ms(j, "timeout_ms", spec.timeout_ms, where);
  spec.attempts = get_count(j, "attempts", spec.attempts, where);
  spec.backoff_ms = get_ms(j, "backoff_ms", spec.backoff_ms, where);
  spec.seed = get_optional_count(j, "seed", where);
  spec.dim = get_count(j, "dim", spec.dim, where);

  const json& script = get_object(j, "script", where);
  const std::string script_where = where + ".script";
  reject_unknown_keys(script,
                      {"canned", "fail_if_prompt_contains",
                       "loop_if_prompt_contains", "loop_text"},
                      script_where);
  auto canned = script.find("canned");
  if (canned != script.end()) {
    if (!canned->is_array())
      throw ConfigError(script_where + ".canned must be an array of pairs");
    for (const auto& entry : *canned) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() ||
          !entry[1].is_string())
        throw ConfigError(script_where +
                          ".canned entries must be [substring, completion] pairs");
      spec.script.canned.emplace_back(entry[0].get<std::string>(),
                                      entry[1].get<std::string>());
    }
  }
  spec.script.fail_if_prompt_contains =
      get_string_list(script, "fail_if_prompt_contains", script_where);
  spec.script.loop_if_prompt_contains =
      get_string_list(script, "loop_if_prompt_contains", script_where);
  spec.script.loop_text =
      get_string(script, "loop_text", spec.script.loop_text, script_where);
  return spec;
}

json CheckerSpec::to_json() const {
  json rules_json = json::array();
  for (const auto& rule : rules)
    rules_json.push_back(json{{"pattern", rule.pattern},
                              {"ok", rule.ok},
                              {"diagnostics", rule.diagnostics}});
  return json{{"kind", kind},
              {"default_ok", default_ok},
              {"rules", std::move(rules_json)},
              {"command", string_list_json(command)},
              {"project_path", project_path},
              {"imports", string_list_json(imports)},
              {"template", template_path},
              {"source_name", source_name},
              {"timeout_ms", timeout_ms}};
}

CheckerSpec CheckerSpec::from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j,
                      {"kind", "default_ok", "rules", "command", "project_path",
                       "imports", "template", "source_name", "timeout_ms"},
                      where);
  CheckerSpec spec;
  spec.kind = get_string(j, "kind", spec.kind, where);
  spec.default_ok = get_bool(j, "default_ok", spec.default_ok, where);
  auto rules = j.find("rules");
  if (rules != j.end()) {
    if (!rules->is_array())
      throw ConfigError(where + ".rules must be an array");
    for (const auto& entry : *rules) {
      if (!entry.is_object())
        throw ConfigError(where + ".rules entries must be objects");
      reject_unknown_keys(entry, {"pattern", "ok", "diagnostics"}, where + ".rules");
      CheckRule rule;
      rule.pattern = get_string(entry, "pattern", "", where + ".rules");
      if (rule.pattern.empty())
        throw ConfigError(where + ".rules entries need a non-empty pattern");
      rule.ok = get_bool(entry, "ok", false, where + ".rules");
      rule.diagnostics = get_string(entry, "diagnostics", "", where + ".rules");
      spec.rules.push_back(std::move(rule));
    }
  }
  spec.command = get_string_list(j, "command", where);
  spec.project_path = get_string(j, "project_path", "", where);
  spec.imports = get_string_list(j, "imports", where);
  spec.template_path = get_string(j, "template", "", where);
  spec.source_name = get_string(j, "source_name", "", where);
  spec.timeout_ms = get_ms(j, "timeout_ms", spec.timeout_ms, where);
  return spec;
}

json BacktranslationSpec::to_json() const {
  json j{{"separator", separator},
         {"exclude_flagged", exclude_flagged},
         {"min_repeats", min_repeats},
         {"ngram_len", ngram_len}};
  if (max_examples) j["max_examples"] = *max_examples;
  return j;
}

BacktranslationSpec BacktranslationSpec::from_json(const json& j,
                                                   const std::string& where) {
  reject_unknown_keys(
      j, {"separator", "exclude_flagged", "min_repeats", "ngram_len", "max_examples"},
      where);
  BacktranslationSpec spec;
  spec.separator = get_string(j, "separator", spec.separator, where);
  spec.exclude_flagged = get_bool(j, "exclude_flagged", spec.exclude_flagged, where);
  spec.min_repeats = get_count(j, "min_repeats", spec.min_repeats, where);
  spec.ngram_len = get_count(j, "ngram_len", spec.ngram_len, where);
  spec.max_examples = get_optional_count(j, "max_examples", where);
  return spec;
}

json RunConfig::to_json() const {
  json params{{"method", std::string(method_name(method))},
              {"k", k},
              {"shots", shots},
              {"max_examples", max_examples},
              {"temperature", temperature},
              {"max_tokens", max_tokens},
              {"parallelism", parallelism},
              {"seed", seed},
              {"batch", batch}};
  if (budget) params["budget"] = *budget;
  return json{{"paths", json{{"benchmark", benchmark_path},
                             {"kb", kb_path},
                             {"index", index_path},
                             {"templates", templates_dir},
                             {"out", out_dir}}},
              {"params", std::move(params)},
              {"providers", json{{"embedding", embedding.to_json()},
                                 {"completion", completion.to_json()},
                                 {"teacher", teacher.to_json()}}},
              {"checkers", json{{"typecheck", typecheck_checker.to_json()},
                                {"latex", latex_checker.to_json()}}},
              {"backtranslation", backtranslation.to_json()}};
}

RunConfig RunConfig::from_json(const json& j, const std::string& where) {
  if (!j.is_object())
    throw ConfigError(where + ": config root must be an object");
  reject_unknown_keys(j, {"paths", "params", "providers", "checkers",
                          "backtranslation"},
                      where);
  RunConfig config;

  const json& paths = get_object(j, "paths", where);
  const std::string paths_where = where + ".paths";
  reject_unknown_keys(paths, {"benchmark", "kb", "index", "templates", "out"},
                      paths_where);
  config.benchmark_path = get_string(paths, "benchmark", "", paths_where);
  config.kb_path = get_string(paths, "kb", "", paths_where);
  config.index_path = get_string(paths, "index", "", paths_where);
  config.templates_dir = get_string(paths, "templates", "", paths_where);
  config.out_dir = get_string(paths, "out", "", paths_where);

  const json& params = get_object(j, "params", where);
  const std::string params_where = where + ".params";
  reject_unknown_keys(params,
                      {"method", "k", "shots", "max_examples", "budget",
                       "temperature", "max_tokens", "parallelism", "seed", "batch"},
                      params_where);
  std::string method = get_string(params, "method",
                                  std::string(method_name(config.method)),
                                  params_where);
  try {
    config.method = method_from_name(method);
  } catch (const ConfigError&) {
    throw ConfigError(params_where + ".method: unknown method '" + method + "'");
  }
  config.k = get_count(params, "k", config.k, params_where);
  config.shots = get_count(params, "shots", config.shots, params_where);
  config.max_examples =
      get_count(params, "max_examples", config.max_examples, params_where);
  config.budget = get_optional_count(params, "budget", params_where);
  config.temperature =
      get_number(params, "temperature", config.temperature, params_where);
  config.max_tokens = get_count(params, "max_tokens", config.max_tokens, params_where);
  config.parallelism =
      get_count(params, "parallelism", config.parallelism, params_where);
  config.seed = get_count(params, "seed", config.seed, params_where);
  config.batch = get_count(params, "batch", config.batch, params_where);

  const json& providers = get_object(j, "providers", where);
  const std::string providers_where = where + ".providers";
  reject_unknown_keys(providers, {"embedding", "completion", "teacher"},
                      providers_where);
  if (providers.contains("embedding"))
    config.embedding = ProviderSpec::from_json(providers["embedding"],
                                               providers_where + ".embedding");
  if (providers.contains("completion"))
    config.completion = ProviderSpec::from_json(providers["completion"],
                                                providers_where + ".completion");
  if (providers.contains("teacher"))
    config.teacher =
        ProviderSpec::from_json(providers["teacher"], providers_where + ".teacher");

  const json& checkers = get_object(j, "checkers", where);
  const std::string checkers_where = where + ".checkers";
  reject_unknown_keys(checkers, {"typecheck", "latex"}, checkers_where);
  if (checkers.contains("typecheck"))
    config.typecheck_checker =
        CheckerSpec::from_json(checkers["typecheck"], checkers_where + ".typecheck");
  if (checkers.contains("latex"))
    config.latex_checker =
        CheckerSpec::from_json(checkers["latex"], checkers_where + ".latex");

  if (j.contains("backtranslation"))
    config.backtranslation = BacktranslationSpec::from_json(
        j["backtranslation"], where + ".backtranslation");
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j, path.string());
}

namespace {

void validate_provider(const ProviderSpec& spec, const std::string& label,
                       bool is_embedding, std::vector<std::string>& errors) {
  if (spec.kind != "mock" && spec.kind != "http") {
    errors.push_back(label + ".kind: unknown provider kind '" + spec.kind + "'");
    return;
  }
  if (spec.kind == "http") {
    if (spec.endpoint.empty()) errors.push_back(label + ".endpoint is required");
    if (spec.model.empty()) errors.push_back(label + ".model is required");
    if (!spec.key_env.empty() && std::getenv(spec.key_env.c_str()) == nullptr)
      errors.push_back(label + ".key_env: environment variable '" + spec.key_env +
                       "' is not set");
  }
  if (spec.kind == "mock" && is_embedding && spec.dim == 0)
    errors.push_back(label + ".dim must be >= 1");
  if (spec.attempts == 0) errors.push_back(label + ".attempts must be >= 1");
  if (spec.timeout_ms <= 0) errors.push_back(label + ".timeout_ms must be > 0");
}

void validate_checker(const CheckerSpec& spec, const std::string& label,
                      std::vector<std::string>& errors) {
  static const std::set<std::string> kinds{"mock-ruleset", "mock-latex-strict-ascii",
                                          "typecheck-command", "latex-command"};
  if (!kinds.count(spec.kind)) {
    errors.push_back(label + ".kind: unknown checker kind '" + spec.kind + "'");
    return;
  }
  if (spec.kind == "mock-ruleset") {
    for (const auto& rule : spec.rules) {
      try {
        std::regex re(rule.pattern, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        errors.push_back(label + ".rules: invalid pattern '" + rule.pattern +
                         "': " + e.what());
      }
    }
  }
  if ((spec.kind == "typecheck-command" || spec.kind == "latex-command") &&
      spec.command.empty())
    errors.push_back(label + ".command is required for kind '" + spec.kind + "'");
  if (!spec.template_path.empty() &&
      !std::filesystem::exists(spec.template_path))
    errors.push_back(label + ".template does not exist: " + spec.template_path);
  if (spec.timeout_ms <= 0) errors.push_back(label + ".timeout_ms must be > 0");
}

}  // namespace

std::vector<std::string> validate_run_config(const RunConfig& config,
                                             const ConfigNeeds& needs) {
  std::vector<std::string> errors;

  auto check_path = [&](const std::string& value, const char* label, bool needed) {
    if (value.empty()) {
      if (needed)
        errors.push_back(std::string("paths.") + label + " is required");
      return;
    }
    if (!std::filesystem::exists(value))
      errors.push_back(std::string("paths.") + label +
                       " does not exist: " + value);
  };
  check_path(config.benchmark_path, "benchmark", needs.benchmark);
  check_path(config.kb_path, "kb", needs.kb);
  check_path(config.index_path, "index", needs.index);
  check_path(config.templates_dir, "templates", false);
  if (needs.out && config.out_dir.empty())
    errors.push_back("paths.out is required");

  if (config.k == 0) errors.push_back("params.k must be >= 1");
  if (config.parallelism == 0) errors.push_back("params.parallelism must be >= 1");
  if (config.max_examples == 0) errors.push_back("params.max_examples must be >= 1");
  if (config.max_tokens == 0) errors.push_back("params.max_tokens must be >= 1");
  if (config.batch == 0) errors.push_back("params.batch must be >= 1");
  if (config.temperature < 0.0)
    errors.push_back("params.temperature must be >= 0");

  if (needs.embedding_provider)
    validate_provider(config.embedding, "providers.embedding", true, errors);
  if (needs.completion_provider)
    validate_provider(config.completion, "providers.completion", false, errors);
  if (needs.teacher_provider)
    validate_provider(config.teacher, "providers.teacher", false, errors);
  if (needs.typecheck_checker)
    validate_checker(config.typecheck_checker, "checkers.typecheck", errors);
  if (needs.latex_checker)
    validate_checker(config.latex_checker, "checkers.latex", errors);

  if (config.backtranslation.separator.empty())
    errors.push_back("backtranslation.separator must be non-empty");
  if (config.backtranslation.min_repeats < 3)
    errors.push_back("backtranslation.min_repeats must be >= 3");
  if (config.backtranslation.ngram_len == 0)
    errors.push_back("backtranslation.ngram_len must be >= 1");
  return errors;
}

namespace {

HttpProviderOptions http_options(const ProviderSpec& spec, const char* label) {
  HttpProviderOptions options;
  options.endpoint = spec.endpoint;
  options.model = spec.model;
  options.timeout_ms = spec.timeout_ms;
  options.attempts = spec.attempts;
  options.backoff_ms = spec.backoff_ms;
  if (!spec.key_env.empty()) {
    const char* key = std::getenv(spec.key_env.c_str());
    if (key == nullptr)
      throw ConfigError(std::string(label) + ": environment variable '" +
                        spec.key_env + "' is not set");
    options.api_key = key;
  }
  return options;
}

}  // namespace

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const ProviderSpec& spec,
                                                           uint64_t run_seed) {
  if (spec.kind == "mock")
    return std::make_unique<MockEmbeddingProvider>(spec.dim,
                                                   spec.seed.value_or(run_seed));
  if (spec.kind == "http")
    return std::make_unique<HttpEmbeddingProvider>(
        http_options(spec, "embedding provider"));
  throw ConfigError("unknown embedding provider kind '" + spec.kind + "'");
}

std::unique_ptr<CompletionProvider> make_completion_provider(const ProviderSpec& spec,
                                                             uint64_t run_seed) {
  if (spec.kind == "mock")
    return std::make_unique<MockCompletionProvider>(spec.seed.value_or(run_seed),
                                                    spec.script);
  if (spec.kind == "http")
    return std::make_unique<HttpCompletionProvider>(
        http_options(spec, "completion provider"));
  throw ConfigError("unknown completion provider kind '" + spec.kind + "'");
}

std::unique_ptr<Checker> make_checker(const CheckerSpec& spec) {
  if (spec.kind == "mock-ruleset")
    return std::make_unique<RulesetMockChecker>(spec.rules, spec.default_ok);
  if (spec.kind == "mock-latex-strict-ascii")
    return std::make_unique<StrictAsciiLatexChecker>();
  if (spec.kind == "typecheck-command") {
    TypecheckConfig config;
    config.command = spec.command;
    config.project_path = spec.project_path;
    config.imports = spec.imports;
    if (!spec.template_path.empty())
      config.template_text = read_file(spec.template_path);
    if (!spec.source_name.empty()) config.source_name = spec.source_name;
    config.timeout = std::chrono::milliseconds(spec.timeout_ms);
    return make_typecheck_checker(config);
  }
  if (spec.kind == "latex-command") {
    LatexConfig config;
    config.command = spec.command;
    if (!spec.template_path.empty())
      config.template_text = read_file(spec.template_path);
    if (!spec.source_name.empty()) config.source_name = spec.source_name;
    config.timeout = std::chrono::milliseconds(spec.timeout_ms);
    return make_latex_checker(config);
  }
  throw ConfigError("unknown checker kind '" + spec.kind + "'");
}

}  // namespace autoform
