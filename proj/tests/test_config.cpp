#include <doctest.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "autoform/config.hpp"
#include "testutil.hpp"

using namespace autoform;
using namespace testutil;

namespace {

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  for (const auto& e : errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("default config carries the documented parameter values") {
  RunConfig config;
  CHECK(config.method == Method::fewshot);
  CHECK(config.k == 4);
  CHECK(config.shots == 3);
  CHECK(config.max_examples == 12);
  CHECK(!config.budget.has_value());
  CHECK(config.temperature == 0.0);
  CHECK(config.parallelism == 1);
  CHECK(config.batch == 64);
  CHECK(config.embedding.kind == "mock");
  CHECK(config.completion.kind == "mock");
  CHECK(config.typecheck_checker.kind == "mock-ruleset");
  CHECK(config.latex_checker.kind == "mock-latex-strict-ascii");
  CHECK(config.backtranslation.separator == "\n###\n");
  CHECK(config.backtranslation.exclude_flagged);
  CHECK(validate_run_config(config, {}).empty());
}

TEST_CASE("config files override defaults and round-trip through json") {
  TempDir tmp;
  write_text(tmp.file("config.json"), R"({
    "paths": {"benchmark": "", "out": "runs"},
    "params": {"k": 8, "temperature": 0.5, "parallelism": 4},
    "providers": {
      "completion": {"kind": "http", "endpoint": "http://127.0.0.1:9", "model": "m",
                     "key_env": "AUTOFORM_TEST_KEY", "attempts": 3},
      "embedding": {"kind": "mock", "dim": 32, "seed": 11}
    },
    "checkers": {
      "typecheck": {"kind": "mock-ruleset", "default_ok": false,
                    "rules": [{"pattern": "theorem", "ok": true, "diagnostics": "ok"}]}
    },
    "backtranslation": {"separator": "\n=>\n", "exclude_flagged": false}
  })");
  auto config = load_run_config(tmp.file("config.json"));
  CHECK(config.k == 8);
  CHECK(config.shots == 3);
  CHECK(config.temperature == 0.5);
  CHECK(config.parallelism == 4);
  CHECK(config.out_dir == "runs");
  CHECK(config.completion.kind == "http");
  CHECK(config.completion.key_env == "AUTOFORM_TEST_KEY");
  CHECK(config.completion.attempts == 3);
  CHECK(config.embedding.dim == 32);
  CHECK(config.embedding.seed == uint64_t{11});
  CHECK(!config.typecheck_checker.default_ok);
  REQUIRE(config.typecheck_checker.rules.size() == 1);
  CHECK(config.typecheck_checker.rules[0].pattern == "theorem");
  CHECK(config.backtranslation.separator == "\n=>\n");
  CHECK(!config.backtranslation.exclude_flagged);

  auto again = RunConfig::from_json(config.to_json(), "snapshot");
  CHECK(again.to_json().dump() == config.to_json().dump());
}

TEST_CASE("absent params keep the paper defaults") {
  TempDir tmp;
  write_text(tmp.file("config.json"), R"({"params": {"shots": 5}})");
  auto config = load_run_config(tmp.file("config.json"));
  CHECK(config.k == 4);
  CHECK(config.shots == 5);
}

TEST_CASE("unknown config keys are rejected with their location") {
  TempDir tmp;
  write_text(tmp.file("a.json"), R"({"pathz": {}})");
  CHECK_THROWS_WITH_AS(load_run_config(tmp.file("a.json")),
                       doctest::Contains("pathz"), ConfigError);

  write_text(tmp.file("b.json"), R"({"params": {"kk": 4}})");
  CHECK_THROWS_WITH_AS(load_run_config(tmp.file("b.json")),
                       doctest::Contains("params: unknown key 'kk'"), ConfigError);

  write_text(tmp.file("c.json"), R"({"providers": {"completion": {"modell": "x"}}})");
  CHECK_THROWS_WITH_AS(load_run_config(tmp.file("c.json")),
                       doctest::Contains("modell"), ConfigError);

  write_text(tmp.file("d.json"), "{not json");
  CHECK_THROWS_AS(load_run_config(tmp.file("d.json")), ParseError);
}

TEST_CASE("literal keys in config files are refused") {
  for (const char* field : {"key", "api_key", "token", "secret"}) {
    json block{{"kind", "http"}, {field, "sk-oops"}};
    CHECK_THROWS_WITH_AS(ProviderSpec::from_json(block, "providers.completion"),
                         doctest::Contains("key_env"), ConfigError);
  }
}

TEST_CASE("provider snapshots never contain key material") {
  ::setenv("AUTOFORM_TEST_SECRET", "sk-live-abcdef", 1);
  ProviderSpec spec;
  spec.kind = "http";
  spec.endpoint = "http://127.0.0.1:9";
  spec.model = "m";
  spec.key_env = "AUTOFORM_TEST_SECRET";
  auto dump = spec.to_json().dump();
  CHECK(dump.find("AUTOFORM_TEST_SECRET") != std::string::npos);
  CHECK(dump.find("sk-live-abcdef") == std::string::npos);
  ::unsetenv("AUTOFORM_TEST_SECRET");
}

TEST_CASE("validation reports every problem at once") {
  RunConfig config;
  config.k = 0;
  config.parallelism = 0;
  config.temperature = -1.0;
  ConfigNeeds needs;
  needs.benchmark = true;
  needs.out = true;
  auto errors = validate_run_config(config, needs);
  CHECK(errors.size() >= 5);
  CHECK(mentions(errors, "paths.benchmark is required"));
  CHECK(mentions(errors, "paths.out is required"));
  CHECK(mentions(errors, "params.k"));
  CHECK(mentions(errors, "params.parallelism"));
  CHECK(mentions(errors, "params.temperature"));
}

TEST_CASE("validation names missing files") {
  TempDir tmp;
  RunConfig config;
  config.benchmark_path = (tmp.path / "nope.jsonl").string();
  ConfigNeeds needs;
  needs.benchmark = true;
  auto errors = validate_run_config(config, needs);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("paths.benchmark does not exist") != std::string::npos);
  CHECK(errors[0].find("nope.jsonl") != std::string::npos);

  write_text(tmp.file("nope.jsonl"), "");
  CHECK(validate_run_config(config, needs).empty());
}

TEST_CASE("only the blocks a command needs are validated") {
  RunConfig config;
  config.teacher.kind = "http";  // invalid as-is: no endpoint, no model
  CHECK(validate_run_config(config, {}).empty());

  ConfigNeeds needs;
  needs.teacher_provider = true;
  auto errors = validate_run_config(config, needs);
  CHECK(mentions(errors, "providers.teacher.endpoint"));
  CHECK(mentions(errors, "providers.teacher.model"));
}

TEST_CASE("http provider validation requires the named key variable") {
  ::unsetenv("AUTOFORM_MISSING_KEY");
  RunConfig config;
  config.completion.kind = "http";
  config.completion.endpoint = "http://127.0.0.1:9";
  config.completion.model = "m";
  config.completion.key_env = "AUTOFORM_MISSING_KEY";
  ConfigNeeds needs;
  needs.completion_provider = true;
  auto errors = validate_run_config(config, needs);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("AUTOFORM_MISSING_KEY") != std::string::npos);

  ::setenv("AUTOFORM_MISSING_KEY", "sk-test", 1);
  CHECK(validate_run_config(config, needs).empty());
  ::unsetenv("AUTOFORM_MISSING_KEY");
}

TEST_CASE("checker validation catches bad kinds and patterns") {
  RunConfig config;
  config.typecheck_checker.kind = "lean-magic";
  config.latex_checker.kind = "latex-command";
  ConfigNeeds needs;
  needs.typecheck_checker = true;
  needs.latex_checker = true;
  auto errors = validate_run_config(config, needs);
  CHECK(mentions(errors, "lean-magic"));
  CHECK(mentions(errors, "checkers.latex.command is required"));

  config.typecheck_checker.kind = "mock-ruleset";
  config.typecheck_checker.rules = {{"(unclosed", true, ""}};
  config.latex_checker.command = {"true"};
  errors = validate_run_config(config, needs);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("(unclosed") != std::string::npos);
}

TEST_CASE("mock factories use the run seed unless the block pins one") {
  ProviderSpec spec;
  spec.dim = 24;
  auto from_run = make_embedding_provider(spec, 7);
  CHECK(from_run->id() == "mock-embed/dim=24,seed=7");
  CHECK(from_run->deterministic());

  spec.seed = 3;
  auto pinned = make_embedding_provider(spec, 7);
  CHECK(pinned->id() == "mock-embed/dim=24,seed=3");

  ProviderSpec completion;
  auto provider = make_completion_provider(completion, 42);
  CHECK(provider->id() == "mock-complete/seed=42");
}

TEST_CASE("http factories read the key from the environment") {
  ::setenv("AUTOFORM_FACTORY_KEY", "sk-test", 1);
  ProviderSpec spec;
  spec.kind = "http";
  spec.endpoint = "http://127.0.0.1:9";
  spec.model = "m";
  spec.key_env = "AUTOFORM_FACTORY_KEY";
  auto provider = make_completion_provider(spec, 0);
  CHECK(provider->id() == "http-complete/m@http://127.0.0.1:9");
  CHECK(!provider->deterministic());

  ::unsetenv("AUTOFORM_FACTORY_KEY");
  CHECK_THROWS_WITH_AS(make_completion_provider(spec, 0),
                       doctest::Contains("AUTOFORM_FACTORY_KEY"), ConfigError);

  ProviderSpec unknown;
  unknown.kind = "carrier-pigeon";
  CHECK_THROWS_AS(make_embedding_provider(unknown, 0), ConfigError);
}

TEST_CASE("checker factory builds each kind and applies template files") {
  CheckerSpec ruleset;
  ruleset.rules = {{"theorem", true, ""}};
  ruleset.default_ok = false;
  auto mock = make_checker(ruleset);
  CHECK(mock->id() == "mock-ruleset");
  CHECK(mock->check("theorem t : p").ok);
  CHECK(!mock->check("definition d").ok);

  CheckerSpec latex;
  latex.kind = "mock-latex-strict-ascii";
  CHECK(make_checker(latex)->id() == "mock-latex-strict-ascii");

  TempDir tmp;
  write_text(tmp.file("wrap.txt"), "<<{body}>>");
  CheckerSpec command;
  command.kind = "latex-command";
  command.command = {"cat", "{file}"};
  command.template_path = tmp.file("wrap.txt").string();
  auto checker = make_checker(command);
  CHECK(checker->id() == "latex-command");
  auto outcome = checker->check("BODY TEXT");
  CHECK(outcome.ok);
  CHECK(outcome.diagnostics.find("<<BODY TEXT>>") != std::string::npos);

  CheckerSpec typecheck;
  typecheck.kind = "typecheck-command";
  typecheck.command = {"cat", "{file}"};
  typecheck.imports = {"import group_theory"};
  auto tc = make_checker(typecheck);
  CHECK(tc->id() == "typecheck-command");
  auto tc_outcome = tc->check("theorem t : 1 = 1");
  CHECK(tc_outcome.ok);
  CHECK(tc_outcome.diagnostics.find("import group_theory") != std::string::npos);
  CHECK(tc_outcome.diagnostics.find(":= sorry") != std::string::npos);

  CheckerSpec bad;
  bad.kind = "abacus";
  CHECK_THROWS_AS(make_checker(bad), ConfigError);
}
