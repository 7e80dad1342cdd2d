#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "autoform/config.hpp"
#include "autoform/corpus.hpp"
#include "autoform/embedding.hpp"
#include "autoform/engine.hpp"
#include "autoform/ioutil.hpp"
#include "autoform/metrics.hpp"
#include "doctest.h"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace autoform;
using namespace testutil;

namespace {

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string(AUTOFORM_BIN) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = ::pclose(pipe);
  CliResult r;
  r.output = std::move(out);
  if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\" "; }

size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  size_t count = 0;
  for (size_t at = haystack.find(needle); at != std::string::npos;
       at = haystack.find(needle, at + needle.size()))
    ++count;
  return count;
}

// Problem i carries the unique marker "qNNz" so a script needle can target
// exactly one prompt.
void write_benchmark(const fs::path& path, size_t n) {
  std::vector<json> lines;
  for (size_t i = 0; i < n; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "p%02zu", i);
    std::string marker = "q" + std::string(id + 1) + "z";
    lines.push_back(json{{"id", id},
                         {"source", "fixture"},
                         {"nl_statement", "Statement " + marker + " describes a group."},
                         {"formal_statement", "theorem thm_" + marker + " : a = a"}});
  }
  write_jsonl_atomic(path, lines);
}

void write_kb(const fs::path& path, size_t n) {
  std::vector<json> lines;
  for (size_t i = 0; i < n; ++i)
    lines.push_back(json{{"name", "kb_stmt_" + std::to_string(i)},
                         {"statement_text", "theorem kb_stmt_" + std::to_string(i) +
                                                " : x " + std::to_string(i) + " = x"},
                         {"origin", "fixture"}});
  write_jsonl_atomic(path, lines);
}

void write_examples(const fs::path& path) {
  write_jsonl_atomic(
      path,
      {json{{"nl", "Multiplication by one changes nothing."},
            {"formal", "theorem mul_one : a * 1 = a"}},
       json{{"nl", "The inverse of the inverse is the element."},
            {"formal", "theorem inv_inv : a\xE2\x81\xBB\xC2\xB9\xE2\x81\xBB\xC2\xB9 = a"}},
       json{{"nl", "Products associate."},
            {"formal", "theorem mul_assoc : a * b * c = a * (b * c)"}},
       json{{"nl", "One is a left identity."},
            {"formal", "theorem one_mul : 1 * a = a"}}});
}

// Embedding seed is pinned in the block so the index and later queries agree
// whatever the run seed is.
json base_config() {
  return json{{"providers", json{{"embedding", json{{"dim", 16}, {"seed", 7}}},
                                 {"completion", json{{"seed", 11}}}}}};
}

struct Workspace {
  TempDir tmp;
  fs::path benchmark = tmp.file("benchmark.jsonl");
  fs::path kb = tmp.file("kb.jsonl");
  fs::path examples = tmp.file("examples.jsonl");
  fs::path config = tmp.file("config.json");

  explicit Workspace(size_t problems = 3, json config_json = base_config()) {
    write_benchmark(benchmark, problems);
    write_kb(kb, 8);
    write_examples(examples);
    write_text(config, config_json.dump(2));
  }

  std::string common() const { return "--config " + q(config); }
};

}  // namespace

TEST_CASE("cli rejects missing subcommands and unknown flags") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);

  auto bogus = run_cli("formalize --bogus 1");
  CHECK(bogus.code == 2);
  CHECK(bogus.output.find("--bogus") != std::string::npos);

  auto help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.output.find("formalize") != std::string::npos);
}

TEST_CASE("cli validation lists every problem at once") {
  auto r = run_cli("formalize");
  CHECK(r.code == 2);
  CHECK(count_occurrences(r.output, "autoform: config:") >= 3);
  CHECK(r.output.find("benchmark") != std::string::npos);
  CHECK(r.output.find("out") != std::string::npos);
  CHECK(r.output.find("--examples") != std::string::npos);
}

TEST_CASE("cli ingest canonicalizes and reruns byte-identically") {
  Workspace ws(3);
  fs::path out = ws.tmp.file("ingest_out");
  std::string cmd = "ingest --benchmark " + q(ws.benchmark) + "--kb " + q(ws.kb) +
                    "--out " + q(out);
  auto first = run_cli(cmd);
  CHECK(first.code == 0);

  CHECK(load_benchmark(out / "benchmark.jsonl") == load_benchmark(ws.benchmark));
  CHECK(load_knowledge_base(out / "kb.jsonl") == load_knowledge_base(ws.kb));

  json manifest = json::parse(read_text(out / "manifest.json"));
  CHECK(manifest["command"] == "ingest");
  CHECK(manifest["timings"]["started"] == kFixedTimestamp);
  CHECK(manifest["counts"]["problems"] == 3);
  CHECK(manifest["counts"]["statements"] == 8);
  CHECK(manifest["inputs"]["benchmark"]["digest"].get<std::string>().size() == 16);

  std::string manifest_bytes = read_text(out / "manifest.json");
  std::string benchmark_bytes = read_text(out / "benchmark.jsonl");
  CHECK(run_cli(cmd).code == 0);
  CHECK(read_text(out / "manifest.json") == manifest_bytes);
  CHECK(read_text(out / "benchmark.jsonl") == benchmark_bytes);
}

TEST_CASE("cli ingest extracts declarations from library sources") {
  TempDir tmp;
  fs::path lib = tmp.file("lib");
  fs::create_directories(lib / "algebra");
  write_text(lib / "algebra" / "basic.lean",
             "theorem foo : 1 = 1 := trivial\n\n"
             "lemma bar (x : nat) : x = x := rfl\n\n"
             "example : 2 = 2 := rfl\n");
  write_text(lib / "notes.txt", "not a source file\n");
  fs::path out = tmp.file("out");

  auto r = run_cli("ingest --extract " + q(lib) + "--out " + q(out));
  CHECK(r.code == 0);

  auto statements = load_knowledge_base(out / "kb.jsonl");
  REQUIRE(statements.size() == 2);
  CHECK(statements[0].name == "foo");
  CHECK(statements[1].name == "bar");
  CHECK(statements[0].origin == "algebra/basic.lean");
  CHECK(statements[0].statement_text == "theorem foo : 1 = 1");
}

TEST_CASE("cli index fails clean on an unreachable endpoint") {
  Workspace ws;
  json bad = base_config();
  bad["providers"]["embedding"] =
      json{{"kind", "http"}, {"endpoint", "http://127.0.0.1:9"}, {"model", "embed-1"},
           {"attempts", 1}, {"timeout_ms", 200}, {"backoff_ms", 1}};
  write_text(ws.config, bad.dump());
  fs::path out_dir = ws.tmp.file("idx");
  fs::create_directories(out_dir);
  fs::path index_file = out_dir / "kb.index";

  auto r = run_cli("index " + ws.common() + "--kb " + q(ws.kb) + "--out " + q(index_file));
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(index_file));
  CHECK(fs::is_empty(out_dir));  // no temp files left behind either

  write_text(ws.config, base_config().dump());
  auto ok = run_cli("index " + ws.common() + "--kb " + q(ws.kb) + "--out " + q(index_file));
  CHECK(ok.code == 0);
  EmbeddingIndex index = EmbeddingIndex::load(index_file);
  CHECK(index.size() == 8);
  CHECK(index.dim() == 16);

  json manifest = json::parse(read_text(index_file.string() + ".manifest.json"));
  CHECK(manifest["command"] == "index");
  CHECK(manifest["provider"].get<std::string>().find("mock-embed") == 0);
  CHECK(manifest["rows"] == 8);
}

TEST_CASE("cli flags override config file values") {
  json cfg = base_config();
  cfg["params"] = json{{"k", 2}};
  Workspace ws(3, cfg);
  fs::path index_file = ws.tmp.file("kb.index");
  REQUIRE(run_cli("index " + ws.common() + "--kb " + q(ws.kb) + "--out " + q(index_file))
              .code == 0);

  std::string base = "formalize " + ws.common() + "--benchmark " + q(ws.benchmark) +
                     "--examples " + q(ws.examples) + "--method retrieval --index " +
                     q(index_file) + "--kb " + q(ws.kb);
  fs::path out_a = ws.tmp.file("run_a");
  REQUIRE(run_cli(base + "--out " + q(out_a)).code == 0);
  auto records_a = load_records(out_a / "records.jsonl");
  REQUIRE(records_a.size() == 3);
  REQUIRE(records_a[0].retrieved_ids.has_value());
  CHECK(records_a[0].retrieved_ids->size() == 2);  // config file k

  fs::path out_b = ws.tmp.file("run_b");
  REQUIRE(run_cli(base + "--k 3 --out " + q(out_b)).code == 0);
  auto records_b = load_records(out_b / "records.jsonl");
  REQUIRE(records_b[0].retrieved_ids.has_value());
  CHECK(records_b[0].retrieved_ids->size() == 3);  // flag wins

  json manifest = json::parse(read_text(out_b / "manifest.json"));
  CHECK(manifest["config"]["params"]["k"] == 3);
}

TEST_CASE("cli formalize flags scripted provider failures and exits 1") {
  json cfg = base_config();
  cfg["providers"]["completion"]["script"] =
      json{{"fail_if_prompt_contains", json::array({"q17z"})}};
  Workspace ws(20, cfg);
  fs::path out = ws.tmp.file("run");

  auto r = run_cli("formalize " + ws.common() + "--benchmark " + q(ws.benchmark) +
                   "--examples " + q(ws.examples) + "--out " + q(out));
  CHECK(r.code == 1);

  auto records = load_records(out / "records.jsonl");
  REQUIRE(records.size() == 20);
  size_t failed = 0;
  for (const auto& rec : records)
    if (!rec.ok()) {
      ++failed;
      CHECK(rec.problem_id == "p17");
      CHECK(rec.error->find("completion:") == 0);
    }
  CHECK(failed == 1);

  // Failed generations stay in the denominator downstream; eval still exits 0.
  fs::path eval_out = ws.tmp.file("eval");
  auto ev = run_cli("eval " + ws.common() + "--records " + q(out / "records.jsonl") +
                    "--benchmark " + q(ws.benchmark) + "--out " + q(eval_out));
  CHECK(ev.code == 0);
  json report = json::parse(read_text(eval_out / "eval.json"));
  CHECK(report["rows"][0]["n"] == 20);
  CHECK(report["rows"][0]["typechecked"] == 19);
}

TEST_CASE("cli translate and eval are byte-identical across reruns and parallelism") {
  Workspace ws(20);
  fs::path index_file = ws.tmp.file("kb.index");
  REQUIRE(run_cli("index " + ws.common() + "--kb " + q(ws.kb) + "--out " + q(index_file))
              .code == 0);

  auto translate = [&](const fs::path& out, const std::string& extra) {
    return run_cli("formalize " + ws.common() + "--benchmark " + q(ws.benchmark) +
                   "--examples " + q(ws.examples) + "--method retrieval --index " +
                   q(index_file) + "--kb " + q(ws.kb) + "--out " + q(out) + extra);
  };
  auto eval = [&](const fs::path& records_dir, const fs::path& out,
                  const std::string& extra) {
    return run_cli("eval " + ws.common() + "--records " +
                   q(records_dir / "records.jsonl") + "--benchmark " + q(ws.benchmark) +
                   "--kb-prompts " + q(ws.examples) + "--out " + q(out) + extra);
  };

  fs::path run1 = ws.tmp.file("run1"), run2 = ws.tmp.file("run2"),
           run8 = ws.tmp.file("run8");
  REQUIRE(translate(run1, "").code == 0);
  REQUIRE(translate(run2, "").code == 0);
  REQUIRE(translate(run8, "--parallelism 8").code == 0);
  std::string records = read_text(run1 / "records.jsonl");
  CHECK(read_text(run2 / "records.jsonl") == records);
  CHECK(read_text(run8 / "records.jsonl") == records);

  fs::path eval1 = ws.tmp.file("eval1"), eval2 = ws.tmp.file("eval2"),
           eval8 = ws.tmp.file("eval8");
  REQUIRE(eval(run1, eval1, "").code == 0);
  REQUIRE(eval(run2, eval2, "").code == 0);
  REQUIRE(eval(run8, eval8, "--parallelism 8").code == 0);
  for (const char* name : {"eval.json", "report.txt", "outcomes.jsonl"}) {
    CAPTURE(name);
    std::string bytes = read_text(eval1 / name);
    CHECK(read_text(eval2 / name) == bytes);
    CHECK(read_text(eval8 / name) == bytes);
  }

  // Same invocation into the same directory: the manifest reproduces too.
  std::string manifest = read_text(run1 / "manifest.json");
  REQUIRE(translate(run1, "").code == 0);
  CHECK(read_text(run1 / "manifest.json") == manifest);
}

TEST_CASE("cli eval reports copies, judgments and overlap scores") {
  json cfg = base_config();
  // p00 reproduces its gold statement; p01 copies a prompt example verbatim.
  cfg["providers"]["completion"]["script"]["canned"] = json::array(
      {json::array({"q00z", "theorem thm_q00z : a = a"}),
       json::array({"q01z", "theorem mul_one : a * 1 = a"})});
  Workspace ws(3, cfg);
  fs::path run = ws.tmp.file("run");
  REQUIRE(run_cli("formalize " + ws.common() + "--benchmark " + q(ws.benchmark) +
                  "--examples " + q(ws.examples) + "--out " + q(run))
              .code == 0);

  fs::path judgments = ws.tmp.file("judgments.jsonl");
  write_jsonl_atomic(judgments, {json{{"problem_id", "p00"},
                                      {"method", "fewshot"},
                                      {"verdict", "correct"}}});

  fs::path out = ws.tmp.file("eval");
  auto r = run_cli("eval " + ws.common() + "--records " + q(run / "records.jsonl") +
                   "--benchmark " + q(ws.benchmark) + "--kb-prompts " + q(ws.examples) +
                   "--judgments " + q(judgments) + "--out " + q(out));
  CHECK(r.code == 0);
  CHECK(r.output.find("fewshot") != std::string::npos);

  json row = json::parse(read_text(out / "eval.json"))["rows"][0];
  CHECK(row["method"] == "fewshot");
  CHECK(row["n"] == 3);
  CHECK(row["copies_excluded"] == 1);
  CHECK(row["typechecked"] == 2);
  CHECK(row["correct"] == 1);
  CHECK(row["unjudged"] == 2);
  CHECK(row["bleu"].get<double>() > 0.0);

  size_t copies = 0;
  for_each_json_line(out / "outcomes.jsonl", [&](size_t, const json& line) {
    if (line["copy"].get<bool>()) {
      ++copies;
      CHECK(line["problem_id"] == "p01");
    }
  });
  CHECK(copies == 1);
}

TEST_CASE("cli report merges runs and rejects duplicate rows") {
  TempDir tmp;
  auto make_run = [&](const std::string& dir, const std::string& method) {
    fs::path d = tmp.file(dir);
    fs::create_directories(d);
    EvalRow row;
    row.method = method;
    row.n = 10;
    row.typecheck = 40.0;
    row.typechecked = 4;
    EvalReport report{{row}};
    write_text(d / "eval.json", report.to_json().dump(2) + "\n");
    return d;
  };
  fs::path a = make_run("a", "fewshot");
  fs::path b = make_run("b", "retrieval");

  fs::path out = tmp.file("combined");
  auto r = run_cli("report --runs " + q(a) + q(b) + "--out " + q(out));
  CHECK(r.code == 0);
  CHECK(r.output.find("fewshot") != std::string::npos);
  CHECK(r.output.find("retrieval") != std::string::npos);
  CHECK(json::parse(read_text(out / "report.json"))["rows"].size() == 2);
  CHECK(read_text(out / "report.txt") == r.output);

  auto dup = run_cli("report --runs " + q(a) + q(a));
  CHECK(dup.code == 2);
  CHECK(dup.output.find("duplicate") != std::string::npos);

  auto missing = run_cli("report --runs " + q(tmp.file("nope")));
  CHECK(missing.code == 2);
  CHECK(missing.output.find("eval.json") != std::string::npos);
}

TEST_CASE("cli manifests name the key variable, never the key") {
  ::setenv("AUTOFORM_CLI_KEY", "sk-cli-secret-123", 1);
  json cfg = base_config();
  cfg["providers"]["teacher"] =
      json{{"kind", "http"}, {"endpoint", "http://127.0.0.1:9"}, {"model", "t-1"},
           {"key_env", "AUTOFORM_CLI_KEY"}};
  Workspace ws(3, cfg);
  fs::path out = ws.tmp.file("run");

  REQUIRE(run_cli("formalize " + ws.common() + "--benchmark " + q(ws.benchmark) +
                  "--examples " + q(ws.examples) + "--out " + q(out))
              .code == 0);
  std::string manifest = read_text(out / "manifest.json");
  CHECK(manifest.find("AUTOFORM_CLI_KEY") != std::string::npos);
  CHECK(manifest.find("sk-cli-secret-123") == std::string::npos);
}
