#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <regex>
#include <string>
#include <vector>

#include "autoform/common.hpp"

namespace autoform {

struct CheckOutcome {
  bool ok = false;
  std::string diagnostics;
  int64_t duration_ms = 0;
  bool timed_out = false;  // implies !ok
};

// Verdicts must be a pure function of the statement text; same text under the
// same configuration gives the same ok flag. Environment failures throw
// InfrastructureError rather than returning a negative verdict.
class Checker {
 public:
  virtual ~Checker() = default;
  virtual CheckOutcome check(const std::string& statement_text) = 0;
  virtual std::string id() const = 0;
};

// First matching rule decides; no match falls through to the default verdict.
struct CheckRule {
  std::string pattern;  // ECMAScript regex, searched anywhere in the text
  bool ok = false;
  std::string diagnostics;
};

class RulesetMockChecker : public Checker {
 public:
  explicit RulesetMockChecker(std::vector<CheckRule> rules, bool default_ok = true);
  CheckOutcome check(const std::string& statement_text) override;
  std::string id() const override { return "mock-ruleset"; }

 private:
  struct CompiledRule {
    std::regex re;
    CheckRule rule;
  };
  std::vector<CompiledRule> rules_;
  bool default_ok_;
};

// Offline stand-in for a LaTeX compiler: rejects any non-ASCII byte and any
// unbalanced unescaped '$', accepts everything else.
class StrictAsciiLatexChecker : public Checker {
 public:
  CheckOutcome check(const std::string& statement_text) override;
  std::string id() const override { return "mock-latex-strict-ascii"; }
};

struct ProcessResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved, capped
  bool timed_out = false;
};

// Runs argv in workdir with stdin from /dev/null, killing the whole process
// group at the deadline. A command that cannot be started at all throws
// InfrastructureError; a nonzero exit is a result, not an error.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& workdir,
                          std::chrono::milliseconds timeout);

// Wraps one statement into a source file inside a fresh scratch workspace,
// runs the command there and reports ok iff it exits 0 in time. {file} and
// {project} in command elements expand to the source path and project_path.
// The workspace is removed after the check, success or failure.
class CommandChecker : public Checker {
 public:
  struct Config {
    std::vector<std::string> command;
    std::filesystem::path project_path;
    std::string source_name = "candidate.txt";
    std::function<std::string(const std::string&)> render;  // null = verbatim
    std::chrono::milliseconds timeout{60000};
    std::filesystem::path workspace_root;  // empty = system temp dir
    std::string checker_id = "command";
  };

  explicit CommandChecker(Config config);
  CheckOutcome check(const std::string& statement_text) override;
  std::string id() const override { return config_.checker_id; }

 private:
  Config config_;
};

// Import preamble plus the statement, with a placeholder proof appended when
// the statement has no top-level proof body.
std::string render_typecheck_source(const std::string& statement,
                                    const std::vector<std::string>& imports,
                                    const std::string& template_text = {});

struct TypecheckConfig {
  std::vector<std::string> command;  // {file}, {project} placeholders
  std::filesystem::path project_path;
  std::vector<std::string> imports;
  std::string template_text;  // {imports}, {statement}; empty = default
  std::string source_name = "candidate.lean";
  std::chrono::milliseconds timeout{60000};
  std::filesystem::path workspace_root;
};

std::unique_ptr<Checker> make_typecheck_checker(const TypecheckConfig& config);

// Body dropped into a fixed document template, raw bytes preserved.
std::string render_latex_source(const std::string& body,
                                const std::string& template_text = {});

struct LatexConfig {
  std::vector<std::string> command;
  std::string template_text;  // {body}; empty = default
  std::string source_name = "candidate.tex";
  std::chrono::milliseconds timeout{60000};
  std::filesystem::path workspace_root;
};

std::unique_ptr<Checker> make_latex_checker(const LatexConfig& config);

// Thrown when a batch hits an infrastructure failure: outcomes computed so
// far ride along, flagged per index.
class BatchError : public InfrastructureError {
 public:
  BatchError(const std::string& message, std::vector<CheckOutcome> partial,
             std::vector<char> completed)
      : InfrastructureError(message),
        partial_(std::move(partial)),
        completed_(std::move(completed)) {}

  const std::vector<CheckOutcome>& partial() const { return partial_; }
  const std::vector<char>& completed() const { return completed_; }

 private:
  std::vector<CheckOutcome> partial_;
  std::vector<char> completed_;
};

// Outcomes in input order; per-statement failures stay isolated, the first
// infrastructure failure stops new work and surfaces as BatchError.
std::vector<CheckOutcome> check_batch(const std::vector<std::string>& statements,
                                      Checker& checker, size_t parallelism);

}  // namespace autoform
