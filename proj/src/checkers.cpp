#include "autoform/checkers.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>

#include "autoform/corpus.hpp"
#include "autoform/ioutil.hpp"

namespace autoform {

RulesetMockChecker::RulesetMockChecker(std::vector<CheckRule> rules, bool default_ok)
    : default_ok_(default_ok) {
  for (auto& rule : rules) {
    try {
      std::regex re(rule.pattern);
      rules_.push_back({std::move(re), std::move(rule)});
    } catch (const std::regex_error& e) {
      throw ConfigError("invalid checker rule pattern '" + rule.pattern +
                        "': " + e.what());
    }
  }
}

CheckOutcome RulesetMockChecker::check(const std::string& statement_text) {
  for (const auto& [re, rule] : rules_) {
    if (std::regex_search(statement_text, re)) {
      std::string diagnostics = rule.diagnostics.empty()
                                    ? "matched rule '" + rule.pattern + "'"
                                    : rule.diagnostics;
      return {rule.ok, diagnostics, 0, false};
    }
  }
  return {default_ok_, "no rule matched", 0, false};
}

CheckOutcome StrictAsciiLatexChecker::check(const std::string& statement_text) {
  for (size_t i = 0; i < statement_text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(statement_text[i]);
    if (c >= 0x80) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "non-ASCII byte 0x%02X at offset %zu", c, i);
      return {false, buf, 0, false};
    }
  }
  size_t dollars = 0;
  bool escaped = false;
  for (char c : statement_text) {
    if (escaped) {
      escaped = false;
    } else if (c == '\\') {
      escaped = true;
    } else if (c == '$') {
      ++dollars;
    }
  }
  if (dollars % 2 != 0)
    return {false, "unbalanced '$' math delimiter", 0, false};
  return {true, "", 0, false};
}

namespace {

constexpr size_t kMaxCapturedOutput = 1 << 20;

[[noreturn]] void child_exec(const std::vector<std::string>& argv,
                             const std::filesystem::path& workdir, int out_fd,
                             int err_fd) {
  setpgid(0, 0);
  int devnull = open("/dev/null", O_RDONLY);
  if (devnull >= 0) dup2(devnull, STDIN_FILENO);
  if (!workdir.empty() && chdir(workdir.c_str()) != 0) {
    int err = errno;
    ssize_t n = write(err_fd, &err, sizeof(err));
    (void)n;
    _exit(127);
  }
  dup2(out_fd, STDOUT_FILENO);
  dup2(out_fd, STDERR_FILENO);
  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  execvp(cargv[0], cargv.data());
  int err = errno;
  ssize_t n = write(err_fd, &err, sizeof(err));
  (void)n;
  _exit(127);
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& workdir,
                          std::chrono::milliseconds timeout) {
  if (argv.empty()) throw std::invalid_argument("argv must be non-empty");

  int out_pipe[2];
  int err_pipe[2];
  if (pipe2(out_pipe, O_CLOEXEC) != 0)
    throw InfrastructureError(std::string("pipe failed: ") + std::strerror(errno));
  if (pipe2(err_pipe, O_CLOEXEC) != 0) {
    close(out_pipe[0]);
    close(out_pipe[1]);
    throw InfrastructureError(std::string("pipe failed: ") + std::strerror(errno));
  }

  pid_t pid = fork();
  if (pid < 0) {
    int err = errno;
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
    throw InfrastructureError(std::string("fork failed: ") + std::strerror(err));
  }
  if (pid == 0) child_exec(argv, workdir, out_pipe[1], err_pipe[1]);

  close(out_pipe[1]);
  close(err_pipe[1]);

  // The write end of err_pipe closes on a successful exec; anything readable
  // there is the child's errno from a failed start.
  int child_errno = 0;
  ssize_t n = read(err_pipe[0], &child_errno, sizeof(child_errno));
  close(err_pipe[0]);
  if (n > 0) {
    close(out_pipe[0]);
    waitpid(pid, nullptr, 0);
    throw InfrastructureError("cannot run '" + argv[0] +
                              "': " + std::strerror(child_errno));
  }

  using Clock = std::chrono::steady_clock;
  auto deadline = Clock::now() + timeout;
  auto hard_stop = Clock::time_point::max();
  ProcessResult result;
  bool truncated = false;
  char buf[4096];
  while (true) {
    auto now = Clock::now();
    if (!result.timed_out && now >= deadline) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      hard_stop = now + std::chrono::seconds(2);
    }
    if (result.timed_out && Clock::now() >= hard_stop) break;

    auto until = result.timed_out ? hard_stop : deadline;
    auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(
        until - Clock::now());
    int wait_ms = static_cast<int>(
        std::clamp<int64_t>(wait.count(), 0, 250));
    struct pollfd pfd{out_pipe[0], POLLIN, 0};
    int rv = poll(&pfd, 1, wait_ms);
    if (rv < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rv == 0) continue;
    ssize_t r = read(out_pipe[0], buf, sizeof(buf));
    if (r < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (r == 0) break;
    if (result.output.size() < kMaxCapturedOutput) {
      size_t take = std::min(static_cast<size_t>(r),
                             kMaxCapturedOutput - result.output.size());
      result.output.append(buf, take);
      truncated = take < static_cast<size_t>(r);
    } else {
      truncated = true;
    }
  }
  close(out_pipe[0]);
  if (truncated) result.output += "\n[output truncated]";

  int status = 0;
  waitpid(pid, &status, 0);
  if (WIFEXITED(status))
    result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status))
    result.exit_code = 128 + WTERMSIG(status);
  return result;
}

namespace {

// mkdtemp under root; removal is the caller's job via the returned guard.
struct Workspace {
  std::filesystem::path dir;

  explicit Workspace(const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    std::string tmpl = (root / "autoform_check_XXXXXX").string();
    if (!mkdtemp(tmpl.data()))
      throw InfrastructureError("cannot create scratch workspace under " +
                                root.string() + ": " + std::strerror(errno));
    dir = tmpl;
  }

  ~Workspace() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }

  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
};

}  // namespace

CommandChecker::CommandChecker(Config config) : config_(std::move(config)) {
  if (config_.command.empty())
    throw ConfigError("checker command must be non-empty");
}

CheckOutcome CommandChecker::check(const std::string& statement_text) {
  auto root = config_.workspace_root.empty()
                  ? std::filesystem::temp_directory_path()
                  : config_.workspace_root;
  Workspace workspace(root);

  std::filesystem::path source = workspace.dir / config_.source_name;
  std::string content =
      config_.render ? config_.render(statement_text) : statement_text;
  {
    std::ofstream out(source, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
      throw InfrastructureError("cannot write " + source.string());
  }

  std::string file_str = source.string();
  std::string project_str = config_.project_path.string();
  std::vector<std::string> argv;
  argv.reserve(config_.command.size());
  for (const auto& element : config_.command)
    argv.push_back(fill_template(
        element, {{"{file}", file_str}, {"{project}", project_str}}));

  auto start = std::chrono::steady_clock::now();
  ProcessResult run = run_process(argv, workspace.dir, config_.timeout);
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);

  CheckOutcome outcome;
  outcome.timed_out = run.timed_out;
  outcome.ok = !run.timed_out && run.exit_code == 0;
  outcome.duration_ms = elapsed.count();
  outcome.diagnostics = run.output;
  if (run.timed_out) {
    if (!outcome.diagnostics.empty()) outcome.diagnostics += '\n';
    outcome.diagnostics +=
        "timed out after " + std::to_string(config_.timeout.count()) + " ms";
  }
  return outcome;
}

std::string render_typecheck_source(const std::string& statement,
                                    const std::vector<std::string>& imports,
                                    const std::string& template_text) {
  std::string imports_text;
  for (size_t i = 0; i < imports.size(); ++i) {
    if (i) imports_text += '\n';
    imports_text += imports[i];
  }
  std::string body = statement;
  if (!has_toplevel_assign(statement)) body += " := sorry";
  static const std::string kDefault = "{imports}\n\n{statement}\n";
  const std::string& tpl = template_text.empty() ? kDefault : template_text;
  return fill_template(tpl,
                       {{"{imports}", imports_text}, {"{statement}", body}});
}

std::unique_ptr<Checker> make_typecheck_checker(const TypecheckConfig& config) {
  CommandChecker::Config cc;
  cc.command = config.command;
  cc.project_path = config.project_path;
  cc.source_name = config.source_name;
  cc.timeout = config.timeout;
  cc.workspace_root = config.workspace_root;
  cc.checker_id = "typecheck-command";
  cc.render = [imports = config.imports,
               tpl = config.template_text](const std::string& statement) {
    return render_typecheck_source(statement, imports, tpl);
  };
  return std::make_unique<CommandChecker>(std::move(cc));
}

std::string render_latex_source(const std::string& body,
                                const std::string& template_text) {
  static const std::string kDefault =
      "\\documentclass{article}\n"
      "\\usepackage{amsmath}\n"
      "\\usepackage{amssymb}\n"
      "\\begin{document}\n"
      "{body}\n"
      "\\end{document}\n";
  const std::string& tpl = template_text.empty() ? kDefault : template_text;
  return fill_template(tpl, {{"{body}", body}});
}

std::unique_ptr<Checker> make_latex_checker(const LatexConfig& config) {
  CommandChecker::Config cc;
  cc.command = config.command;
  cc.source_name = config.source_name;
  cc.timeout = config.timeout;
  cc.workspace_root = config.workspace_root;
  cc.checker_id = "latex-command";
  cc.render = [tpl = config.template_text](const std::string& body) {
    return render_latex_source(body, tpl);
  };
  return std::make_unique<CommandChecker>(std::move(cc));
}

std::vector<CheckOutcome> check_batch(const std::vector<std::string>& statements,
                                      Checker& checker, size_t parallelism) {
  std::vector<CheckOutcome> outcomes(statements.size());
  std::vector<char> completed(statements.size(), 0);
  std::atomic<bool> aborted{false};
  std::mutex error_mutex;
  std::string first_error;

  parallel_for(statements.size(), parallelism, [&](size_t i) {
    if (aborted.load(std::memory_order_relaxed)) return;
    try {
      outcomes[i] = checker.check(statements[i]);
      completed[i] = 1;
    } catch (const InfrastructureError& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (first_error.empty()) first_error = e.what();
      aborted.store(true, std::memory_order_relaxed);
    }
  });

  if (aborted.load())
    throw BatchError(first_error, std::move(outcomes), std::move(completed));
  return outcomes;
}

}  // namespace autoform
