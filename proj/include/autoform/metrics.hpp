#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autoform/checkers.hpp"
#include "autoform/engine.hpp"

namespace autoform {

// BLEU-4 on whitespace tokens, 0..100. Modified n-gram precisions; when the
// raw match count is zero for n >= 2, numerator and denominator both get +1;
// unigram precision is never smoothed, so token-disjoint pairs score 0.
// Counts aggregate across pairs before combining, so a corpus score is not a
// mean of sentence scores.
struct BleuStats {
  std::array<int64_t, 4> matches{};
  std::array<int64_t, 4> totals{};
  int64_t candidate_len = 0;
  int64_t reference_len = 0;

  void accumulate(const std::string& candidate, const std::string& reference);
  void combine(const BleuStats& other);
  double score() const;
};

double bleu(const std::string& candidate, const std::string& reference);
double corpus_bleu(const std::vector<std::pair<std::string, std::string>>& pairs);
double mean_sentence_bleu(
    const std::vector<std::pair<std::string, std::string>>& pairs);

struct RateOutcome {
  std::string problem_id;
  bool positive = false;
  bool copy = false;  // passed the check but equals a prompt statement
  CheckOutcome check;
};

struct RateResult {
  double rate = 0.0;  // percent
  size_t n = 0;
  size_t positives = 0;
  size_t copies_excluded = 0;  // passed the check, excluded as prompt copies
  std::vector<RateOutcome> outcomes;  // record order
};

// A record is positive iff it generated successfully, the checker accepts its
// statement and the statement is not a whitespace-collapsed copy of any
// prompt statement. Error-flagged records count as negatives without being
// checked. Checker infrastructure failures propagate as BatchError.
RateResult typecheck_rate(const std::vector<GenerationRecord>& records,
                          Checker& checker,
                          const std::vector<std::string>& prompt_statements,
                          size_t parallelism = 1);

// Same shape for the informal direction; no copy exclusion.
RateResult compile_rate(const std::vector<GenerationRecord>& records,
                        Checker& checker, size_t parallelism = 1);

struct Judgment {
  enum class Verdict { correct, incorrect, unjudged };

  std::string problem_id;
  std::string method;
  Verdict verdict = Verdict::unjudged;
  std::string judge;
  std::string note;
};

std::string_view verdict_name(Judgment::Verdict v);
Judgment::Verdict verdict_from_name(std::string_view name);

// Line-delimited records with problem_id, method, verdict, judge, note.
// (problem_id, method) must be unique.
std::vector<Judgment> load_judgments(const std::filesystem::path& path);
void save_judgments(const std::vector<Judgment>& judgments,
                    const std::filesystem::path& path);

struct AccuracyResult {
  double rate = 0.0;  // percent
  size_t n = 0;
  size_t correct = 0;
  size_t incorrect = 0;
  size_t unjudged = 0;  // no judgment found, or verdict unjudged
};

// Records without a matching (problem_id, method) judgment count in n as
// not-correct.
AccuracyResult accuracy(const std::vector<GenerationRecord>& records,
                        const std::vector<Judgment>& judgments);

struct EvalRow {
  std::string method;
  Direction direction = Direction::formalize;
  size_t n = 0;
  std::optional<double> typecheck;  // percent
  std::optional<double> compile;
  std::optional<double> bleu;
  std::optional<double> accuracy;
  size_t typechecked = 0;
  size_t copies_excluded = 0;
  size_t compiled = 0;
  size_t correct = 0;
  size_t unjudged = 0;

  json to_json() const;
  static EvalRow from_json(const json& j, const std::string& where);
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by (method, direction)

  json to_json() const;
  static EvalReport from_json(const json& j, const std::string& where);
};

// Validates count consistency, rejects duplicate (method, direction) rows and
// sorts. At least one row required.
EvalReport aggregate(std::vector<EvalRow> rows);

// Aligned text table, one decimal per rate, "-" for absent metrics.
std::string render_report_table(const EvalReport& report);

}  // namespace autoform
