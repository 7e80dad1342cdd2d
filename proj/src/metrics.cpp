#include "autoform/metrics.hpp"

#include "autoform/ioutil.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

namespace autoform {

namespace {

// n-grams keyed by their tokens joined with an unprintable separator.
std::unordered_map<std::string, int64_t> ngram_counts(
    const std::vector<std::string>& tokens, size_t n) {
  std::unordered_map<std::string, int64_t> counts;
  if (tokens.size() < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (size_t j = 0; j < n; ++j) {
      if (j) key += '\x1e';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

void BleuStats::accumulate(const std::string& candidate,
                           const std::string& reference) {
  auto cand = split_whitespace(candidate);
  auto ref = split_whitespace(reference);
  candidate_len += static_cast<int64_t>(cand.size());
  reference_len += static_cast<int64_t>(ref.size());
  for (size_t n = 1; n <= 4; ++n) {
    auto cand_counts = ngram_counts(cand, n);
    auto ref_counts = ngram_counts(ref, n);
    for (const auto& [gram, count] : cand_counts) {
      totals[n - 1] += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
    }
  }
}

void BleuStats::combine(const BleuStats& other) {
  for (size_t i = 0; i < 4; ++i) {
    matches[i] += other.matches[i];
    totals[i] += other.totals[i];
  }
  candidate_len += other.candidate_len;
  reference_len += other.reference_len;
}

double BleuStats::score() const {
  if (candidate_len == 0) return 0.0;
  double log_sum = 0.0;
  for (size_t n = 1; n <= 4; ++n) {
    int64_t m = matches[n - 1];
    int64_t h = totals[n - 1];
    double p;
    if (n == 1) {
      if (m == 0) return 0.0;
      p = static_cast<double>(m) / static_cast<double>(h);
    } else if (m == 0) {
      p = 1.0 / static_cast<double>(h + 1);
    } else {
      p = static_cast<double>(m) / static_cast<double>(h);
    }
    log_sum += 0.25 * std::log(p);
  }
  double bp = candidate_len > reference_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(reference_len) /
                                       static_cast<double>(candidate_len));
  return 100.0 * bp * std::exp(log_sum);
}

double bleu(const std::string& candidate, const std::string& reference) {
  BleuStats stats;
  stats.accumulate(candidate, reference);
  return stats.score();
}

double corpus_bleu(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw ConfigError("corpus BLEU needs at least one pair");
  BleuStats stats;
  for (const auto& [candidate, reference] : pairs)
    stats.accumulate(candidate, reference);
  return stats.score();
}

double mean_sentence_bleu(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw ConfigError("mean BLEU needs at least one pair");
  double sum = 0.0;
  for (const auto& [candidate, reference] : pairs) sum += bleu(candidate, reference);
  return sum / static_cast<double>(pairs.size());
}

namespace {

RateResult rate_over_records(const std::vector<GenerationRecord>& records,
                             Checker& checker, Direction expected,
                             const std::vector<std::string>& prompt_statements,
                             size_t parallelism) {
  if (records.empty()) throw ConfigError("rate needs at least one record");
  for (const auto& r : records)
    if (r.direction != expected)
      throw ConfigError("record '" + r.problem_id + "' has direction " +
                        std::string(direction_name(r.direction)) + ", expected " +
                        std::string(direction_name(expected)));

  std::unordered_set<std::string> prompt_set;
  for (const auto& s : prompt_statements) prompt_set.insert(collapse_whitespace(s));

  std::vector<size_t> checked_indices;
  std::vector<std::string> to_check;
  for (size_t i = 0; i < records.size(); ++i) {
    if (!records[i].ok()) continue;
    checked_indices.push_back(i);
    to_check.push_back(records[i].extracted_statement);
  }
  auto checked = check_batch(to_check, checker, parallelism);

  RateResult result;
  result.n = records.size();
  result.outcomes.resize(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    result.outcomes[i].problem_id = records[i].problem_id;
    if (!records[i].ok())
      result.outcomes[i].check.diagnostics =
          "generation failed: " + *records[i].error;
  }
  for (size_t j = 0; j < checked_indices.size(); ++j) {
    RateOutcome& outcome = result.outcomes[checked_indices[j]];
    const GenerationRecord& record = records[checked_indices[j]];
    outcome.check = checked[j];
    outcome.copy =
        checked[j].ok &&
        prompt_set.count(collapse_whitespace(record.extracted_statement)) > 0;
    outcome.positive = checked[j].ok && !outcome.copy;
    result.positives += outcome.positive ? 1 : 0;
    result.copies_excluded += outcome.copy ? 1 : 0;
  }
  result.rate =
      100.0 * static_cast<double>(result.positives) / static_cast<double>(result.n);
  return result;
}

}  // namespace

RateResult typecheck_rate(const std::vector<GenerationRecord>& records,
                          Checker& checker,
                          const std::vector<std::string>& prompt_statements,
                          size_t parallelism) {
  return rate_over_records(records, checker, Direction::formalize,
                           prompt_statements, parallelism);
}

RateResult compile_rate(const std::vector<GenerationRecord>& records,
                        Checker& checker, size_t parallelism) {
  return rate_over_records(records, checker, Direction::informalize, {},
                           parallelism);
}

std::string_view verdict_name(Judgment::Verdict v) {
  switch (v) {
    case Judgment::Verdict::correct: return "correct";
    case Judgment::Verdict::incorrect: return "incorrect";
    case Judgment::Verdict::unjudged: return "unjudged";
  }
  return "unknown";
}

Judgment::Verdict verdict_from_name(std::string_view name) {
  if (name == "correct") return Judgment::Verdict::correct;
  if (name == "incorrect") return Judgment::Verdict::incorrect;
  if (name == "unjudged") return Judgment::Verdict::unjudged;
  throw ConfigError("unknown verdict '" + std::string(name) + "'");
}

std::vector<Judgment> load_judgments(const std::filesystem::path& path) {
  std::vector<Judgment> judgments;
  std::unordered_set<std::string> seen;
  for_each_json_line(path, [&](size_t line_no, const json& j) {
    std::string where = path.string() + ":" + std::to_string(line_no);
    Judgment judgment;
    judgment.problem_id = get_required_string(j, "problem_id", where);
    judgment.method = get_required_string(j, "method", where);
    try {
      judgment.verdict = verdict_from_name(get_required_string(j, "verdict", where));
    } catch (const ConfigError& e) {
      throw ParseError(where + ": " + e.what());
    }
    judgment.judge = get_optional_string(j, "judge", where);
    judgment.note = get_optional_string(j, "note", where);
    if (!seen.insert(judgment.problem_id + '\x1f' + judgment.method).second)
      throw ParseError(where + ": duplicate judgment for ('" +
                       judgment.problem_id + "', '" + judgment.method + "')");
    judgments.push_back(std::move(judgment));
  });
  return judgments;
}

void save_judgments(const std::vector<Judgment>& judgments,
                    const std::filesystem::path& path) {
  std::vector<json> lines;
  lines.reserve(judgments.size());
  for (const auto& j : judgments) {
    json line{{"problem_id", j.problem_id},
              {"method", j.method},
              {"verdict", std::string(verdict_name(j.verdict))}};
    if (!j.judge.empty()) line["judge"] = j.judge;
    if (!j.note.empty()) line["note"] = j.note;
    lines.push_back(std::move(line));
  }
  write_jsonl_atomic(path, lines);
}

AccuracyResult accuracy(const std::vector<GenerationRecord>& records,
                        const std::vector<Judgment>& judgments) {
  if (records.empty()) throw ConfigError("accuracy needs at least one record");
  std::unordered_map<std::string, Judgment::Verdict> by_key;
  for (const auto& j : judgments) {
    auto [it, inserted] =
        by_key.emplace(j.problem_id + '\x1f' + j.method, j.verdict);
    if (!inserted)
      throw ConfigError("duplicate judgment for ('" + j.problem_id + "', '" +
                        j.method + "')");
  }

  AccuracyResult result;
  result.n = records.size();
  for (const auto& r : records) {
    auto it = by_key.find(r.problem_id + '\x1f' +
                          std::string(method_name(r.method)));
    if (it == by_key.end() || it->second == Judgment::Verdict::unjudged) {
      ++result.unjudged;
    } else if (it->second == Judgment::Verdict::correct) {
      ++result.correct;
    } else {
      ++result.incorrect;
    }
  }
  result.rate =
      100.0 * static_cast<double>(result.correct) / static_cast<double>(result.n);
  return result;
}

json EvalRow::to_json() const {
  json j{{"method", method},
         {"direction", std::string(direction_name(direction))},
         {"n", n},
         {"typechecked", typechecked},
         {"copies_excluded", copies_excluded},
         {"compiled", compiled},
         {"correct", correct},
         {"unjudged", unjudged}};
  if (typecheck) j["typecheck_rate"] = *typecheck;
  if (compile) j["compile_rate"] = *compile;
  if (bleu) j["bleu"] = *bleu;
  if (accuracy) j["accuracy"] = *accuracy;
  return j;
}

EvalRow EvalRow::from_json(const json& j, const std::string& where) {
  EvalRow row;
  row.method = get_required_string(j, "method", where);
  try {
    row.direction = direction_from_name(get_required_string(j, "direction", where));
  } catch (const ConfigError& e) {
    throw ParseError(where + ": " + e.what());
  }
  auto require_count = [&](const char* key) -> size_t {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_unsigned())
      throw ParseError(where + ": missing count '" + key + "'");
    return it->get<size_t>();
  };
  row.n = require_count("n");
  row.typechecked = require_count("typechecked");
  row.copies_excluded = require_count("copies_excluded");
  row.compiled = require_count("compiled");
  row.correct = require_count("correct");
  row.unjudged = require_count("unjudged");
  auto optional_rate = [&](const char* key) -> std::optional<double> {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_number()) throw ParseError(where + ": '" + key + "' must be a number");
    return it->get<double>();
  };
  row.typecheck = optional_rate("typecheck_rate");
  row.compile = optional_rate("compile_rate");
  row.bleu = optional_rate("bleu");
  row.accuracy = optional_rate("accuracy");
  return row;
}

json EvalReport::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) rows_json.push_back(row.to_json());
  return json{{"rows", rows_json}};
}

EvalReport EvalReport::from_json(const json& j, const std::string& where) {
  auto it = j.find("rows");
  if (it == j.end() || !it->is_array())
    throw ParseError(where + ": missing rows array");
  std::vector<EvalRow> rows;
  for (size_t i = 0; i < it->size(); ++i)
    rows.push_back(
        EvalRow::from_json((*it)[i], where + " row " + std::to_string(i + 1)));
  return aggregate(std::move(rows));
}

EvalReport aggregate(std::vector<EvalRow> rows) {
  if (rows.empty()) throw ConfigError("report needs at least one row");
  std::unordered_set<std::string> seen;
  for (const auto& row : rows) {
    std::string key = row.method + '\x1f' + std::string(direction_name(row.direction));
    if (!seen.insert(key).second)
      throw ConfigError("duplicate report row for " + row.method + "/" +
                        std::string(direction_name(row.direction)));
    std::string label =
        row.method + "/" + std::string(direction_name(row.direction));
    auto check_count = [&](size_t value, const char* name) {
      if (value > row.n)
        throw ConfigError("inconsistent counts for " + label + ": " + name + " " +
                          std::to_string(value) + " exceeds n " +
                          std::to_string(row.n));
    };
    check_count(row.typechecked, "typechecked");
    check_count(row.copies_excluded, "copies_excluded");
    check_count(row.compiled, "compiled");
    check_count(row.correct, "correct");
    check_count(row.unjudged, "unjudged");
    if (row.correct + row.unjudged > row.n)
      throw ConfigError("inconsistent counts for " + label +
                        ": correct + unjudged exceeds n");
    for (const auto& rate : {row.typecheck, row.compile, row.bleu, row.accuracy})
      if (rate && (*rate < 0.0 || *rate > 100.0))
        throw ConfigError("rate out of range for " + label);
  }
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    if (a.method != b.method) return a.method < b.method;
    return direction_name(a.direction) < direction_name(b.direction);
  });
  return EvalReport{std::move(rows)};
}

std::string render_report_table(const EvalReport& report) {
  if (report.rows.empty()) throw ConfigError("report needs at least one row");
  const std::array<std::string, 7> headers{"method", "direction", "n",
                                           "typecheck", "compile", "bleu",
                                           "accuracy"};
  auto fmt = [](const std::optional<double>& v) -> std::string {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *v);
    return buf;
  };

  std::vector<std::array<std::string, 7>> cells;
  for (const auto& row : report.rows)
    cells.push_back({row.method, std::string(direction_name(row.direction)),
                     std::to_string(row.n), fmt(row.typecheck), fmt(row.compile),
                     fmt(row.bleu), fmt(row.accuracy)});

  std::array<size_t, 7> widths{};
  for (size_t c = 0; c < 7; ++c) {
    widths[c] = headers[c].size();
    for (const auto& row : cells) widths[c] = std::max(widths[c], row[c].size());
  }

  auto pad = [&](const std::string& text, size_t c) {
    std::string out;
    // Labels flush left, numbers flush right.
    if (c < 2) {
      out = text + std::string(widths[c] - text.size(), ' ');
    } else {
      out = std::string(widths[c] - text.size(), ' ') + text;
    }
    return out;
  };

  std::string out;
  for (size_t c = 0; c < 7; ++c) {
    if (c) out += "  ";
    out += pad(headers[c], c);
  }
  out += '\n';
  for (size_t c = 0; c < 7; ++c) {
    if (c) out += "  ";
    out += std::string(widths[c], '-');
  }
  out += '\n';
  for (const auto& row : cells) {
    for (size_t c = 0; c < 7; ++c) {
      if (c) out += "  ";
      out += pad(row[c], c);
    }
    out += '\n';
  }
  return out;
}

}  // namespace autoform
