#include "autoform/corpus.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

#include "autoform/ioutil.hpp"

namespace autoform {

namespace {

bool is_ident_char(unsigned char c) {
  // Unicode bytes count as identifier characters so keywords never match
  // inside names like `theorem₂`.
  return std::isalnum(c) || c == '_' || c == '\'' || c == '.' || c >= 0x80;
}

// Keyword present as a whole token somewhere before the first ':'.
bool has_decl_keyword_before_colon(std::string_view text) {
  size_t colon = text.find(':');
  std::string_view head = colon == std::string_view::npos ? text : text.substr(0, colon);
  for (const auto& tok : split_whitespace(head))
    if (tok == "theorem" || tok == "lemma") return true;
  return false;
}

}  // namespace

std::vector<std::string> validate_problem(const BenchmarkProblem& p) {
  std::vector<std::string> violations;
  if (p.id.empty()) violations.push_back("id: must be non-empty");
  if (is_blank(p.nl_statement))
    violations.push_back("nl_statement: must be non-empty");
  if (is_blank(p.formal_statement)) {
    violations.push_back("formal_statement: must be non-empty");
  } else if (!has_decl_keyword_before_colon(p.formal_statement)) {
    violations.push_back(
        "formal_statement: no theorem/lemma keyword before the first ':'");
  }
  return violations;
}

std::vector<std::string> validate_statement(const FormalStatement& s) {
  std::vector<std::string> violations;
  if (s.name.empty()) violations.push_back("name: must be non-empty");
  if (is_blank(s.statement_text)) {
    violations.push_back("statement_text: must be non-empty");
  } else if (has_toplevel_assign(s.statement_text)) {
    violations.push_back(
        "statement_text: contains a proof body (top-level ':=')");
  }
  return violations;
}

std::vector<BenchmarkProblem> load_benchmark(const std::filesystem::path& path) {
  std::vector<BenchmarkProblem> problems;
  std::unordered_set<std::string> seen_ids;
  for_each_json_line(path, [&](size_t line_no, const json& j) {
    std::string where = path.string() + ":" + std::to_string(line_no);
    BenchmarkProblem p;
    p.id = get_required_string(j, "id", where);
    p.nl_statement = get_required_string(j, "nl_statement", where);
    p.formal_statement = get_required_string(j, "formal_statement", where);
    p.source = get_optional_string(j, "source", where);
    p.nl_proof = get_optional_string(j, "nl_proof", where);
    auto violations = validate_problem(p);
    if (!violations.empty())
      throw ParseError(where + ": invalid record: " + violations.front());
    if (!seen_ids.insert(p.id).second)
      throw ParseError(where + ": duplicate id '" + p.id + "'");
    problems.push_back(std::move(p));
  });
  return problems;
}

std::vector<FormalStatement> load_knowledge_base(const std::filesystem::path& path) {
  std::vector<FormalStatement> statements;
  for_each_json_line(path, [&](size_t line_no, const json& j) {
    std::string where = path.string() + ":" + std::to_string(line_no);
    FormalStatement s;
    s.name = get_required_string(j, "name", where);
    s.statement_text = get_required_string(j, "statement_text", where);
    s.origin = get_optional_string(j, "origin", where);
    auto violations = validate_statement(s);
    if (!violations.empty())
      throw ParseError(where + ": invalid statement: " + violations.front());
    statements.push_back(std::move(s));
  });
  return statements;
}

void save_benchmark(const std::vector<BenchmarkProblem>& problems,
                    const std::filesystem::path& path) {
  std::vector<json> lines;
  lines.reserve(problems.size());
  for (const auto& p : problems) {
    json j{{"id", p.id},
           {"nl_statement", p.nl_statement},
           {"formal_statement", p.formal_statement}};
    if (!p.source.empty()) j["source"] = p.source;
    if (!p.nl_proof.empty()) j["nl_proof"] = p.nl_proof;
    lines.push_back(std::move(j));
  }
  write_jsonl_atomic(path, lines);
}

void save_knowledge_base(const std::vector<FormalStatement>& statements,
                         const std::filesystem::path& path) {
  std::vector<json> lines;
  lines.reserve(statements.size());
  for (const auto& s : statements) {
    json j{{"name", s.name}, {"statement_text", s.statement_text}};
    if (!s.origin.empty()) j["origin"] = s.origin;
    lines.push_back(std::move(j));
  }
  write_jsonl_atomic(path, lines);
}

namespace {

// Shared character-level scanner: tracks comments, string literals and
// bracket nesting over Lean-style source.
struct SourceCursor {
  std::string_view src;
  size_t pos = 0;
  std::vector<char> brackets;  // stack of open brackets

  bool done() const { return pos >= src.size(); }
  char at(size_t i) const { return i < src.size() ? src[i] : '\0'; }

  // Advances past comments and string literals; returns true if it consumed
  // anything so the caller re-examines the new position.
  bool skip_inert() {
    char c = at(pos);
    if (c == '-' && at(pos + 1) == '-') {
      while (pos < src.size() && src[pos] != '\n') ++pos;
      return true;
    }
    if (c == '/' && at(pos + 1) == '-') {
      size_t depth = 1;
      pos += 2;
      while (pos < src.size() && depth > 0) {
        if (at(pos) == '/' && at(pos + 1) == '-') {
          depth++;
          pos += 2;
        } else if (at(pos) == '-' && at(pos + 1) == '/') {
          depth--;
          pos += 2;
        } else {
          ++pos;
        }
      }
      return true;
    }
    if (c == '"') {
      ++pos;
      while (pos < src.size() && src[pos] != '"') {
        if (src[pos] == '\\') ++pos;
        ++pos;
      }
      if (pos < src.size()) ++pos;
      return true;
    }
    return false;
  }

  static char matching_open(char close) {
    switch (close) {
      case ')': return '(';
      case '}': return '{';
      case ']': return '[';
    }
    return '\0';
  }

  // Returns: 0 not a bracket, 1 handled, -1 unbalanced close.
  int handle_bracket() {
    char c = at(pos);
    if (c == '(' || c == '{' || c == '[') {
      brackets.push_back(c);
      ++pos;
      return 1;
    }
    if (c == ')' || c == '}' || c == ']') {
      if (brackets.empty() || brackets.back() != matching_open(c)) {
        ++pos;
        return -1;
      }
      brackets.pop_back();
      ++pos;
      return 1;
    }
    return 0;
  }

  bool at_toplevel() const { return brackets.empty(); }

  bool at_assign() const { return at(pos) == ':' && at(pos + 1) == '='; }

  // Whole-word check at the current position.
  bool at_word(std::string_view word) const {
    if (src.compare(pos, word.size(), word) != 0) return false;
    if (pos > 0 && is_ident_char(static_cast<unsigned char>(src[pos - 1]))) return false;
    char after = at(pos + word.size());
    return after == '\0' || !is_ident_char(static_cast<unsigned char>(after));
  }
};

// Top-level words that end a declaration which has no `:=`.
const std::array<std::string_view, 28> kStructuralKeywords = {
    "theorem",  "lemma",     "example",   "def",        "instance",  "structure",
    "inductive", "class",    "abbreviation", "namespace", "section", "end",
    "variables", "variable", "open",      "import",     "universe",  "universes",
    "constant",  "constants", "axiom",    "axioms",     "attribute", "meta",
    "noncomputable", "run_cmd", "set_option", "include"};

std::string_view structural_keyword_at(const SourceCursor& cur) {
  for (auto kw : kStructuralKeywords)
    if (cur.at_word(kw)) return kw;
  return {};
}

}  // namespace

bool has_toplevel_assign(std::string_view text) {
  SourceCursor cur{text};
  while (!cur.done()) {
    if (cur.skip_inert()) continue;
    int b = cur.handle_bracket();
    if (b != 0) continue;  // unbalanced close: keep scanning, depth is best-effort here
    if (cur.at_toplevel() && cur.at_assign()) return true;
    ++cur.pos;
  }
  return false;
}

ExtractionResult extract_declarations(std::string_view source_text,
                                      std::string_view origin) {
  ExtractionResult result;
  SourceCursor cur{source_text};

  bool capturing = false;
  bool anonymous = false;      // `example` declarations are scanned but not emitted
  size_t decl_start = 0;
  std::string decl_name;

  auto finalize = [&](size_t end_pos) {
    if (!capturing) return;
    capturing = false;
    if (anonymous) return;
    if (decl_name.empty()) {
      result.warnings.push_back("declaration without a name skipped near byte " +
                                std::to_string(decl_start));
      return;
    }
    FormalStatement s;
    s.name = decl_name;
    s.statement_text = trim(source_text.substr(decl_start, end_pos - decl_start));
    s.origin = std::string(origin);
    result.statements.push_back(std::move(s));
  };

  auto abandon = [&](const char* why) {
    if (capturing) {
      result.warnings.push_back("unbalanced delimiter (" + std::string(why) +
                                ") in declaration '" +
                                (decl_name.empty() ? "<anonymous>" : decl_name) +
                                "'; declaration skipped");
    }
    capturing = false;
    cur.brackets.clear();
  };

  auto begin_capture = [&](std::string_view keyword) {
    decl_start = cur.pos;
    anonymous = keyword == "example";
    capturing = true;
    cur.pos += keyword.size();
    while (!cur.done() && std::isspace(static_cast<unsigned char>(cur.src[cur.pos])))
      ++cur.pos;
    size_t name_start = cur.pos;
    while (!cur.done()) {
      char c = cur.src[cur.pos];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == '{' ||
          c == '[' || c == ':')
        break;
      ++cur.pos;
    }
    decl_name = anonymous
                    ? std::string()
                    : std::string(cur.src.substr(name_start, cur.pos - name_start));
  };

  while (!cur.done()) {
    if (cur.skip_inert()) continue;
    int b = cur.handle_bracket();
    if (b == -1) {
      abandon("stray closing bracket");
      continue;
    }
    if (b == 1) continue;
    if (cur.at_toplevel()) {
      if (cur.at_assign()) {
        finalize(cur.pos);
        cur.pos += 2;
        continue;
      }
      std::string_view kw = structural_keyword_at(cur);
      if (!kw.empty()) {
        bool decl_kw = kw == "theorem" || kw == "lemma" || kw == "example";
        if (capturing) finalize(cur.pos);
        if (decl_kw) {
          begin_capture(kw);
        } else {
          cur.pos += kw.size();
        }
        continue;
      }
    }
    ++cur.pos;
  }

  if (capturing && !cur.at_toplevel()) {
    abandon("unclosed bracket at end of source");
  } else {
    finalize(source_text.size());
  }
  return result;
}

StatementLookup::StatementLookup(const std::vector<FormalStatement>& statements) {
  by_name_.reserve(statements.size());
  for (const auto& s : statements) by_name_.emplace(s.name, &s);
}

const FormalStatement* StatementLookup::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

}  // namespace autoform
