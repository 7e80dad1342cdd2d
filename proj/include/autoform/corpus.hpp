#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "autoform/common.hpp"

namespace autoform {

// One parallel benchmark record: natural language statement and proof plus
// the gold formal statement.
struct BenchmarkProblem {
  std::string id;
  std::string source;         // book / exercise label, may be empty
  std::string nl_statement;   // UTF-8 LaTeX text
  std::string nl_proof;       // optional
  std::string formal_statement;

  bool operator==(const BenchmarkProblem&) const = default;
};

// One knowledge-base declaration: statement only, no proof body.
struct FormalStatement {
  std::string name;
  std::string statement_text;
  std::string origin;         // file / library tag, may be empty

  bool operator==(const FormalStatement&) const = default;
};

// Empty result means every invariant holds; each entry names the field and
// the violated rule.
std::vector<std::string> validate_problem(const BenchmarkProblem& p);
std::vector<std::string> validate_statement(const FormalStatement& s);

// Line-delimited JSON records, one per line. Loaders validate invariants and
// preserve file order; errors carry path:line.
std::vector<BenchmarkProblem> load_benchmark(const std::filesystem::path& path);
std::vector<FormalStatement> load_knowledge_base(const std::filesystem::path& path);
void save_benchmark(const std::vector<BenchmarkProblem>& problems,
                    const std::filesystem::path& path);
void save_knowledge_base(const std::vector<FormalStatement>& statements,
                         const std::filesystem::path& path);

// True iff text contains a `:=` at bracket depth zero, outside comments and
// string literals. Statements must not; a proof body starts there.
bool has_toplevel_assign(std::string_view text);

struct ExtractionResult {
  std::vector<FormalStatement> statements;
  std::vector<std::string> warnings;  // skipped declarations, one line each
};

// Scans formal-library source for top-level `theorem` / `lemma` declarations.
// Statement text runs from the keyword to just before the first top-level
// `:=`; binder-level `:=` inside (), {}, [] is ignored. Anonymous `example`
// declarations are skipped. A declaration with unbalanced delimiters is
// skipped with a warning, never fatal.
ExtractionResult extract_declarations(std::string_view source_text,
                                      std::string_view origin = "");

// Name -> statement map over a borrowed statement list; the list must outlive
// the lookup.
class StatementLookup {
 public:
  explicit StatementLookup(const std::vector<FormalStatement>& statements);
  const FormalStatement* find(const std::string& name) const;
  size_t size() const { return by_name_.size(); }

 private:
  std::unordered_map<std::string_view, const FormalStatement*> by_name_;
};

}  // namespace autoform
