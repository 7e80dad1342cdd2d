#include "autoform/prompting.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "autoform/ioutil.hpp"

namespace autoform {
namespace {

std::string render_references(const std::vector<FormalStatement>& refs,
                              const PromptStyle& style) {
  std::string out;
  for (size_t i = 0; i < refs.size(); ++i) {
    if (i) out += '\n';
    out += style.reference_label;
    out += ' ';
    out += refs[i].statement_text;
  }
  return out;
}

std::string render_pair(const PromptExample& ex, Direction direction,
                        const PromptStyle& style) {
  if (direction == Direction::formalize)
    return style.nl_label + " " + ex.nl_text + "\n" + style.formal_label + " " +
           ex.formal_text;
  return style.formal_label + " " + ex.formal_text + "\n" + style.nl_label + " " +
         ex.nl_text;
}

std::string render_query_block(const std::string& query, Direction direction,
                               const PromptStyle& style) {
  if (direction == Direction::formalize)
    return style.nl_label + " " + query + "\n" + style.formal_label;
  return style.formal_label + " " + query + "\n" + style.nl_label;
}

void require_example(const PromptExample& ex, const std::string& what) {
  if (ex.nl_text.empty() || ex.formal_text.empty())
    throw std::invalid_argument(what + " has an empty text field");
}

}  // namespace

std::vector<PromptExample> load_prompt_examples(const std::filesystem::path& path) {
  std::vector<PromptExample> out;
  for_each_json_line(path, [&](size_t line_no, const json& j) {
    std::string where = path.string() + ":" + std::to_string(line_no);
    PromptExample ex;
    ex.nl_text = get_required_string(j, "nl", where);
    ex.formal_text = get_required_string(j, "formal", where);
    if (ex.nl_text.empty() || ex.formal_text.empty())
      throw ParseError(where + ": example fields must be non-empty");
    out.push_back(std::move(ex));
  });
  return out;
}

PromptTemplate PromptTemplate::load_file(const std::filesystem::path& path) {
  std::string text = read_file(path);
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return {std::move(text)};
}

PromptTemplate PromptTemplate::fewshot_default() {
  return {"{instruction}\n\n{examples}\n\n{query}"};
}

PromptTemplate PromptTemplate::retrieval_default() {
  return {"{instruction}\n\n{examples}\n\n{references}\n{query}"};
}

std::string default_instruction(Direction direction) {
  if (direction == Direction::formalize)
    return "Translate the following natural language statements into formal Lean "
           "mathlib statements.";
  return "Translate the following formal Lean mathlib statements into natural "
         "language.";
}

std::string stop_marker(Direction direction, const PromptStyle& style) {
  const std::string& lead =
      direction == Direction::formalize ? style.nl_label : style.formal_label;
  return style.block_separator + lead;
}

std::vector<std::string> stop_sequences(const Prompt& prompt) {
  std::vector<std::string> stops{stop_marker(prompt.direction, prompt.style)};
  if (!prompt.query_references.empty() || !prompt.references_per_example.empty())
    stops.push_back(prompt.style.block_separator + prompt.style.reference_label);
  return stops;
}

std::string render_prompt(const Prompt& prompt) {
  std::string examples;
  for (size_t i = 0; i < prompt.examples.size(); ++i) {
    if (i) examples += prompt.style.block_separator;
    if (i < prompt.references_per_example.size() &&
        !prompt.references_per_example[i].empty()) {
      examples += render_references(prompt.references_per_example[i], prompt.style);
      examples += '\n';
    }
    examples += render_pair(prompt.examples[i], prompt.direction, prompt.style);
  }
  std::string references = render_references(prompt.query_references, prompt.style);
  std::string query = render_query_block(prompt.query, prompt.direction, prompt.style);
  return fill_template(prompt.template_text, {{"{instruction}", prompt.instruction},
                                              {"{examples}", examples},
                                              {"{references}", references},
                                              {"{query}", query}});
}

Prompt build_fewshot_prompt(const std::vector<PromptExample>& examples,
                            const std::string& query, Direction direction,
                            size_t max_examples, const PromptOptions& opts) {
  if (examples.empty())
    throw std::invalid_argument("few-shot prompt needs at least one example");
  if (query.empty()) throw std::invalid_argument("prompt query must be non-empty");
  if (max_examples == 0) throw std::invalid_argument("max_examples must be >= 1");
  for (size_t i = 0; i < examples.size(); ++i)
    require_example(examples[i], "example " + std::to_string(i));

  Prompt p;
  p.direction = direction;
  p.instruction =
      opts.instruction.empty() ? default_instruction(direction) : opts.instruction;
  p.template_text = opts.template_text.empty() ? PromptTemplate::fewshot_default().text
                                               : opts.template_text;
  p.style = opts.style;
  size_t keep = std::min(examples.size(), max_examples);
  p.examples.assign(examples.end() - static_cast<ptrdiff_t>(keep), examples.end());
  p.query = query;
  p.rendered = render_prompt(p);
  return p;
}

Prompt build_retrieval_prompt(const std::vector<RetrievalShot>& shots,
                              const std::string& query_nl,
                              const std::vector<FormalStatement>& query_references,
                              const PromptOptions& opts) {
  if (query_nl.empty()) throw std::invalid_argument("prompt query must be non-empty");
  for (size_t i = 0; i < shots.size(); ++i) {
    if (shots[i].references.size() != query_references.size())
      throw std::invalid_argument(
          "shot " + std::to_string(i) + " has " +
          std::to_string(shots[i].references.size()) + " references but the query has " +
          std::to_string(query_references.size()));
    require_example(shots[i].example, "shot " + std::to_string(i) + " example");
  }

  Prompt p;
  p.direction = Direction::formalize;
  p.instruction = opts.instruction.empty() ? default_instruction(p.direction)
                                           : opts.instruction;
  p.template_text = opts.template_text.empty()
                        ? PromptTemplate::retrieval_default().text
                        : opts.template_text;
  p.style = opts.style;
  for (const auto& shot : shots) {
    p.examples.push_back(shot.example);
    p.references_per_example.push_back(shot.references);
  }
  p.query_references = query_references;
  p.query = query_nl;
  p.rendered = render_prompt(p);
  return p;
}

Prompt truncate_to_budget(const Prompt& prompt, size_t budget,
                          const TokenEstimator& estimator) {
  TokenEstimator est = estimator;
  if (!est) est = [](std::string_view s) { return estimate_tokens(s); };

  Prompt floor = prompt;
  floor.examples.clear();
  floor.references_per_example.clear();
  floor.rendered = render_prompt(floor);
  size_t floor_estimate = est(floor.rendered);
  if (floor_estimate > budget)
    throw ConfigError("prompt budget " + std::to_string(budget) +
                      " cannot fit the instruction and query alone (estimated " +
                      std::to_string(floor_estimate) + ")");

  Prompt p = prompt;
  p.rendered = render_prompt(p);
  while (est(p.rendered) > budget && !p.examples.empty()) {
    p.examples.erase(p.examples.begin());
    if (!p.references_per_example.empty())
      p.references_per_example.erase(p.references_per_example.begin());
    p.rendered = render_prompt(p);
  }
  return p;
}

}  // namespace autoform
