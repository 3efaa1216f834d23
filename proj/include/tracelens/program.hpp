#pragma once

// Clause syntax: a Prolog subset, see docs/program-syntax.md.

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tracelens/term.hpp"

namespace tracelens::clp {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                           message),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct Clause {
  TermPtr head;
  std::vector<TermPtr> body;          // conjunction flattened, `true` dropped
  std::uint32_t var_count = 0;        // clause-local variables 0..var_count-1
};

/// `name/arity`
std::string indicator(std::string_view name, std::size_t arity);

/// Predicates handled by the engine itself, never defined by clauses.
bool is_builtin(std::string_view name, std::size_t arity);

class Program {
 public:
  static Program load(std::string_view source);

  const std::vector<Clause>& clauses() const { return clauses_; }
  /// Clause indices for a predicate in source order (empty if undefined).
  std::span<const std::size_t> clauses_for(std::string_view name, std::size_t arity) const;
  bool defines(std::string_view name, std::size_t arity) const;

 private:
  std::vector<Clause> clauses_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> index_;
};

/// A query: the term plus the source names of its variables (by number).
struct Goal {
  TermPtr term;
  std::vector<std::string> var_names;
};

Goal parse_goal(std::string_view text);

/// Reads one term (no trailing period needed). Variables are numbered in
/// order of first appearance; `names` receives their source names.
TermPtr parse_term(std::string_view text, std::vector<std::string>* names = nullptr);

}  // namespace tracelens::clp
