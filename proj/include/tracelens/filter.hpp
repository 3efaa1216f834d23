#pragma once

// Filter specifications (docs/filter-language.md), their position automata
// and the merged matcher the driver runs on every event.

#include <bitset>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tracelens/trace_model.hpp"

namespace tracelens::filter {

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

class DuplicateId : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using PortSet = std::bitset<kPortCount>;

enum class Cmp { eq, lt, le, gt, ge };

struct Atom {
  enum class Kind { port, pred, depth, chrono, variable, truth };
  Kind kind = Kind::truth;
  PortSet ports;        // port
  std::string text;     // pred (name/arity), variable
  Cmp cmp = Cmp::eq;    // depth, chrono
  std::int64_t value = 0;

  bool eval(const TraceEvent& e) const;
  /// Canonical text; equal keys denote the same predicate.
  std::string key() const;
};

/// A conjunction with every port atom folded into one leading port set.
struct Guard {
  std::optional<PortSet> ports;
  std::vector<Atom> rest;
};

struct Pattern {
  enum class Kind { event, concat, alt, star };
  Kind kind = Kind::event;
  std::vector<Atom> atoms;                          // event
  std::vector<std::shared_ptr<const Pattern>> parts;  // concat, alt: >= 2; star: 1
};
using PatternPtr = std::shared_ptr<const Pattern>;

struct FilterSpec {
  std::string id;
  PatternPtr pattern;
  bool sequence = false;
  std::set<AttrGroup> wanted_attrs;  // always holds port and chrono
};

/// Parses zero or more `filter <id> { ... }` blocks.
std::vector<FilterSpec> parse_filters(std::string_view source);
/// Source text of each block, for sending blocks one at a time.
std::vector<std::string> split_filters(std::string_view source);
/// Parses exactly one block.
FilterSpec parse_filter(std::string_view source);

/// Position (Glushkov) automaton: one state per event pattern occurrence.
struct Automaton {
  std::vector<Guard> positions;
  std::vector<int> first;
  std::vector<bool> last;
  std::vector<std::vector<int>> follow;
};

Automaton compile(const FilterSpec& spec);

/// Runs one automaton on its own, testing atoms left to right with
/// short-circuit and no sharing. This is the per-filter baseline.
class FilterRunner {
 public:
  explicit FilterRunner(Automaton automaton);
  bool step(const TraceEvent& e);
  std::uint64_t predicate_evaluations() const { return evaluations_; }
  const std::vector<int>& active() const { return active_; }

 private:
  Automaton a_;
  std::vector<int> active_;
  std::vector<char> mark_;
  std::uint64_t evaluations_ = 0;
};

/// Union of several automata. Positions are concatenated and each accepting
/// position carries its filter's tag. Per event the port is looked up once
/// and every other distinct atom is tested at most once.
class MergedMatcher {
 public:
  MergedMatcher() = default;
  /// Throws DuplicateId.
  static MergedMatcher build(const std::vector<std::pair<std::string, Automaton>>& machines);

  /// Tags accepting at this event, sorted.
  std::vector<std::string> match(const TraceEvent& e);

  std::uint64_t predicate_evaluations() const { return evaluations_; }
  std::uint64_t events_seen() const { return events_; }
  std::size_t filter_count() const { return tags_.size(); }
  bool empty() const { return tags_.empty(); }

  /// Active positions per tag, in each machine's own numbering.
  std::map<std::string, std::vector<int>> run_state() const;
  /// Reinstates active positions for tags that exist in this matcher.
  void restore_run_state(const std::map<std::string, std::vector<int>>& state);

 private:
  struct Pos {
    Guard guard;
    std::vector<int> atom_ids;  // ids into atoms_ for guard.rest
    std::vector<int> follow;
    int machine = 0;
    bool last = false;
  };
  std::vector<Pos> pos_;
  std::vector<Atom> atoms_;
  std::vector<std::string> tags_;
  std::vector<int> offset_;                              // first position of each machine
  std::vector<std::vector<int>> first_by_port_;          // port -> first positions admitting it
  std::vector<int> first_any_;                           // first positions without port constraint
  bool first_has_port_ = false;
  std::vector<int> active_;
  std::vector<char> mark_;
  std::vector<signed char> memo_;
  std::uint64_t evaluations_ = 0;
  std::uint64_t events_ = 0;
};

/// Convenience: compile and merge filters tagged by their own ids.
MergedMatcher merge(const std::vector<FilterSpec>& specs);

}  // namespace tracelens::filter
