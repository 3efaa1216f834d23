#pragma once

// Reference implementations the tests compare against. They share no code
// with the library beyond data types.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tracelens/corpus.hpp"
#include "tracelens/filter.hpp"
#include "tracelens/trace_model.hpp"

namespace oracle {

using tracelens::TraceEvent;

/// Placements of n non-attacking queens, by permutation enumeration.
std::int64_t queens_count(int n);
/// All solutions as column lists (1-based), lexicographic order.
std::vector<std::vector<int>> queens_solutions(int n);

/// Assignments of 1..domain to every variable satisfying every constraint.
std::int64_t csp_count(const tracelens::corpus::CspInstance& csp);

/// Evaluates one atom from the event fields directly.
bool atom_holds(const tracelens::filter::Atom& a, const TraceEvent& e);

/// match[i] is true when some non-empty window ending at event i matches the
/// pattern as a whole (dynamic programming over start positions).
std::vector<bool> naive_matches(const tracelens::filter::FilterSpec& spec, const std::vector<TraceEvent>& events);

/// Copy of `e` restricted to the given attribute groups, with tags set.
TraceEvent project(const TraceEvent& e, const std::set<tracelens::AttrGroup>& groups, std::vector<std::string> tags);

/// The stream a client with `filters` should receive, computed from the
/// complete stream by filtering on the client side.
std::vector<TraceEvent> client_side(const std::vector<TraceEvent>& full,
                                    const std::vector<tracelens::filter::FilterSpec>& filters);

/// Names found in a trace, used to build filters that actually match.
struct Vocabulary {
  std::vector<std::string> preds;
  std::vector<std::string> vars;
  std::int64_t max_depth = 1;
  std::uint64_t events = 1;
};
Vocabulary vocabulary(const std::vector<TraceEvent>& events);

/// A syntactically valid filter block over the vocabulary.
std::string random_filter(std::mt19937_64& rng, const std::string& id, const Vocabulary& v, bool sequence_allowed = true);
/// A filter whose every first position tests the port.
std::string random_port_filter(std::mt19937_64& rng, const std::string& id, const Vocabulary& v);

/// Renders `name` as a filter name token, quoting when needed.
std::string filter_name(const std::string& name);

}  // namespace oracle
