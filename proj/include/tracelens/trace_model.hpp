#pragma once

// Trace events, the full-state parameter vector and incremental deltas.
//
// A trace is a sequence of events e_t = (t, port, attrs, delta). An analyzer
// holding the full state at chrono t and the delta of the next event can
// rebuild the full state at that event's chrono; `apply_delta` is that
// rebuild step and `diff_states` produces a delta from two known states.

#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tracelens/domain.hpp"

namespace tracelens {

/// Logical trace time. 0 is tracer activation; a continuous trace advances
/// by exactly one per event.
struct Chrono {
  std::uint64_t value = 0;
  friend auto operator<=>(const Chrono&, const Chrono&) = default;
};

using NodeId = std::int64_t;        // proof-tree node, also the invocation number
using NodeLabel = std::int64_t;     // search-tree label
using ConstraintId = std::int64_t;

enum class Port {
  call, exit, fail, redo, exception,
  newVariable, post, reduce, awake, entail, solverFail,
  choicePoint, backTo, label, solution,
};

inline constexpr Port kAllPorts[] = {
    Port::call,   Port::exit,   Port::fail,        Port::redo,        Port::exception,
    Port::newVariable, Port::post, Port::reduce,   Port::awake,       Port::entail,
    Port::solverFail, Port::choicePoint, Port::backTo, Port::label,    Port::solution,
};
inline constexpr std::size_t kPortCount = std::size(kAllPorts);

std::string_view port_name(Port p);
std::optional<Port> port_from_name(std::string_view name);
bool is_byrd_port(Port p);
bool is_failure_port(Port p);

// ---------------------------------------------------------------------------
// Attributes carried by an event. Keys are grouped by the selectors an
// analyzer can request (see `AttrGroup`).

using AttrValue = std::variant<std::int64_t, std::string>;
using AttributeMap = std::map<std::string, AttrValue, std::less<>>;

enum class AttrGroup { port, chrono, depths, goal, delta, domains, constraint };

std::string_view attr_group_name(AttrGroup g);
std::optional<AttrGroup> attr_group_from_name(std::string_view name);
/// Group owning an attribute key; unknown keys belong to `depths`.
AttrGroup attr_group_of(std::string_view key);

std::optional<std::int64_t> attr_int(const AttributeMap& attrs, std::string_view key);
std::optional<std::string> attr_str(const AttributeMap& attrs, std::string_view key);

// ---------------------------------------------------------------------------
// Full state.

enum class NodeStatus { open, proved, failed };
enum class SearchNodeKind { and_node, choice_point };

std::string_view status_name(NodeStatus s);
std::optional<NodeStatus> status_from_name(std::string_view s);
std::string_view kind_name(SearchNodeKind k);
std::optional<SearchNodeKind> kind_from_name(std::string_view s);

struct ProofNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::string goal;
  NodeStatus status = NodeStatus::open;
  int depth = 1;
  friend bool operator==(const ProofNode&, const ProofNode&) = default;
};

struct SearchNode {
  NodeLabel label = 0;
  std::optional<NodeLabel> parent;
  SearchNodeKind kind = SearchNodeKind::and_node;
  bool open = false;  // member of dom(Sigma): has untried alternatives
  int depth = 1;
  friend bool operator==(const SearchNode&, const SearchNode&) = default;
};

struct Constraint {
  ConstraintId id = 0;
  std::string text;
  std::vector<std::string> vars;
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

struct FullState {
  Chrono chrono;
  std::vector<std::string> goal_stack;           // bottom first
  std::map<NodeId, ProofNode> proof_tree;
  std::map<NodeLabel, SearchNode> search_tree;
  std::map<std::string, Domain> fd_vars;
  std::map<ConstraintId, Constraint> constraint_store;
  std::deque<ConstraintId> propagation_queue;
  NodeLabel current_node = 0;
  std::int64_t solutions = 0;

  friend bool operator==(const FullState&, const FullState&) = default;
};

/// State with only the search-tree root, before any event.
FullState make_initial_state(std::vector<std::string> goal_stack);

/// Structural invariants; returns a description of the first violation.
std::optional<std::string> check_invariants(const FullState& s, std::optional<Port> last_port = {});

// ---------------------------------------------------------------------------
// Delta operations.

namespace op {
struct PushGoal { std::string goal; friend bool operator==(const PushGoal&, const PushGoal&) = default; };
struct PopGoal { std::string goal; friend bool operator==(const PopGoal&, const PopGoal&) = default; };
struct AddProofNode {
  std::optional<NodeId> parent;
  NodeId id = 0;
  std::string goal;
  friend bool operator==(const AddProofNode&, const AddProofNode&) = default;
};
struct SetNodeStatus {
  NodeId id = 0;
  NodeStatus status = NodeStatus::open;
  friend bool operator==(const SetNodeStatus&, const SetNodeStatus&) = default;
};
struct AddSearchNode {
  std::optional<NodeLabel> parent;
  NodeLabel label = 0;
  SearchNodeKind kind = SearchNodeKind::choice_point;
  friend bool operator==(const AddSearchNode&, const AddSearchNode&) = default;
};
struct SetChoicePoint {
  NodeLabel label = 0;
  bool open = false;
  friend bool operator==(const SetChoicePoint&, const SetChoicePoint&) = default;
};
struct SetCurrentNode { NodeLabel label = 0; friend bool operator==(const SetCurrentNode&, const SetCurrentNode&) = default; };
struct SetDomain {
  std::string var;
  Domain domain;
  friend bool operator==(const SetDomain&, const SetDomain&) = default;
};
struct NarrowDomain {
  std::string var;
  Domain removed;
  friend bool operator==(const NarrowDomain&, const NarrowDomain&) = default;
};
struct RemoveVariable { std::string var; friend bool operator==(const RemoveVariable&, const RemoveVariable&) = default; };
struct AddConstraint { Constraint c; friend bool operator==(const AddConstraint&, const AddConstraint&) = default; };
struct RemoveConstraint { ConstraintId id = 0; friend bool operator==(const RemoveConstraint&, const RemoveConstraint&) = default; };
struct Enqueue { ConstraintId id = 0; friend bool operator==(const Enqueue&, const Enqueue&) = default; };
struct Dequeue { ConstraintId id = 0; friend bool operator==(const Dequeue&, const Dequeue&) = default; };
struct IncrSolutions { friend bool operator==(const IncrSolutions&, const IncrSolutions&) = default; };
}  // namespace op

using DeltaOp = std::variant<op::PushGoal, op::PopGoal, op::AddProofNode, op::SetNodeStatus,
                             op::AddSearchNode, op::SetChoicePoint, op::SetCurrentNode,
                             op::SetDomain, op::NarrowDomain, op::RemoveVariable,
                             op::AddConstraint, op::RemoveConstraint, op::Enqueue, op::Dequeue,
                             op::IncrSolutions>;

struct StateDelta {
  std::vector<DeltaOp> ops;
  friend bool operator==(const StateDelta&, const StateDelta&) = default;
};

// ---------------------------------------------------------------------------
// Events.

/// One trace event. The chrono doubles as the event identifier on the wire,
/// so `id == chrono.value` for every event the engine emits.
struct TraceEvent {
  std::uint64_t id = 0;
  Chrono chrono;
  Port port = Port::call;
  AttributeMap attrs;
  std::optional<StateDelta> delta;   // incremental form
  std::optional<FullState> state;    // virtual form: S_{t+1} inlined
  std::vector<std::string> tags;     // sorted subscription ids

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

class DeltaInconsistent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidationResult {
  bool ok = true;
  std::size_t index = 0;
  std::string reason;
  explicit operator bool() const { return ok; }
};

ValidationResult validate_trace(const std::vector<TraceEvent>& events, bool continuous);

/// Applies one op in place. Throws DeltaInconsistent when the op references
/// something missing; `state` is then left partially updated.
void apply_op(FullState& state, const DeltaOp& op);
void apply_delta_in_place(FullState& state, const TraceEvent& event);
FullState apply_delta(const FullState& state, const TraceEvent& event);

/// Ops turning `before` into `after`, chrono excluded. Requires that `after`
/// only grows the trees and the solution counter.
StateDelta diff_states(const FullState& before, const FullState& after);

// Partial diffs, shared with the engine's backtracking.
void diff_goal_stack(const std::vector<std::string>& before, const std::vector<std::string>& after,
                     std::vector<DeltaOp>& out);
void diff_queue(const std::deque<ConstraintId>& before, const std::deque<ConstraintId>& after,
                std::vector<DeltaOp>& out);
/// Variables and constraints together so ops come out in a valid order.
void diff_store(const std::map<std::string, Domain>& vars_before,
                const std::map<ConstraintId, Constraint>& store_before,
                const std::map<std::string, Domain>& vars_after,
                const std::map<ConstraintId, Constraint>& store_after,
                std::vector<DeltaOp>& out);

std::string_view op_name(const DeltaOp& op);

}  // namespace tracelens
