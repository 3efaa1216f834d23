#include "tracelens/trace_model.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace tracelens {

namespace {

constexpr std::array<std::string_view, kPortCount> kPortNames = {
    "call",   "exit",   "fail",       "redo",        "exception",
    "newVariable", "post", "reduce",  "awake",       "entail",
    "solverFail", "choicePoint", "backTo", "label",  "solution",
};

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void inconsistent(const std::string& what) { throw DeltaInconsistent(what); }

}  // namespace

std::string_view port_name(Port p) { return kPortNames[static_cast<std::size_t>(p)]; }

std::optional<Port> port_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kPortNames.size(); ++i)
    if (kPortNames[i] == name) return static_cast<Port>(i);
  return std::nullopt;
}

bool is_byrd_port(Port p) {
  return p == Port::call || p == Port::exit || p == Port::fail || p == Port::redo ||
         p == Port::exception;
}

bool is_failure_port(Port p) {
  return p == Port::fail || p == Port::solverFail || p == Port::exception;
}

std::string_view attr_group_name(AttrGroup g) {
  switch (g) {
    case AttrGroup::port: return "port";
    case AttrGroup::chrono: return "chrono";
    case AttrGroup::depths: return "depths";
    case AttrGroup::goal: return "goal";
    case AttrGroup::delta: return "delta";
    case AttrGroup::domains: return "domains";
    case AttrGroup::constraint: return "constraint";
  }
  return "?";
}

std::optional<AttrGroup> attr_group_from_name(std::string_view name) {
  for (auto g : {AttrGroup::port, AttrGroup::chrono, AttrGroup::depths, AttrGroup::goal,
                 AttrGroup::delta, AttrGroup::domains, AttrGroup::constraint})
    if (attr_group_name(g) == name) return g;
  return std::nullopt;
}

AttrGroup attr_group_of(std::string_view key) {
  if (key == "goal" || key == "pred" || key == "solution" || key == "error") return AttrGroup::goal;
  if (key == "var" || key == "domain" || key == "removed" || key == "value") return AttrGroup::domains;
  if (key == "constraint" || key == "ctext") return AttrGroup::constraint;
  return AttrGroup::depths;
}

std::optional<std::int64_t> attr_int(const AttributeMap& attrs, std::string_view key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) return std::nullopt;
  if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
  return std::nullopt;
}

std::optional<std::string> attr_str(const AttributeMap& attrs, std::string_view key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) return std::nullopt;
  if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
  return std::nullopt;
}

std::string_view status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::open: return "open";
    case NodeStatus::proved: return "proved";
    case NodeStatus::failed: return "failed";
  }
  return "?";
}

std::optional<NodeStatus> status_from_name(std::string_view s) {
  if (s == "open") return NodeStatus::open;
  if (s == "proved") return NodeStatus::proved;
  if (s == "failed") return NodeStatus::failed;
  return std::nullopt;
}

std::string_view kind_name(SearchNodeKind k) {
  return k == SearchNodeKind::and_node ? "and" : "choicePoint";
}

std::optional<SearchNodeKind> kind_from_name(std::string_view s) {
  if (s == "and") return SearchNodeKind::and_node;
  if (s == "choicePoint") return SearchNodeKind::choice_point;
  return std::nullopt;
}

FullState make_initial_state(std::vector<std::string> goal_stack) {
  FullState s;
  s.goal_stack = std::move(goal_stack);
  s.search_tree.emplace(0, SearchNode{0, std::nullopt, SearchNodeKind::and_node, false, 1});
  s.current_node = 0;
  return s;
}

std::optional<std::string> check_invariants(const FullState& s, std::optional<Port> last_port) {
  if (!s.search_tree.contains(s.current_node))
    return "current node " + std::to_string(s.current_node) + " not in search tree";
  for (const auto& [id, c] : s.constraint_store)
    for (const auto& v : c.vars)
      if (!s.fd_vars.contains(v)) return "constraint " + std::to_string(id) + " references unknown " + v;
  bool failing = last_port && is_failure_port(*last_port);
  for (const auto& [name, d] : s.fd_vars)
    if (d.empty() && !failing) return "empty domain for " + name;
  for (const auto& [id, n] : s.proof_tree) {
    if (!n.parent) {
      if (n.depth != 1) return "proof root depth != 1";
      continue;
    }
    auto p = s.proof_tree.find(*n.parent);
    if (p == s.proof_tree.end()) return "proof node " + std::to_string(id) + " has missing parent";
    if (n.depth != p->second.depth + 1) return "proof node " + std::to_string(id) + " depth mismatch";
  }
  for (auto id : s.propagation_queue)
    if (!s.constraint_store.contains(id)) return "queued constraint " + std::to_string(id) + " not in store";
  return std::nullopt;
}

ValidationResult validate_trace(const std::vector<TraceEvent>& events, bool continuous) {
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!ids.insert(e.id).second) return {false, i, "duplicate event id " + std::to_string(e.id)};
    if (i == 0) continue;
    auto prev = events[i - 1].chrono.value;
    if (e.chrono.value <= prev) return {false, i, "chrono not increasing"};
    if (continuous && e.chrono.value != prev + 1) return {false, i, "chrono gap in continuous trace"};
  }
  return {};
}

std::string_view op_name(const DeltaOp& op) {
  static constexpr std::array<std::string_view, std::variant_size_v<DeltaOp>> names = {
      "PushGoal",   "PopGoal",     "AddProofNode",   "SetNodeStatus",    "AddSearchNode",
      "SetChoicePoint", "SetCurrentNode", "SetDomain", "NarrowDomain", "RemoveVariable",
      "AddConstraint", "RemoveConstraint", "Enqueue", "Dequeue",       "IncrSolutions"};
  return names[op.index()];
}

void apply_op(FullState& s, const DeltaOp& dop) {
  std::visit(
      overloaded{
          [&](const op::PushGoal& o) { s.goal_stack.push_back(o.goal); },
          [&](const op::PopGoal& o) {
            if (s.goal_stack.empty()) inconsistent("PopGoal on empty goal stack");
            if (s.goal_stack.back() != o.goal)
              inconsistent("PopGoal expected '" + o.goal + "' but top is '" + s.goal_stack.back() + "'");
            s.goal_stack.pop_back();
          },
          [&](const op::AddProofNode& o) {
            if (s.proof_tree.contains(o.id)) inconsistent("proof node " + std::to_string(o.id) + " exists");
            int depth = 1;
            if (o.parent) {
              auto p = s.proof_tree.find(*o.parent);
              if (p == s.proof_tree.end())
                inconsistent("proof parent " + std::to_string(*o.parent) + " missing");
              depth = p->second.depth + 1;
            }
            s.proof_tree.emplace(o.id, ProofNode{o.id, o.parent, o.goal, NodeStatus::open, depth});
          },
          [&](const op::SetNodeStatus& o) {
            auto it = s.proof_tree.find(o.id);
            if (it == s.proof_tree.end()) inconsistent("proof node " + std::to_string(o.id) + " missing");
            it->second.status = o.status;
          },
          [&](const op::AddSearchNode& o) {
            if (s.search_tree.contains(o.label))
              inconsistent("search node " + std::to_string(o.label) + " exists");
            int depth = 1;
            if (o.parent) {
              auto p = s.search_tree.find(*o.parent);
              if (p == s.search_tree.end())
                inconsistent("search parent " + std::to_string(*o.parent) + " missing");
              depth = p->second.depth + 1;
            }
            s.search_tree.emplace(o.label, SearchNode{o.label, o.parent, o.kind,
                                                      o.kind == SearchNodeKind::choice_point, depth});
          },
          [&](const op::SetChoicePoint& o) {
            auto it = s.search_tree.find(o.label);
            if (it == s.search_tree.end()) inconsistent("search node " + std::to_string(o.label) + " missing");
            it->second.open = o.open;
          },
          [&](const op::SetCurrentNode& o) {
            if (!s.search_tree.contains(o.label))
              inconsistent("current node " + std::to_string(o.label) + " missing");
            s.current_node = o.label;
          },
          [&](const op::SetDomain& o) { s.fd_vars[o.var] = o.domain; },
          [&](const op::NarrowDomain& o) {
            auto it = s.fd_vars.find(o.var);
            if (it == s.fd_vars.end()) inconsistent("variable " + o.var + " missing");
            if (!it->second.contains_all(o.removed))
              inconsistent("narrowing " + o.var + " removes values not in its domain");
            it->second = it->second.minus(o.removed);
          },
          [&](const op::RemoveVariable& o) {
            if (s.fd_vars.erase(o.var) == 0) inconsistent("variable " + o.var + " missing");
          },
          [&](const op::AddConstraint& o) {
            for (const auto& v : o.c.vars)
              if (!s.fd_vars.contains(v)) inconsistent("constraint references missing variable " + v);
            if (!s.constraint_store.emplace(o.c.id, o.c).second)
              inconsistent("constraint " + std::to_string(o.c.id) + " exists");
          },
          [&](const op::RemoveConstraint& o) {
            if (s.constraint_store.erase(o.id) == 0)
              inconsistent("constraint " + std::to_string(o.id) + " missing");
          },
          [&](const op::Enqueue& o) {
            if (!s.constraint_store.contains(o.id))
              inconsistent("enqueue of unknown constraint " + std::to_string(o.id));
            s.propagation_queue.push_back(o.id);
          },
          [&](const op::Dequeue& o) {
            if (s.propagation_queue.empty() || s.propagation_queue.front() != o.id)
              inconsistent("dequeue of " + std::to_string(o.id) + " not at queue front");
            s.propagation_queue.pop_front();
          },
          [&](const op::IncrSolutions&) { ++s.solutions; },
      },
      dop);
}

void apply_delta_in_place(FullState& state, const TraceEvent& event) {
  if (!event.delta) inconsistent("event " + std::to_string(event.chrono.value) + " carries no delta");
  if (event.chrono <= state.chrono)
    inconsistent("event chrono " + std::to_string(event.chrono.value) + " not after state chrono " +
                 std::to_string(state.chrono.value));
  for (const auto& o : event.delta->ops) apply_op(state, o);
  state.chrono = event.chrono;
}

FullState apply_delta(const FullState& state, const TraceEvent& event) {
  FullState next = state;
  apply_delta_in_place(next, event);
  return next;
}

void diff_goal_stack(const std::vector<std::string>& before, const std::vector<std::string>& after,
                     std::vector<DeltaOp>& out) {
  std::size_t common = 0;
  while (common < before.size() && common < after.size() && before[common] == after[common]) ++common;
  for (std::size_t i = before.size(); i > common; --i) out.push_back(op::PopGoal{before[i - 1]});
  for (std::size_t i = common; i < after.size(); ++i) out.push_back(op::PushGoal{after[i]});
}

void diff_queue(const std::deque<ConstraintId>& before, const std::deque<ConstraintId>& after,
                std::vector<DeltaOp>& out) {
  // Smallest k such that before[k..] is a prefix of after.
  std::size_t k = 0;
  for (; k < before.size(); ++k) {
    std::size_t rest = before.size() - k;
    if (rest <= after.size() && std::equal(before.begin() + static_cast<std::ptrdiff_t>(k), before.end(),
                                           after.begin()))
      break;
  }
  for (std::size_t i = 0; i < k; ++i) out.push_back(op::Dequeue{before[i]});
  for (std::size_t i = before.size() - k; i < after.size(); ++i) out.push_back(op::Enqueue{after[i]});
}

void diff_store(const std::map<std::string, Domain>& vars_before,
                const std::map<ConstraintId, Constraint>& store_before,
                const std::map<std::string, Domain>& vars_after,
                const std::map<ConstraintId, Constraint>& store_after, std::vector<DeltaOp>& out) {
  for (const auto& [id, c] : store_before) {
    auto it = store_after.find(id);
    if (it == store_after.end() || !(it->second == c)) out.push_back(op::RemoveConstraint{id});
  }
  for (const auto& [name, d] : vars_after) {
    auto it = vars_before.find(name);
    if (it == vars_before.end()) {
      out.push_back(op::SetDomain{name, d});
    } else if (!(it->second == d)) {
      if (it->second.contains_all(d)) out.push_back(op::NarrowDomain{name, it->second.minus(d)});
      else out.push_back(op::SetDomain{name, d});
    }
  }
  for (const auto& [id, c] : store_after) {
    auto it = store_before.find(id);
    if (it == store_before.end() || !(it->second == c)) out.push_back(op::AddConstraint{c});
  }
  for (const auto& [name, d] : vars_before)
    if (!vars_after.contains(name)) out.push_back(op::RemoveVariable{name});
}

StateDelta diff_states(const FullState& before, const FullState& after) {
  StateDelta d;
  auto& out = d.ops;
  diff_goal_stack(before.goal_stack, after.goal_stack, out);

  for (const auto& [id, n] : after.proof_tree) {
    auto it = before.proof_tree.find(id);
    if (it == before.proof_tree.end()) {
      out.push_back(op::AddProofNode{n.parent, id, n.goal});
      if (n.status != NodeStatus::open) out.push_back(op::SetNodeStatus{id, n.status});
    } else if (it->second.status != n.status) {
      out.push_back(op::SetNodeStatus{id, n.status});
    }
  }
  for (const auto& [label, n] : after.search_tree) {
    auto it = before.search_tree.find(label);
    bool default_open = n.kind == SearchNodeKind::choice_point;
    if (it == before.search_tree.end()) {
      out.push_back(op::AddSearchNode{n.parent, label, n.kind});
      if (n.open != default_open) out.push_back(op::SetChoicePoint{label, n.open});
    } else if (it->second.open != n.open) {
      out.push_back(op::SetChoicePoint{label, n.open});
    }
  }
  if (before.current_node != after.current_node) out.push_back(op::SetCurrentNode{after.current_node});

  // The queue must be drained of removed constraints before they leave the store.
  std::vector<DeltaOp> queue_ops;
  diff_queue(before.propagation_queue, after.propagation_queue, queue_ops);
  std::vector<DeltaOp> store_ops;
  diff_store(before.fd_vars, before.constraint_store, after.fd_vars, after.constraint_store, store_ops);
  for (auto& o : queue_ops)
    if (std::holds_alternative<op::Dequeue>(o)) out.push_back(std::move(o));
  for (auto& o : store_ops) out.push_back(std::move(o));
  for (auto& o : queue_ops)
    if (std::holds_alternative<op::Enqueue>(o)) out.push_back(std::move(o));

  for (auto n = before.solutions; n < after.solutions; ++n) out.push_back(op::IncrSolutions{});
  return d;
}

}  // namespace tracelens
