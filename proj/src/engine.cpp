#include "tracelens/engine.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

namespace tracelens::clp {

namespace {

struct BuiltinError {
  std::string what;
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) == (b < 0))) ++q;
  return q;
}

std::int64_t term_min(std::int64_t a, const Domain& d) { return a > 0 ? a * d.min() : a * d.max(); }
std::int64_t term_max(std::int64_t a, const Domain& d) { return a > 0 ? a * d.max() : a * d.min(); }

struct Frame {
  enum class Kind { call, exit, exec, post, domain, choice, labeling };
  Kind kind = Kind::call;
  std::string text;

  TermPtr goal;                   // call
  std::optional<NodeId> parent;   // call
  NodeId node = 0;

  std::optional<std::string> preset_error;  // exec
  bool preset_fail = false;

  std::shared_ptr<const LinearConstraint> lc;  // post
  std::string ctext;
  std::vector<std::string> cvars;
  bool posted = false;

  std::vector<std::uint32_t> vars;  // domain
  std::int64_t lo = 0, hi = 0;

  std::vector<TermPtr> items;         // labeling
  std::vector<std::size_t> candidates;  // choice
};

struct Cell {
  Frame frame;
  std::shared_ptr<const Cell> next;
};
using Cont = std::shared_ptr<const Cell>;

struct ChoicePoint {
  NodeLabel label = 0;
  NodeId box = 0;
  bool labeling = false;
  std::vector<std::size_t> remaining;
  std::string var;
  std::int64_t value = 0;

  Cont cont;
  std::size_t trail_mark = 0;
  std::vector<std::string> goal_stack;
  std::map<std::string, Domain> fd_vars;
  std::map<ConstraintId, Constraint> store;
  std::deque<ConstraintId> queue;
  std::map<std::uint32_t, std::string> fd_of;
};

struct Reduction {
  std::string var;
  Domain domain;
  ConstraintId source = 0;
};

std::string frame_text(std::string_view kind, NodeId node) {
  return "$" + std::string(kind) + "(" + std::to_string(node) + ")";
}

std::string_view capitalised_port(Port p) {
  switch (p) {
    case Port::call: return "Call";
    case Port::exit: return "Exit";
    case Port::fail: return "Fail";
    case Port::redo: return "Redo";
    case Port::exception: return "Exception";
    default: return "";
  }
}

}  // namespace

struct Engine::Impl {
  Program program;
  Goal goal;

  std::vector<TermPtr> bindings;
  std::vector<std::uint32_t> trail;
  std::uint32_t next_var = 0;
  std::map<std::uint32_t, std::string> fd_of;

  Cont cont;
  std::vector<TermPtr> node_goal{nullptr};
  NodeId next_node = 1;
  NodeLabel next_label = 1;
  ConstraintId next_cid = 1;

  std::map<ConstraintId, LinearConstraint> linear;
  std::map<ConstraintId, std::string> ctext;
  std::map<std::string, std::vector<ConstraintId>, std::less<>> watchers;

  std::vector<ChoicePoint> choicepoints;

  bool failing = false;
  std::optional<NodeId> fail_target;
  std::optional<std::pair<std::string, ConstraintId>> pending_fail;
  std::deque<Reduction> pending_reductions;
  std::optional<ConstraintId> pending_entail;
  std::optional<std::pair<std::string, std::int64_t>> pending_label;

  // scratch for the event being built
  TraceEvent event;
};

// ---------------------------------------------------------------------------

const std::vector<OsRule>& rule_table() {
  static const std::vector<OsRule> table = {
      {Port::solverFail, "solverFail", "var", &Engine::cond_solver_fail, &Engine::do_solver_fail},
      {Port::backTo, "backTo", "node", &Engine::cond_back_to, &Engine::do_back_to},
      {Port::entail, "entail", "constraint", &Engine::cond_entail, &Engine::do_entail},
      {Port::reduce, "reduce", "var", &Engine::cond_reduce, &Engine::do_reduce},
      {Port::awake, "awake", "constraint", &Engine::cond_awake, &Engine::do_awake},
      {Port::post, "post", "", &Engine::cond_post, &Engine::do_post},
      {Port::newVariable, "newVariable", "", &Engine::cond_new_variable, &Engine::do_new_variable},
      {Port::exit, "builtin", "", &Engine::cond_builtin, &Engine::do_builtin},
      {Port::call, "call", "", &Engine::cond_call, &Engine::do_call},
      {Port::exit, "exit", "", &Engine::cond_exit, &Engine::do_exit},
      {Port::redo, "redo", "invocation", &Engine::cond_redo, &Engine::do_redo},
      {Port::fail, "fail", "", &Engine::cond_fail, &Engine::do_fail},
      {Port::choicePoint, "choicePoint", "", &Engine::cond_choice_point, &Engine::do_choice_point},
      {Port::label, "label", "value", &Engine::cond_label, &Engine::do_label},
      {Port::solution, "solution", "", &Engine::cond_solution, &Engine::do_solution},
  };
  return table;
}

namespace {

void bind(Engine::Impl& I, std::uint32_t v, TermPtr t) {
  if (I.bindings.size() <= v) I.bindings.resize(v + 1);
  I.bindings[v] = std::move(t);
  I.trail.push_back(v);
}

void undo_to(Engine::Impl& I, std::size_t mark) {
  while (I.trail.size() > mark) {
    I.bindings[I.trail.back()] = nullptr;
    I.trail.pop_back();
  }
}

void flatten_goals(const TermPtr& t, std::vector<TermPtr>& out) {
  if (t->is(",", 2)) {
    flatten_goals(t->args[0], out);
    flatten_goals(t->args[1], out);
  } else if (!t->is("true", 0)) {
    out.push_back(t);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Engine plumbing.

Engine::Engine(Program program, const Goal& goal, EngineOptions options)
    : options_(options), impl_(std::make_unique<Impl>()) {
  auto& I = *impl_;
  I.program = std::move(program);
  I.goal = goal;
  I.next_var = static_cast<std::uint32_t>(goal.var_names.size());
  I.bindings.resize(I.next_var);
  auto top = make_compound("$call$", {goal.term});
  Frame f;
  f.kind = Frame::Kind::call;
  f.goal = top;
  f.text = options_.tracing ? write_term(top, *this) : std::string();
  state_ = make_initial_state({f.text});
  I.cont = std::make_shared<Cell>(Cell{std::move(f), nullptr});
}

Engine::~Engine() = default;

const LinearConstraint* Engine::linear(ConstraintId id) const {
  auto it = impl_->linear.find(id);
  return it == impl_->linear.end() ? nullptr : &it->second;
}

TermPtr Engine::deref(const TermPtr& t0) const {
  const auto& I = *impl_;
  TermPtr t = t0;
  while (t->is_var()) {
    if (t->var < I.bindings.size() && I.bindings[t->var]) {
      t = I.bindings[t->var];
      continue;
    }
    auto fd = I.fd_of.find(t->var);
    if (fd != I.fd_of.end()) {
      auto d = state_.fd_vars.find(fd->second);
      if (d != state_.fd_vars.end() && d->second.is_singleton()) return make_int(d->second.min());
    }
    break;
  }
  return t;
}

std::string Engine::var_name(std::uint32_t var) const {
  const auto& names = impl_->goal.var_names;
  if (var < names.size() && names[var] != "_") return names[var];
  return "_" + std::to_string(var);
}

namespace {

/// Internal operations shared by the rule effects.
struct EngineAccess {
  Engine& e;
  Engine::Impl& I;
  FullState& S;
  bool tracing;

  std::string text(const TermPtr& t) const { return tracing ? write_term(t, e) : std::string(); }

  void emit(DeltaOp op) {
    apply_op(S, op);
    if (tracing) I.event.delta->ops.push_back(std::move(op));
  }
  void attr(const std::string& key, AttrValue v) {
    if (tracing) I.event.attrs[key] = std::move(v);
  }

  const Frame* top() const { return I.cont ? &I.cont->frame : nullptr; }

  void push(Frame f) {
    emit(op::PushGoal{f.text});
    I.cont = std::make_shared<Cell>(Cell{std::move(f), I.cont});
  }
  Frame pop() {
    Frame f = I.cont->frame;
    emit(op::PopGoal{f.text});
    I.cont = I.cont->next;
    return f;
  }
  /// Replaces the top frame in place; its goal-stack text is unchanged.
  void replace_top(Frame f) { I.cont = std::make_shared<Cell>(Cell{std::move(f), I.cont->next}); }

  void push_call(const TermPtr& goal, NodeId parent) {
    Frame f;
    f.kind = Frame::Kind::call;
    f.goal = goal;
    f.parent = parent;
    f.text = text(goal);
    push(std::move(f));
  }
  void push_marker(Frame::Kind kind, NodeId node, std::string_view label) {
    Frame f;
    f.kind = kind;
    f.node = node;
    f.text = tracing ? frame_text(label, node) : std::string();
    push(std::move(f));
  }
  /// Pushes `Exit(node)` then the goals so the first goal ends up on top.
  void push_body(NodeId node, const std::vector<TermPtr>& goals) {
    push_marker(Frame::Kind::exit, node, "exit");
    for (auto it = goals.rbegin(); it != goals.rend(); ++it) push_call(*it, node);
  }

  bool is_fd(std::uint32_t v) const { return I.fd_of.contains(v); }

  bool unify(const TermPtr& a0, const TermPtr& b0) {
    auto a = e.deref(a0);
    auto b = e.deref(b0);
    if (a->is_var() && b->is_var() && a->var == b->var) return true;
    if (a->is_var() && !is_fd(a->var)) {
      bind(I, a->var, b);
      return true;
    }
    if (b->is_var() && !is_fd(b->var)) {
      bind(I, b->var, a);
      return true;
    }
    if (a->is_var() || b->is_var()) {
      // at least one side is an unfixed FD variable
      if (a->is_var() && b->is_var()) throw BuiltinError{"instantiation_error"};
      const auto& fd = a->is_var() ? a : b;
      const auto& other = a->is_var() ? b : a;
      if (!other->is_int()) return false;
      const auto& dom = S.fd_vars.at(I.fd_of.at(fd->var));
      if (!dom.contains(other->value)) return false;
      throw BuiltinError{"instantiation_error"};
    }
    if (a->kind != b->kind) return false;
    switch (a->kind) {
      case Term::Kind::integer: return a->value == b->value;
      case Term::Kind::atom: return a->name == b->name;
      case Term::Kind::compound:
        if (a->name != b->name || a->args.size() != b->args.size()) return false;
        for (std::size_t i = 0; i < a->args.size(); ++i)
          if (!unify(a->args[i], b->args[i])) return false;
        return true;
      case Term::Kind::var: break;
    }
    return false;
  }

  std::int64_t eval(const TermPtr& t0) {
    auto t = e.deref(t0);
    if (t->is_int()) return t->value;
    if (t->is_var()) throw BuiltinError{"instantiation_error"};
    if (t->is_compound() && t->args.size() == 1) {
      auto x = eval(t->args[0]);
      if (t->name == "-") return -x;
      if (t->name == "+") return x;
      if (t->name == "abs") return x < 0 ? -x : x;
    }
    if (t->is_compound() && t->args.size() == 2) {
      auto x = eval(t->args[0]);
      auto y = eval(t->args[1]);
      const auto& n = t->name;
      if (n == "+") return x + y;
      if (n == "-") return x - y;
      if (n == "*") return x * y;
      if (n == "min") return std::min(x, y);
      if (n == "max") return std::max(x, y);
      if (n == "//" || n == "/" || n == "mod" || n == "rem") {
        if (y == 0) throw BuiltinError{"evaluation_error(zero_divisor)"};
        if (n == "mod") return x - floor_div(x, y) * y;
        if (n == "rem") return x % y;
        return x / y;
      }
    }
    throw BuiltinError{"type_error(evaluable," + indicator(t->name, t->args.size()) + ")"};
  }

  /// Unification that is undone afterwards; errors count as "no".
  bool unifiable(const TermPtr& a, const TermPtr& b) {
    auto mark = I.trail.size();
    bool ok = false;
    try {
      ok = unify(a, b);
    } catch (const BuiltinError&) {
      undo_to(I, mark);
      throw;
    }
    undo_to(I, mark);
    return ok;
  }

  std::optional<std::vector<TermPtr>> list_items(const TermPtr& t0) {
    std::vector<TermPtr> items;
    auto t = e.deref(t0);
    while (t->is(".", 2)) {
      items.push_back(t->args[0]);
      t = e.deref(t->args[1]);
    }
    if (!t->is("[]", 0)) return std::nullopt;
    return items;
  }

  void linearize(const TermPtr& t0, std::int64_t k, std::vector<std::pair<std::int64_t, std::string>>& terms,
                 std::int64_t& c) {
    auto t = e.deref(t0);
    if (t->is_int()) {
      c += k * t->value;
      return;
    }
    if (t->is_var()) {
      auto fd = I.fd_of.find(t->var);
      if (fd == I.fd_of.end()) throw BuiltinError{"instantiation_error"};
      for (auto& [a, v] : terms)
        if (v == fd->second) {
          a += k;
          return;
        }
      terms.emplace_back(k, fd->second);
      return;
    }
    if (t->is("+", 2)) {
      linearize(t->args[0], k, terms, c);
      linearize(t->args[1], k, terms, c);
      return;
    }
    if (t->is("-", 2)) {
      linearize(t->args[0], k, terms, c);
      linearize(t->args[1], -k, terms, c);
      return;
    }
    if (t->is("-", 1)) {
      linearize(t->args[0], -k, terms, c);
      return;
    }
    if (t->is("*", 2)) {
      auto l = e.deref(t->args[0]);
      auto r = e.deref(t->args[1]);
      if (l->is_int()) return linearize(r, k * l->value, terms, c);
      if (r->is_int()) return linearize(l, k * r->value, terms, c);
    }
    throw BuiltinError{"type_error(linear_expression)"};
  }

  LinearConstraint build_constraint(const TermPtr& c0) {
    auto c = e.deref(c0);
    if (!c->is_compound() || c->args.size() != 2) throw BuiltinError{"type_error(constraint)"};
    std::string_view rel = c->name;
    if (!rel.empty() && rel[0] == '#') rel.remove_prefix(1);
    LinearConstraint lc;
    auto lhs = c->args[0], rhs = c->args[1];
    bool flip = false;
    if (rel == "=") {
      lc.rel = LinearRel::eq;
    } else if (rel == "\\=") {
      lc.rel = LinearRel::ne;
    } else if (rel == "=<" || rel == "<") {
      lc.rel = LinearRel::le;
    } else if (rel == ">=" || rel == ">") {
      lc.rel = LinearRel::le;
      flip = true;
    } else {
      throw BuiltinError{"domain_error(constraint," + c->name + ")"};
    }
    if (flip) std::swap(lhs, rhs);
    linearize(lhs, 1, lc.terms, lc.constant);
    linearize(rhs, -1, lc.terms, lc.constant);
    if (rel == "<" || rel == ">") lc.constant += 1;
    std::erase_if(lc.terms, [](const auto& p) { return p.first == 0; });
    return lc;
  }

  std::string fd_name_of(const TermPtr& t0) const {
    auto t = e.deref(t0);
    if (!t->is_var()) return {};
    auto it = I.fd_of.find(t->var);
    return it == I.fd_of.end() ? std::string() : it->second;
  }

  void enqueue_watchers(const std::string& var, std::optional<ConstraintId> except) {
    auto w = I.watchers.find(var);
    if (w == I.watchers.end()) return;
    std::vector<ConstraintId> ids = w->second;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (auto id : ids) {
      if (except && id == *except) continue;
      if (!S.constraint_store.contains(id)) continue;
      if (std::find(S.propagation_queue.begin(), S.propagation_queue.end(), id) != S.propagation_queue.end())
        continue;
      emit(op::Enqueue{id});
    }
  }

  NodeId innermost_box() const {
    for (auto c = I.cont; c; c = c->next)
      if (c->frame.kind != Frame::Kind::call) return c->frame.node;
    return 1;
  }

  bool ancestor_or_self(NodeId a, NodeId b) const {
    std::optional<NodeId> n = b;
    while (n) {
      if (*n == a) return true;
      n = S.proof_tree.at(*n).parent;
    }
    return false;
  }

  bool fail_done() const {
    if (!I.fail_target) return true;
    if (S.proof_tree.at(*I.fail_target).status != NodeStatus::open) return true;
    return !I.choicepoints.empty() && ancestor_or_self(*I.fail_target, I.choicepoints.back().box);
  }

  std::optional<NodeId> outermost_proved_on_path() const {
    if (I.choicepoints.empty()) return std::nullopt;
    std::optional<NodeId> found;
    std::optional<NodeId> n = I.choicepoints.back().box;
    while (n) {
      const auto& node = S.proof_tree.at(*n);
      if (node.status == NodeStatus::proved) found = *n;
      n = node.parent;
    }
    return found;
  }

  bool idle() const {
    return !I.failing && !I.pending_fail && I.pending_reductions.empty() && !I.pending_entail &&
           !I.pending_label && S.propagation_queue.empty();
  }

  std::optional<std::string> first_unfixed(const Frame& f) const {
    for (const auto& item : f.items) {
      auto name = fd_name_of(item);
      if (!name.empty()) return name;
    }
    return std::nullopt;
  }

  bool frame_ready(const Frame& f) const {
    switch (f.kind) {
      case Frame::Kind::exec: return true;
      case Frame::Kind::domain: return f.vars.empty();
      case Frame::Kind::post: return f.posted;
      case Frame::Kind::labeling: return !first_unfixed(f);
      default: return false;
    }
  }

  void byrd_attrs(NodeId id) {
    if (!tracing) return;
    const auto& node = S.proof_tree.at(id);
    const auto& g = e.deref(I.node_goal[id]);
    attr("invocation", id);
    attr("depth", node.depth);
    attr("goal", text(g));
    if (g->is_callable()) attr("pred", indicator(g->name, g->args.size()));
  }

  void set_status(NodeId id, NodeStatus s) { emit(op::SetNodeStatus{id, s}); }

  void start_failing(std::optional<NodeId> target) {
    I.failing = true;
    I.fail_target = target;
  }

  void apply_clause(NodeId node, std::size_t index) {
    const auto& clause = I.program.clauses()[index];
    auto offset = I.next_var;
    I.next_var += clause.var_count;
    I.bindings.resize(I.next_var);
    auto head = rename(clause.head, offset);
    if (!unify(head, I.node_goal[node])) throw std::logic_error("clause candidate no longer unifies");
    std::vector<TermPtr> body;
    body.reserve(clause.body.size());
    for (const auto& g : clause.body) flatten_goals(rename(g, offset), body);
    push_body(node, body);
  }

  void save_choicepoint(ChoicePoint cp) {
    cp.cont = I.cont;
    cp.trail_mark = I.trail.size();
    cp.goal_stack = S.goal_stack;
    cp.fd_vars = S.fd_vars;
    cp.store = S.constraint_store;
    cp.queue = S.propagation_queue;
    cp.fd_of = I.fd_of;
    emit(op::AddSearchNode{S.current_node, cp.label, SearchNodeKind::choice_point});
    emit(op::SetCurrentNode{cp.label});
    I.choicepoints.push_back(std::move(cp));
  }

  struct Propagation {
    std::vector<std::pair<std::string, Domain>> narrowed;
    bool entailed = false;
    std::optional<std::string> fail_var;
  };

  Propagation propagate(const LinearConstraint& lc) const {
    Propagation out;
    std::vector<Domain> dom;
    dom.reserve(lc.terms.size());
    for (const auto& [a, v] : lc.terms) dom.push_back(S.fd_vars.at(v));
    auto n = lc.terms.size();

    auto bound_le = [&](std::int64_t sign) -> std::optional<std::size_t> {
      std::int64_t c = sign * lc.constant;
      std::int64_t total_min = 0;
      for (std::size_t i = 0; i < n; ++i) total_min += term_min(sign * lc.terms[i].first, dom[i]);
      for (std::size_t i = 0; i < n; ++i) {
        auto a = sign * lc.terms[i].first;
        auto rhs = -c - (total_min - term_min(a, dom[i]));
        dom[i] = a > 0 ? dom[i].restrict_max(floor_div(rhs, a)) : dom[i].restrict_min(ceil_div(rhs, a));
        if (dom[i].empty()) return i;
      }
      return std::nullopt;
    };

    auto unfixed = [&] {
      std::size_t count = 0, last = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (!dom[i].is_singleton()) {
          ++count;
          last = i;
        }
      return std::pair{count, last};
    };

    while (true) {
      auto before = dom;
      std::optional<std::size_t> emptied;
      switch (lc.rel) {
        case LinearRel::le: emptied = bound_le(1); break;
        case LinearRel::eq:
          emptied = bound_le(1);
          if (!emptied) emptied = bound_le(-1);
          break;
        case LinearRel::ne: {
          auto [count, i] = unfixed();
          if (count == 1) {
            std::int64_t rest = lc.constant;
            for (std::size_t j = 0; j < n; ++j)
              if (j != i) rest += lc.terms[j].first * dom[j].min();
            auto a = lc.terms[i].first;
            if (rest % a == 0) dom[i] = dom[i].remove(-rest / a);
            if (dom[i].empty()) emptied = i;
          }
          break;
        }
      }
      if (emptied) {
        out.fail_var = lc.terms[*emptied].second;
        return out;
      }
      if (dom == before) break;
    }

    std::int64_t lo = lc.constant, hi = lc.constant;
    for (std::size_t i = 0; i < n; ++i) {
      lo += term_min(lc.terms[i].first, dom[i]);
      hi += term_max(lc.terms[i].first, dom[i]);
    }
    auto [count, last] = unfixed();
    bool feasible = true;
    switch (lc.rel) {
      case LinearRel::le:
        feasible = lo <= 0;
        out.entailed = hi <= 0;
        break;
      case LinearRel::eq:
        feasible = lo <= 0 && hi >= 0;
        out.entailed = count == 0;
        break;
      case LinearRel::ne:
        feasible = !(count == 0 && lo == 0);
        out.entailed = lo > 0 || hi < 0 || count <= 1;
        break;
    }
    if (!feasible) {
      out.fail_var = n ? lc.terms[0].second : std::string();
      return out;
    }
    (void)last;
    for (std::size_t i = 0; i < n; ++i)
      if (!(dom[i] == S.fd_vars.at(lc.terms[i].second))) out.narrowed.emplace_back(lc.terms[i].second, dom[i]);
    return out;
  }
};

}  // namespace

#define ACCESS EngineAccess A{*this, *impl_, state_, options_.tracing}

// ---------------------------------------------------------------------------
// Conditions.

bool Engine::cond_solver_fail() const { return impl_->pending_fail.has_value(); }

bool Engine::cond_back_to() const {
  auto& self = const_cast<Engine&>(*this);
  EngineAccess A{self, *self.impl_, self.state_, options_.tracing};
  return impl_->failing && A.fail_done() && !impl_->choicepoints.empty() && !A.outermost_proved_on_path();
}

bool Engine::cond_entail() const {
  const auto& I = *impl_;
  return !I.failing && !I.pending_fail && I.pending_reductions.empty() && I.pending_entail.has_value();
}

bool Engine::cond_reduce() const {
  const auto& I = *impl_;
  return !I.failing && !I.pending_fail && !I.pending_reductions.empty();
}

bool Engine::cond_awake() const {
  const auto& I = *impl_;
  return !I.failing && !I.pending_fail && I.pending_reductions.empty() && !I.pending_entail &&
         !I.pending_label && !state_.propagation_queue.empty();
}

namespace {
template <class F>
bool with_idle_top(const Engine& e, Engine::Impl& I, FullState& S, bool tracing, F&& f) {
  EngineAccess A{const_cast<Engine&>(e), I, S, tracing};
  if (!A.idle() || !A.top()) return false;
  return f(A, *A.top());
}
}  // namespace

#define IDLE_TOP(body)                                                                              \
  with_idle_top(*this, *impl_, const_cast<FullState&>(state_), options_.tracing,                    \
                [&](EngineAccess& A, const Frame& f) { (void)A; return body; })

bool Engine::cond_post() const { return IDLE_TOP(f.kind == Frame::Kind::post && !f.posted); }

bool Engine::cond_new_variable() const { return IDLE_TOP(f.kind == Frame::Kind::domain && !f.vars.empty()); }

bool Engine::cond_builtin() const { return IDLE_TOP(A.frame_ready(f)); }

bool Engine::cond_call() const { return IDLE_TOP(f.kind == Frame::Kind::call); }

bool Engine::cond_exit() const { return IDLE_TOP(f.kind == Frame::Kind::exit); }

bool Engine::cond_redo() const {
  auto& self = const_cast<Engine&>(*this);
  EngineAccess A{self, *self.impl_, self.state_, options_.tracing};
  return impl_->failing && A.fail_done() && A.outermost_proved_on_path().has_value();
}

bool Engine::cond_fail() const {
  auto& self = const_cast<Engine&>(*this);
  EngineAccess A{self, *self.impl_, self.state_, options_.tracing};
  return impl_->failing && !A.fail_done();
}

bool Engine::cond_choice_point() const {
  return IDLE_TOP(f.kind == Frame::Kind::choice ||
                  (f.kind == Frame::Kind::labeling && A.first_unfixed(f).has_value()));
}

bool Engine::cond_label() const { return !impl_->failing && impl_->pending_label.has_value(); }

bool Engine::cond_solution() const {
  EngineAccess A{const_cast<Engine&>(*this), *impl_, const_cast<FullState&>(state_), options_.tracing};
  return A.idle() && !impl_->cont;
}

bool Engine::terminal() const {
  auto& self = const_cast<Engine&>(*this);
  EngineAccess A{self, *self.impl_, self.state_, options_.tracing};
  return impl_->failing && A.fail_done() && impl_->choicepoints.empty();
}

std::vector<const OsRule*> Engine::applicable_rules() const {
  if (terminal()) throw NoRuleApplicable("terminal state at chrono " + std::to_string(state_.chrono.value));
  std::vector<const OsRule*> out;
  for (const auto& r : rule_table())
    if ((this->*r.condition)()) out.push_back(&r);
  if (out.empty()) throw NoRuleApplicable("no rule applies at chrono " + std::to_string(state_.chrono.value));
  return out;
}

TraceEvent Engine::step() {
  const OsRule* rule = nullptr;
  if (terminal()) throw NoRuleApplicable("terminal state at chrono " + std::to_string(state_.chrono.value));
  for (const auto& r : rule_table())
    if ((this->*r.condition)()) {
      rule = &r;
      break;
    }
  if (!rule) throw NoRuleApplicable("no rule applies at chrono " + std::to_string(state_.chrono.value));

  struct Guard {
    bool& flag;
    ~Guard() { flag = false; }
  } guard{in_step_};
  in_step_ = true;

  auto& ev = impl_->event;
  ev = TraceEvent{};
  state_.chrono.value += 1;
  ev.chrono = state_.chrono;
  ev.id = state_.chrono.value;
  ev.port = rule->port;
  if (options_.tracing) ev.delta.emplace();
  (this->*rule->effect)();
  if (options_.tracing) ev.attrs["search_depth"] = std::int64_t{state_.search_tree.at(state_.current_node).depth};
  return std::move(ev);
}

FullState Engine::snapshot() const {
  if (in_step_) throw NotAtBoundary("snapshot requested in the middle of a step");
  return state_;
}

// ---------------------------------------------------------------------------
// Effects.

void Engine::do_solver_fail() {
  ACCESS;
  auto [var, cid] = *impl_->pending_fail;
  A.attr("var", var);
  A.attr("constraint", cid);
  impl_->pending_fail.reset();
  impl_->pending_reductions.clear();
  impl_->pending_entail.reset();
  while (!state_.propagation_queue.empty()) A.emit(op::Dequeue{state_.propagation_queue.front()});
  A.start_failing(A.innermost_box());
}

void Engine::do_back_to() {
  ACCESS;
  auto& I = *impl_;
  auto& cp = I.choicepoints.back();
  A.attr("node", cp.label);
  A.attr("kind", std::string(cp.labeling ? "labeling" : "clause"));

  std::vector<DeltaOp> ops;
  diff_goal_stack(state_.goal_stack, cp.goal_stack, ops);
  ops.push_back(op::SetCurrentNode{cp.label});
  diff_queue(state_.propagation_queue, cp.queue, ops);
  diff_store(state_.fd_vars, state_.constraint_store, cp.fd_vars, cp.store, ops);
  for (auto& o : ops) A.emit(std::move(o));
  undo_to(I, cp.trail_mark);
  I.cont = cp.cont;
  I.fd_of = cp.fd_of;
  I.failing = false;
  I.fail_target.reset();

  NodeId box = cp.box;
  NodeLabel label = cp.label;
  if (cp.labeling) {
    auto var = cp.var;
    auto value = cp.value;
    I.choicepoints.pop_back();
    A.emit(op::SetChoicePoint{label, false});
    A.attr("alternatives", std::int64_t{0});
    A.emit(op::NarrowDomain{var, Domain::singleton(value)});
    A.enqueue_watchers(var, std::nullopt);
    return;
  }
  auto index = cp.remaining.front();
  cp.remaining.erase(cp.remaining.begin());
  A.attr("alternatives", static_cast<std::int64_t>(cp.remaining.size()));
  if (cp.remaining.empty()) {
    I.choicepoints.pop_back();
    A.emit(op::SetChoicePoint{label, false});
  }
  A.apply_clause(box, index);
}

void Engine::do_entail() {
  ACCESS;
  auto cid = *impl_->pending_entail;
  impl_->pending_entail.reset();
  A.attr("constraint", cid);
  A.attr("ctext", impl_->ctext[cid]);
  A.emit(op::RemoveConstraint{cid});
}

void Engine::do_reduce() {
  ACCESS;
  auto r = std::move(impl_->pending_reductions.front());
  impl_->pending_reductions.pop_front();
  const auto& old = state_.fd_vars.at(r.var);
  auto removed = old.minus(r.domain);
  A.attr("var", r.var);
  A.attr("domain", r.domain.to_string());
  A.attr("removed", removed.to_string());
  A.attr("constraint", r.source);
  A.emit(op::NarrowDomain{r.var, std::move(removed)});
  A.enqueue_watchers(r.var, r.source);
}

void Engine::do_awake() {
  ACCESS;
  auto& I = *impl_;
  auto cid = state_.propagation_queue.front();
  A.emit(op::Dequeue{cid});
  A.attr("constraint", cid);
  A.attr("ctext", I.ctext[cid]);
  auto result = A.propagate(I.linear.at(cid));
  if (result.fail_var) {
    I.pending_fail = std::pair{*result.fail_var, cid};
    return;
  }
  for (auto& [var, dom] : result.narrowed) I.pending_reductions.push_back(Reduction{var, std::move(dom), cid});
  if (result.entailed) I.pending_entail = cid;
}

void Engine::do_post() {
  ACCESS;
  auto& I = *impl_;
  Frame f = *A.top();
  auto cid = I.next_cid++;
  I.linear.emplace(cid, *f.lc);
  I.ctext.emplace(cid, f.ctext);
  for (const auto& v : f.cvars) I.watchers[v].push_back(cid);
  A.attr("constraint", cid);
  A.attr("ctext", f.ctext);
  A.emit(op::AddConstraint{Constraint{cid, f.ctext, f.cvars}});
  A.emit(op::Enqueue{cid});
  f.posted = true;
  A.replace_top(std::move(f));
}

void Engine::do_new_variable() {
  ACCESS;
  auto& I = *impl_;
  Frame f = *A.top();
  auto v = f.vars.front();
  f.vars.erase(f.vars.begin());
  auto name = var_name(v);
  auto dom = Domain::range(f.lo, f.hi);
  I.fd_of[v] = name;
  A.attr("var", name);
  A.attr("domain", dom.to_string());
  A.emit(op::SetDomain{name, std::move(dom)});
  A.replace_top(std::move(f));
}

void Engine::do_builtin() {
  ACCESS;
  auto& I = *impl_;
  Frame f = A.pop();
  NodeId id = f.node;
  enum class Outcome { exit, fail, error } outcome = Outcome::exit;
  std::string error;
  if (f.kind == Frame::Kind::exec) {
    if (f.preset_error) {
      outcome = Outcome::error;
      error = *f.preset_error;
    } else if (f.preset_fail) {
      outcome = Outcome::fail;
    } else {
      auto g = deref(I.node_goal[id]);
      try {
        bool ok = true;
        const auto& n = g->name;
        if (g->is("=", 2)) {
          ok = A.unify(g->args[0], g->args[1]);
        } else if (g->is("\\=", 2)) {
          ok = !A.unifiable(g->args[0], g->args[1]);
        } else if (g->is("is", 2)) {
          ok = A.unify(g->args[0], make_int(A.eval(g->args[1])));
        } else if (g->args.size() == 2 && (n == "<" || n == ">" || n == "=<" || n == ">=" || n == "=:=" ||
                                             n == "=\\=")) {
          auto x = A.eval(g->args[0]);
          auto y = A.eval(g->args[1]);
          ok = n == "<" ? x < y : n == ">" ? x > y : n == "=<" ? x <= y : n == ">=" ? x >= y
               : n == "=:=" ? x == y : x != y;
        } else if (g->is("fail", 0) || g->is("false", 0)) {
          ok = false;
        }
        outcome = ok ? Outcome::exit : Outcome::fail;
      } catch (const BuiltinError& err) {
        outcome = Outcome::error;
        error = err.what;
      }
    }
  }
  switch (outcome) {
    case Outcome::exit:
      I.event.port = Port::exit;
      A.set_status(id, NodeStatus::proved);
      break;
    case Outcome::fail:
      I.event.port = Port::fail;
      A.set_status(id, NodeStatus::failed);
      A.start_failing(state_.proof_tree.at(id).parent);
      break;
    case Outcome::error:
      I.event.port = Port::exception;
      A.set_status(id, NodeStatus::failed);
      A.attr("error", error);
      A.start_failing(state_.proof_tree.at(id).parent);
      break;
  }
  A.byrd_attrs(id);
}

void Engine::do_call() {
  ACCESS;
  auto& I = *impl_;
  Frame f = A.pop();
  auto g = deref(f.goal);
  NodeId id = I.next_node++;
  I.node_goal.push_back(g);
  A.emit(op::AddProofNode{f.parent, id, A.text(g)});
  A.byrd_attrs(id);

  auto exec_error = [&](std::string what) {
    Frame x;
    x.kind = Frame::Kind::exec;
    x.node = id;
    x.preset_error = std::move(what);
    x.text = options_.tracing ? frame_text("exec", id) : std::string();
    A.push(std::move(x));
  };
  auto exec_fail = [&] {
    Frame x;
    x.kind = Frame::Kind::exec;
    x.node = id;
    x.preset_fail = true;
    x.text = options_.tracing ? frame_text("exec", id) : std::string();
    A.push(std::move(x));
  };

  if (g->is_var()) return exec_error("instantiation_error");
  if (!g->is_callable()) return exec_error("type_error(callable)");

  const auto arity = g->args.size();
  if (g->is("$call$", 1) || g->is(",", 2)) {
    std::vector<TermPtr> body;
    flatten_goals(g->is(",", 2) ? g : g->args[0], body);
    A.push_body(id, body);
    return;
  }

  if (g->is("fd_domain", 3)) {
    try {
      auto lo = A.eval(g->args[1]);
      auto hi = A.eval(g->args[2]);
      auto items = A.list_items(g->args[0]);
      if (!items) items = std::vector<TermPtr>{g->args[0]};
      Frame d;
      d.kind = Frame::Kind::domain;
      d.node = id;
      d.lo = lo;
      d.hi = hi;
      bool fails = lo > hi;
      for (const auto& item : *items) {
        auto t = deref(item);
        if (t->is_int()) {
          fails = fails || t->value < lo || t->value > hi;
        } else if (t->is_var()) {
          if (A.is_fd(t->var)) return exec_error("permission_error(constrain,fd_variable," + var_name(t->var) + ")");
          if (std::find(d.vars.begin(), d.vars.end(), t->var) == d.vars.end()) d.vars.push_back(t->var);
        } else {
          return exec_error("type_error(integer)");
        }
      }
      if (fails) return exec_fail();
      d.text = options_.tracing ? frame_text("domain", id) : std::string();
      A.push(std::move(d));
    } catch (const BuiltinError& err) {
      exec_error(err.what);
    }
    return;
  }

  if (g->is("fd_post", 1)) {
    try {
      auto lc = A.build_constraint(g->args[0]);
      Frame p;
      p.kind = Frame::Kind::post;
      p.node = id;
      for (const auto& [a, v] : lc.terms) p.cvars.push_back(v);
      p.lc = std::make_shared<const LinearConstraint>(std::move(lc));
      p.ctext = A.text(g->args[0]);
      p.text = options_.tracing ? frame_text("post", id) : std::string();
      A.push(std::move(p));
    } catch (const BuiltinError& err) {
      exec_error(err.what);
    }
    return;
  }

  if (g->is("fd_labeling", 1)) {
    auto items = A.list_items(g->args[0]);
    if (!items) return exec_error("type_error(list)");
    for (const auto& item : *items) {
      auto t = deref(item);
      if (t->is_int()) continue;
      if (!t->is_var() || !A.is_fd(t->var)) return exec_error("instantiation_error");
    }
    Frame l;
    l.kind = Frame::Kind::labeling;
    l.node = id;
    l.items = std::move(*items);
    l.text = options_.tracing ? frame_text("labeling", id) : std::string();
    A.push(std::move(l));
    return;
  }

  if (is_builtin(g->name, arity)) {
    A.push_marker(Frame::Kind::exec, id, "exec");
    return;
  }

  if (!I.program.defines(g->name, arity))
    return exec_error("existence_error(procedure," + indicator(g->name, arity) + ")");

  std::vector<std::size_t> candidates;
  try {
    for (auto index : I.program.clauses_for(g->name, arity)) {
      const auto& clause = I.program.clauses()[index];
      auto head = rename(clause.head, I.next_var);
      I.bindings.resize(std::max<std::size_t>(I.bindings.size(), I.next_var + clause.var_count));
      if (A.unifiable(head, g)) candidates.push_back(index);
    }
  } catch (const BuiltinError& err) {
    return exec_error(err.what);
  }
  if (candidates.empty()) {
    A.start_failing(id);
  } else if (candidates.size() == 1) {
    A.apply_clause(id, candidates.front());
  } else {
    Frame c;
    c.kind = Frame::Kind::choice;
    c.node = id;
    c.candidates = std::move(candidates);
    c.text = options_.tracing ? frame_text("choice", id) : std::string();
    A.push(std::move(c));
  }
}

void Engine::do_exit() {
  ACCESS;
  Frame f = A.pop();
  A.set_status(f.node, NodeStatus::proved);
  A.byrd_attrs(f.node);
}

void Engine::do_redo() {
  ACCESS;
  auto id = *A.outermost_proved_on_path();
  A.set_status(id, NodeStatus::open);
  A.byrd_attrs(id);
}

void Engine::do_fail() {
  ACCESS;
  auto id = *impl_->fail_target;
  A.set_status(id, NodeStatus::failed);
  A.byrd_attrs(id);
  impl_->fail_target = state_.proof_tree.at(id).parent;
}

void Engine::do_choice_point() {
  ACCESS;
  auto& I = *impl_;
  const Frame& top = *A.top();
  ChoicePoint cp;
  cp.label = I.next_label++;
  cp.box = top.node;
  A.attr("node", cp.label);
  A.attr("invocation", cp.box);
  if (top.kind == Frame::Kind::labeling) {
    auto var = *A.first_unfixed(top);
    auto value = state_.fd_vars.at(var).min();
    cp.labeling = true;
    cp.var = var;
    cp.value = value;
    A.attr("kind", std::string("labeling"));
    A.attr("alternatives", std::int64_t{1});
    A.attr("var", var);
    A.save_choicepoint(std::move(cp));
    I.pending_label = std::pair{var, value};
    return;
  }
  Frame f = A.pop();
  cp.remaining.assign(f.candidates.begin() + 1, f.candidates.end());
  A.attr("kind", std::string("clause"));
  A.attr("alternatives", static_cast<std::int64_t>(cp.remaining.size()));
  A.save_choicepoint(std::move(cp));
  A.apply_clause(f.node, f.candidates.front());
}

void Engine::do_label() {
  ACCESS;
  auto [var, value] = *impl_->pending_label;
  impl_->pending_label.reset();
  A.attr("var", var);
  A.attr("value", value);
  const auto& dom = state_.fd_vars.at(var);
  A.emit(op::NarrowDomain{var, dom.remove(value)});
  A.enqueue_watchers(var, std::nullopt);
}

void Engine::do_solution() {
  ACCESS;
  A.emit(op::IncrSolutions{});
  A.attr("solution", A.text(impl_->goal.term));
  A.start_failing(std::nullopt);
}

// ---------------------------------------------------------------------------

RunResult run(Engine& engine, TraceSink& sink, const RunOptions& options) {
  RunResult result;
  sink.on_start(engine.snapshot());
  std::uint64_t count = 0;
  while (!engine.terminal()) {
    if (options.max_events && count >= options.max_events) break;
    auto ev = engine.step();
    ++count;
    if (!sink.on_event(ev)) {
      result.aborted = true;
      break;
    }
    if (options.checkpoint_every && ev.chrono.value % options.checkpoint_every == 0)
      sink.on_checkpoint(engine.snapshot());
  }
  result.completed = engine.terminal();
  result.solutions = engine.solutions();
  result.final_chrono = engine.chrono();
  return result;
}

std::optional<std::string> byrd_line(const TraceEvent& event) {
  if (!is_byrd_port(event.port)) return std::nullopt;
  auto inv = attr_int(event.attrs, "invocation");
  auto depth = attr_int(event.attrs, "depth");
  auto goal = attr_str(event.attrs, "goal");
  if (!inv || !depth || !goal) return std::nullopt;
  return std::to_string(*inv) + " " + std::to_string(*depth) + " " + std::string(capitalised_port(event.port)) +
         ": " + *goal;
}

}  // namespace tracelens::clp
