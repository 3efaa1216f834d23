#pragma once

// A depth-first resolution engine with a small finite-domain solver, written
// as a table of rules `name: condition(S) -> S' = effect(S)`. Every step
// applies exactly one rule and emits one TraceEvent.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tracelens/program.hpp"
#include "tracelens/trace_model.hpp"

namespace tracelens::clp {

class NoRuleApplicable : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NotAtBoundary : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Engine;

struct OsRule {
  Port port;                       // nominal port; the builtin rule may also emit fail/exception
  std::string_view name;
  std::string_view instantiation_attr;  // event attribute needed to replay the effect, if any
  bool (Engine::*condition)() const;
  void (Engine::*effect)();
};

/// All rules, in priority order.
const std::vector<OsRule>& rule_table();

struct EngineOptions {
  bool tracing = true;  // off: no attributes, no deltas, no goal texts
};

enum class LinearRel { le, eq, ne };

/// sum(coef * var) + constant REL 0
struct LinearConstraint {
  std::vector<std::pair<std::int64_t, std::string>> terms;
  std::int64_t constant = 0;
  LinearRel rel = LinearRel::le;
};

class Engine final : public TermContext {
 public:
  Engine(Program program, const Goal& goal, EngineOptions options = {});
  ~Engine() override;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  bool terminal() const;
  /// Rules whose condition holds, in priority order. Throws NoRuleApplicable
  /// on a terminal state.
  std::vector<const OsRule*> applicable_rules() const;
  /// Applies the highest-priority applicable rule.
  TraceEvent step();

  /// Deep copy of the current full state. Throws NotAtBoundary mid-step.
  FullState snapshot() const;
  const FullState& state() const { return state_; }
  Chrono chrono() const { return state_.chrono; }
  std::int64_t solutions() const { return state_.solutions; }
  bool tracing() const { return options_.tracing; }

  const LinearConstraint* linear(ConstraintId id) const;

  struct Impl;

  TermPtr deref(const TermPtr& t) const override;
  std::string var_name(std::uint32_t var) const override;

 private:
  friend const std::vector<OsRule>& rule_table();

  bool cond_solver_fail() const;
  bool cond_back_to() const;
  bool cond_entail() const;
  bool cond_reduce() const;
  bool cond_awake() const;
  bool cond_post() const;
  bool cond_new_variable() const;
  bool cond_builtin() const;
  bool cond_call() const;
  bool cond_exit() const;
  bool cond_redo() const;
  bool cond_fail() const;
  bool cond_choice_point() const;
  bool cond_label() const;
  bool cond_solution() const;

  void do_solver_fail();
  void do_back_to();
  void do_entail();
  void do_reduce();
  void do_awake();
  void do_post();
  void do_new_variable();
  void do_builtin();
  void do_call();
  void do_exit();
  void do_redo();
  void do_fail();
  void do_choice_point();
  void do_label();
  void do_solution();

  EngineOptions options_;
  FullState state_;
  std::unique_ptr<Impl> impl_;
  bool in_step_ = false;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void on_start(const FullState& initial) { (void)initial; }
  /// Returning false stops the run.
  virtual bool on_event(const TraceEvent& event) = 0;
  virtual void on_checkpoint(const FullState& state) { (void)state; }
};

struct RunOptions {
  std::uint64_t checkpoint_every = 0;  // 0: none
  std::uint64_t max_events = 0;        // 0: unbounded
};

struct RunResult {
  std::int64_t solutions = 0;
  Chrono final_chrono;
  bool completed = false;  // reached a terminal state
  bool aborted = false;    // stopped by the sink
};

RunResult run(Engine& engine, TraceSink& sink, const RunOptions& options = {});

/// Collects every event; handy in tests and for `tracelens run`.
class VectorSink final : public TraceSink {
 public:
  void on_start(const FullState& initial) override { initial_ = initial; }
  bool on_event(const TraceEvent& event) override {
    events_.push_back(event);
    return true;
  }
  void on_checkpoint(const FullState& state) override { checkpoints_.push_back(state); }

  const FullState& initial() const { return initial_; }
  const std::vector<TraceEvent>& events() const { return events_; }
  const std::vector<FullState>& checkpoints() const { return checkpoints_; }

 private:
  FullState initial_;
  std::vector<TraceEvent> events_;
  std::vector<FullState> checkpoints_;
};

/// The listing line for a Byrd event: `<invocation> <depth> <Port>: <goal>`.
std::optional<std::string> byrd_line(const TraceEvent& event);

}  // namespace tracelens::clp
