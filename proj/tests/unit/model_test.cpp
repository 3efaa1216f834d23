#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "tracelens/codec.hpp"
#include "tracelens/domain.hpp"
#include "tracelens/trace_model.hpp"

using namespace tracelens;

namespace {

std::set<std::int64_t> as_set(const Domain& d) {
  auto v = d.values();
  return {v.begin(), v.end()};
}

Domain random_domain(std::mt19937_64& rng) {
  std::vector<std::int64_t> vals;
  int n = static_cast<int>(rng() % 8);
  for (int i = 0; i < n; ++i) vals.push_back(static_cast<std::int64_t>(rng() % 20) - 5);
  return Domain::of_values(vals);
}

}  // namespace

TEST(Domain, SetOperationsAgreeWithStdSet) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    auto a = random_domain(rng);
    auto b = random_domain(rng);
    auto sa = as_set(a), sb = as_set(b);
    std::set<std::int64_t> inter, diff, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(inter, inter.end()));
    std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(diff, diff.end()));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(uni, uni.end()));
    EXPECT_EQ(as_set(a.intersect(b)), inter);
    EXPECT_EQ(as_set(a.minus(b)), diff);
    EXPECT_EQ(as_set(a.unite(b)), uni);
    EXPECT_EQ(a.size(), sa.size());
    EXPECT_EQ(a.contains_all(b), std::includes(sa.begin(), sa.end(), sb.begin(), sb.end()));
    EXPECT_EQ(Domain::parse(a.to_string()), a);
  }
}

TEST(Domain, NormalisesAdjacentIntervals) {
  auto d = Domain::from_intervals({{5, 7}, {1, 2}, {3, 4}});
  ASSERT_EQ(d.intervals().size(), 1u);
  EXPECT_EQ(d.min(), 1);
  EXPECT_EQ(d.max(), 7);
  EXPECT_EQ(Domain::of({1, 2, 3, 5, 7, 8, 9}).to_string(), "1..3 5 7..9");
  EXPECT_EQ(Domain().to_string(), "{}");
  EXPECT_TRUE(Domain::parse("{}").empty());
  EXPECT_TRUE(Domain::singleton(4).is_singleton());
  EXPECT_EQ(Domain::range(1, 9).remove(5).restrict_min(3).restrict_max(7).to_string(), "3..4 6..7");
}

TEST(TraceModel, InitialStateHasOnlyTheRoot) {
  auto s = make_initial_state({"g"});
  EXPECT_EQ(s.chrono.value, 0u);
  EXPECT_EQ(s.search_tree.size(), 1u);
  EXPECT_TRUE(s.proof_tree.empty());
  EXPECT_FALSE(check_invariants(s).has_value());
}

TEST(TraceModel, ApplyRejectsInconsistentOps) {
  auto s = make_initial_state({});
  EXPECT_THROW(apply_op(s, op::PopGoal{"x"}), DeltaInconsistent);
  EXPECT_THROW(apply_op(s, op::SetNodeStatus{3, NodeStatus::proved}), DeltaInconsistent);
  EXPECT_THROW(apply_op(s, op::NarrowDomain{"X", Domain::singleton(1)}), DeltaInconsistent);
  EXPECT_THROW(apply_op(s, op::Dequeue{1}), DeltaInconsistent);
  EXPECT_THROW(apply_op(s, op::SetCurrentNode{9}), DeltaInconsistent);
  apply_op(s, op::SetDomain{"X", Domain::range(1, 3)});
  EXPECT_THROW(apply_op(s, op::NarrowDomain{"X", Domain::singleton(7)}), DeltaInconsistent);
  apply_op(s, op::NarrowDomain{"X", Domain::singleton(2)});
  EXPECT_EQ(s.fd_vars["X"].to_string(), "1 3");
}

TEST(TraceModel, EventAtOrBeforeStateChronoIsRejected) {
  auto s = make_initial_state({});
  TraceEvent e;
  e.chrono.value = 0;
  e.delta = StateDelta{};
  EXPECT_THROW(apply_delta(s, e), DeltaInconsistent);
  e.chrono.value = 1;
  EXPECT_EQ(apply_delta(s, e).chrono.value, 1u);
  e.delta.reset();
  EXPECT_THROW(apply_delta(s, e), DeltaInconsistent);
}

TEST(TraceModel, ValidateTraceFindsGapsAndDuplicates) {
  std::vector<TraceEvent> ev(3);
  for (std::uint64_t i = 0; i < 3; ++i) ev[i].id = ev[i].chrono.value = i + 1;
  EXPECT_TRUE(validate_trace(ev, true));
  ev[2].id = ev[2].chrono.value = 5;
  EXPECT_FALSE(validate_trace(ev, true));
  EXPECT_TRUE(validate_trace(ev, false));
  ev[2].id = 2;
  EXPECT_FALSE(validate_trace(ev, false));
}

TEST(TraceModel, DiffThenApplyReproducesEveryEngineSuccessor) {
  auto rec = fixture::record(corpus::queens(4), true);
  FullState prev = rec.initial;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    TraceEvent e;
    e.id = e.chrono.value = rec.states[i].chrono.value;
    e.delta = diff_states(prev, rec.states[i]);
    ASSERT_EQ(apply_delta(prev, e), rec.states[i]) << "at chrono " << e.chrono.value;
    prev = rec.states[i];
  }
}

TEST(TraceModel, EngineDeltasReplayToEngineStates) {
  auto rec = fixture::record(corpus::queens(4), true);
  FullState s = rec.initial;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    apply_delta_in_place(s, rec.events[i]);
    ASSERT_EQ(s, rec.states[i]) << "at chrono " << rec.events[i].chrono.value;
    auto bad = check_invariants(s, rec.events[i].port);
    ASSERT_FALSE(bad.has_value()) << *bad;
  }
}

TEST(Codec, EventRoundTripOverWholeTraces) {
  for (const auto& w : {corpus::bench(3), corpus::queens(4), corpus::resolve("csp:3:5:4:0.4")}) {
    auto rec = fixture::record(w);
    for (const auto& e : rec.events) {
      auto line = encode_event(e);
      ASSERT_EQ(line.back(), '\n');
      ASSERT_EQ(line.find('\n'), line.size() - 1);
      ASSERT_EQ(decode_event(line), e);
    }
  }
}

TEST(Codec, StateRoundTrip) {
  auto rec = fixture::record(corpus::queens(4), true);
  for (std::size_t i = 0; i < rec.states.size(); i += 17)
    ASSERT_EQ(state_from_json(state_to_json(rec.states[i])), rec.states[i]);
}

TEST(Codec, RejectsMalformedLines) {
  EXPECT_THROW(decode_event("not json"), DecodeError);
  EXPECT_THROW(decode_event(R"({"type":"event"})"), DecodeError);
  EXPECT_THROW(decode_event(R"({"type":"event","chrono":1,"tags":[],"port":"nope","attrs":{}})"), DecodeError);
  EXPECT_THROW(decode_event(R"({"type":"ack"})"), DecodeError);
  EXPECT_THROW(decode_event(R"({"type":"event","chrono":-1,"tags":[],"port":"call","attrs":{}})"), DecodeError);
  EXPECT_NO_THROW(decode_event(R"({"type":"event","chrono":1,"tags":[],"port":"call","attrs":{}})"));
}

TEST(Codec, PortNamesRoundTrip) {
  for (auto p : kAllPorts) EXPECT_EQ(port_from_name(port_name(p)), p);
  EXPECT_FALSE(port_from_name("Call").has_value());
}
