#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tracelens/filter.hpp"

using namespace tracelens;
using namespace tracelens::filter;

namespace {

std::vector<std::pair<std::string, Automaton>> machines_of(const std::vector<FilterSpec>& specs) {
  std::vector<std::pair<std::string, Automaton>> out;
  for (const auto& s : specs) out.emplace_back(s.id, compile(s));
  return out;
}

std::vector<std::vector<std::string>> naive_tags(const std::vector<FilterSpec>& specs,
                                                 const std::vector<TraceEvent>& events) {
  std::vector<std::vector<std::string>> out(events.size());
  for (const auto& s : specs) {
    auto m = oracle::naive_matches(s, events);
    for (std::size_t i = 0; i < events.size(); ++i)
      if (m[i]) out[i].push_back(s.id);
  }
  for (auto& t : out) std::sort(t.begin(), t.end());
  return out;
}

std::vector<std::vector<std::string>> merged_tags(MergedMatcher& m, const std::vector<TraceEvent>& events) {
  std::vector<std::vector<std::string>> out;
  for (const auto& e : events) out.push_back(m.match(e));
  return out;
}

std::uint64_t sequential_evaluations(const std::vector<FilterSpec>& specs, const std::vector<TraceEvent>& events) {
  std::uint64_t total = 0;
  for (const auto& s : specs) {
    FilterRunner r(compile(s));
    for (const auto& e : events) r.step(e);
    total += r.predicate_evaluations();
  }
  return total;
}

const std::vector<fixture::Recording>& traces() {
  static const std::vector<fixture::Recording> t = [] {
    std::vector<fixture::Recording> out;
    for (const auto& w : {corpus::bench(2), corpus::bench(4), corpus::queens(4), corpus::resolve("csp:2:4:3:0.5"),
                          corpus::resolve("csp:8:4:4:0.5")})
      out.push_back(fixture::record(w));
    return out;
  }();
  return t;
}

}  // namespace

TEST(FilterParse, WhenBlockWithAttrs) {
  auto f = parse_filter("filter f2 { when pred = bench/1 attrs goal, depths }");
  EXPECT_EQ(f.id, "f2");
  EXPECT_FALSE(f.sequence);
  EXPECT_EQ(f.wanted_attrs, (std::set<AttrGroup>{AttrGroup::port, AttrGroup::chrono, AttrGroup::goal, AttrGroup::depths}));
  ASSERT_EQ(f.pattern->atoms.size(), 1u);
  EXPECT_EQ(f.pattern->atoms[0].key(), "pred = bench/1");
}

TEST(FilterParse, DefaultAttrsArePortAndChrono) {
  auto f = parse_filter("filter a { when port = call }");
  EXPECT_EQ(f.wanted_attrs, (std::set<AttrGroup>{AttrGroup::port, AttrGroup::chrono}));
}

TEST(FilterParse, SequencesAndOperators) {
  auto f = parse_filter("filter s { seq ( port = call ; (port = exit | port = fail)* ; port in (redo, exception) ) }");
  EXPECT_TRUE(f.sequence);
  EXPECT_EQ(f.pattern->kind, Pattern::Kind::concat);
  auto a = compile(f);
  EXPECT_EQ(a.positions.size(), 4u);
  EXPECT_EQ(a.first, std::vector<int>{0});
}

TEST(FilterParse, QuotedNamesCommentsAndComparisons) {
  auto fs = parse_filters(R"(
    # leading comment
    filter q { when pred = '$call$'/1 and depth <= 2 and chrono > 0 }   # trailing
    filter v { when variable = 'X_1' and port = reduce }
  )");
  ASSERT_EQ(fs.size(), 2u);
  EXPECT_EQ(fs[0].pattern->atoms[0].key(), "pred = $call$/1");
  EXPECT_EQ(fs[0].pattern->atoms[1].key(), "depth <= 2");
  EXPECT_EQ(fs[1].pattern->atoms[0].key(), "variable = X_1");
}

TEST(FilterParse, ErrorsCarryLocation) {
  try {
    parse_filter("filter x {\n  when port = nosuchport }");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 15);
  }
  EXPECT_THROW(parse_filter("filter x { when }"), ParseError);
  EXPECT_THROW(parse_filter("filter x { when port = call attrs bogus }"), ParseError);
  EXPECT_THROW(parse_filter("filter x { seq ( port = call ) "), ParseError);
  EXPECT_THROW(parse_filter("filter x { when port = call } filter y { when true }"), ParseError);
  EXPECT_THROW(parse_filter("filter x { when depth ~ 2 }"), ParseError);
  EXPECT_THROW(parse_filter("filter x { when pred = a/b }"), ParseError);
  EXPECT_THROW(parse_filters("filter x { when true } filter x { when true }"), DuplicateId);
}

TEST(FilterParse, SplitGivesOneSourcePerBlock) {
  std::string text = "filter a { when port = call }\n# c\nfilter b { seq ( true ; true ) attrs goal }\n";
  auto parts = split_filters(text);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parse_filter(parts[0]).id, "a");
  EXPECT_EQ(parse_filter(parts[1]).id, "b");
  EXPECT_TRUE(split_filters("  # nothing\n").empty());
}

TEST(FilterMatch, EmptyMatcherTagsNothing) {
  MergedMatcher m;
  for (const auto& e : traces()[0].events) EXPECT_TRUE(m.match(e).empty());
  EXPECT_TRUE(m.empty());
}

TEST(FilterMatch, PredicateFilterOnBenchListing) {
  auto m = merge({parse_filter("filter f2 { when pred = bench/1 }")});
  const auto& ev = traces()[0].events;
  std::vector<std::string> goals;
  for (const auto& e : ev) {
    auto tags = m.match(e);
    if (tags.empty()) continue;
    EXPECT_EQ(tags, std::vector<std::string>{"f2"});
    goals.push_back(*attr_str(e.attrs, "goal"));
  }
  ASSERT_FALSE(goals.empty());
  EXPECT_EQ(goals[0], "bench(2)");
  for (const auto& g : goals) EXPECT_EQ(g.rfind("bench(", 0), 0u);
}

TEST(FilterMatch, CallFilterTagsExactlyTheCalls) {
  auto m = merge({parse_filter("filter c { when port = call }")});
  for (const auto& e : traces()[1].events) EXPECT_EQ(!m.match(e).empty(), e.port == Port::call);
}

TEST(FilterMatch, SequenceReportedAtFinalEvent) {
  auto spec = parse_filter("filter s { seq ( port = call ; port = exit ) }");
  auto m = merge({spec});
  const auto& ev = traces()[0].events;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    bool expected = i > 0 && ev[i - 1].port == Port::call && ev[i].port == Port::exit;
    EXPECT_EQ(!m.match(ev[i]).empty(), expected) << i;
  }
}

TEST(FilterMatch, OverlappingMatchesAllReported) {
  auto spec = parse_filter("filter s { seq ( true ; true ) }");
  auto m = merge({spec});
  const auto& ev = traces()[0].events;
  EXPECT_TRUE(m.match(ev[0]).empty());
  for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_FALSE(m.match(ev[i]).empty());
}

TEST(FilterMatch, MergedEqualsNaiveOnRandomFilterSets) {
  std::mt19937_64 rng(1234);
  for (int round = 0; round < 150; ++round) {
    const auto& rec = traces()[round % traces().size()];
    auto vocab = oracle::vocabulary(rec.events);
    std::vector<FilterSpec> specs;
    int k = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < k; ++i) specs.push_back(parse_filter(oracle::random_filter(rng, "f" + std::to_string(i), vocab)));
    auto m = MergedMatcher::build(machines_of(specs));
    ASSERT_EQ(merged_tags(m, rec.events), naive_tags(specs, rec.events)) << "round " << round;
    for (const auto& s : specs) {
      FilterRunner r(compile(s));
      auto naive = oracle::naive_matches(s, rec.events);
      for (std::size_t i = 0; i < rec.events.size(); ++i) ASSERT_EQ(r.step(rec.events[i]), naive[i]) << s.id;
    }
  }
}

TEST(FilterMatch, WorkBoundForPortConstrainedSets) {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 150; ++round) {
    const auto& rec = traces()[round % traces().size()];
    auto vocab = oracle::vocabulary(rec.events);
    std::vector<FilterSpec> specs;
    int k = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < k; ++i)
      specs.push_back(parse_filter(oracle::random_port_filter(rng, "p" + std::to_string(i), vocab)));
    auto m = MergedMatcher::build(machines_of(specs));
    merged_tags(m, rec.events);
    EXPECT_LE(m.predicate_evaluations(), sequential_evaluations(specs, rec.events)) << "round " << round;
  }
}

TEST(FilterMatch, IdenticalFiltersCostAboutHalf) {
  auto a = parse_filter("filter a { when port = call and depth > 2 }");
  auto b = parse_filter("filter b { when port = call and depth > 2 }");
  const auto& ev = traces()[3].events;
  auto m = merge({a, b});
  merged_tags(m, ev);
  auto seq = sequential_evaluations({a, b}, ev);
  EXPECT_LE(2 * m.predicate_evaluations(), seq + ev.size());
  auto single = merge({a});
  merged_tags(single, ev);
  EXPECT_EQ(single.predicate_evaluations(), sequential_evaluations({a}, ev));
}

TEST(FilterMatch, DeterministicTagsAndCounters) {
  std::mt19937_64 rng(5);
  const auto& rec = traces()[2];
  auto vocab = oracle::vocabulary(rec.events);
  std::vector<FilterSpec> specs;
  for (int i = 0; i < 5; ++i) specs.push_back(parse_filter(oracle::random_filter(rng, "d" + std::to_string(i), vocab)));
  auto m1 = merge(specs);
  auto m2 = merge(specs);
  EXPECT_EQ(merged_tags(m1, rec.events), merged_tags(m2, rec.events));
  EXPECT_EQ(m1.predicate_evaluations(), m2.predicate_evaluations());
}

TEST(FilterMatch, RunStateCarriesAcrossRebuilds) {
  auto s = parse_filter("filter s { seq ( port = call ; port = exit ) }");
  auto other = parse_filter("filter o { when port = redo }");
  const auto& ev = traces()[0].events;
  auto whole = merge({s});
  auto expected = merged_tags(whole, ev);
  for (std::size_t cut = 1; cut < ev.size(); ++cut) {
    auto first = merge({s});
    std::vector<std::vector<std::string>> got;
    for (std::size_t i = 0; i < cut; ++i) got.push_back(first.match(ev[i]));
    auto second = merge({s, other});
    second.restore_run_state(first.run_state());
    for (std::size_t i = cut; i < ev.size(); ++i) {
      auto t = second.match(ev[i]);
      t.erase(std::remove(t.begin(), t.end(), "o"), t.end());
      got.push_back(t);
    }
    ASSERT_EQ(got, expected) << "cut " << cut;
  }
}

TEST(FilterMatch, DuplicateTagsRejected) {
  auto a = parse_filter("filter a { when true }");
  EXPECT_THROW(MergedMatcher::build({{"x", compile(a)}, {"x", compile(a)}}), DuplicateId);
}

TEST(FilterMatch, PortDisjointFiltersHalveTheWork) {
  std::vector<std::string> ports{"call", "exit", "redo", "fail", "reduce", "awake", "entail", "label"};
  std::vector<FilterSpec> specs;
  for (std::size_t i = 0; i < ports.size(); ++i)
    specs.push_back(parse_filter("filter p" + std::to_string(i) + " { when port = " + ports[i] + " and depth >= 1 }"));
  const auto& ev = traces()[2].events;
  auto m = merge(specs);
  merged_tags(m, ev);
  EXPECT_LE(2 * m.predicate_evaluations(), sequential_evaluations(specs, ev));
}
