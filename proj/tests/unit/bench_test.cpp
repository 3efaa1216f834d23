#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tracelens/bench.hpp"

using namespace tracelens;
using namespace tracelens::bench;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tracelens-test-" + std::to_string(getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

BenchOptions options(const std::string& name) {
  BenchOptions o;
  o.executable = TRACELENS_EXE;
  o.work_dir = scratch(name);
  o.timeout = std::chrono::seconds(120);
  return o;
}

}  // namespace

TEST(Scenario, ParsesSectionsAndResolvesPaths) {
  auto list = parse_scenarios(R"(
# comment
[scenario first]
workload = queens:6
mode = full_broadcast
repetitions = 3
analyzer = byrd filters=f/byrd.flt
analyzer = slow delay_us=1000 mirror

[scenario second]
program = prog.pl
goal = go(X)
checkpoint_every = 50
queue = 16
compare_union = true
)",
                              "/base");
  ASSERT_EQ(list.size(), 2u);
  const auto& a = list[0];
  EXPECT_EQ(a.name, "first");
  EXPECT_EQ(a.workload, "queens:6");
  EXPECT_EQ(a.mode, driver::Mode::full_broadcast);
  EXPECT_EQ(a.repetitions, 3);
  ASSERT_EQ(a.analyzers.size(), 2u);
  EXPECT_EQ(a.analyzers[0].kind, "byrd");
  EXPECT_EQ(a.analyzers[0].filters, std::filesystem::path("/base/f/byrd.flt"));
  EXPECT_EQ(a.analyzers[1].delay_us, 1000);
  EXPECT_TRUE(a.analyzers[1].mirror);
  const auto& b = list[1];
  EXPECT_EQ(b.program, std::filesystem::path("/base/prog.pl"));
  EXPECT_EQ(b.goal, "go(X)");
  EXPECT_EQ(b.checkpoint_every, 50u);
  EXPECT_EQ(b.queue_capacity, 16u);
  EXPECT_TRUE(b.compare_union);
  EXPECT_EQ(b.mode, driver::Mode::driven);
}

TEST(Scenario, RejectsMalformedFiles) {
  EXPECT_THROW(parse_scenarios("workload = bench:2\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[other a]\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a]\nworkload = bench:2\n[scenario a]\nworkload = bench:2\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a]\nworkload = bench:2\nrepetitions = many\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a]\nworkload = bench:2\nmode = loud\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a]\nworkload = bench:2\nanalyzer = fancy\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a]\nworkload = bench:2\nanalyzer = slow speed=3\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a]\nmode = off\n"), ScenarioError);
  EXPECT_THROW(parse_scenarios("[scenario a]\nworkload = bench:2\ncolour = red\n"), ScenarioError);
}

TEST(Report, CsvRoundTrip) {
  WorkloadReport r;
  r.scenario = "has,comma";
  r.mode = "driven";
  r.workload = "queens:8";
  r.analyzers = 3;
  r.t_core_ns = -5;
  r.bytes_emitted = 123456789;
  r.sequential_evaluations = 42;
  r.scenario_wall_iqr_ns = 7;
  auto back = parse_csv(render_csv({r, r}));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].scenario, "has,comma");
  EXPECT_EQ(back[0].workload, "queens:8");
  EXPECT_EQ(back[0].t_core_ns, -5);
  EXPECT_EQ(back[0].bytes_emitted, 123456789u);
  EXPECT_EQ(back[1].sequential_evaluations, 42u);
  EXPECT_EQ(back[1].scenario_wall_iqr_ns, 7);
  EXPECT_EQ(render_csv(back), render_csv({r, r}));
}

TEST(Union, IdenticalFiltersCostAboutHalf) {
  auto rec = fixture::record(corpus::queens(5));
  auto a = filter::parse_filter("filter a { when port = call and depth > 2 and pred = queens/2 }");
  auto b = a;
  b.id = "b";
  auto c = compare_union(rec.events, {a, b});
  EXPECT_TRUE(c.tags_equal);
  EXPECT_TRUE(c.bound_holds);
  EXPECT_TRUE(c.port_constrained);
  EXPECT_EQ(c.merged_evaluations * 2, c.sequential_evaluations);
  auto one = compare_union(rec.events, {a});
  EXPECT_EQ(one.merged_evaluations, one.sequential_evaluations);
}

TEST(Union, RandomPortFilterSetsRespectTheBound) {
  auto rec = fixture::record(corpus::resolve("csp:2:4:3:0.5"));
  auto vocab = oracle::vocabulary(rec.events);
  std::mt19937_64 rng(99);
  for (int round = 0; round < 40; ++round) {
    std::vector<filter::FilterSpec> specs;
    int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k)
      specs.push_back(filter::parse_filter(oracle::random_port_filter(rng, "p" + std::to_string(k), vocab)));
    auto c = compare_union(rec.events, specs);
    ASSERT_TRUE(c.port_constrained) << "round " << round;
    EXPECT_TRUE(c.tags_equal) << "round " << round;
    EXPECT_TRUE(c.bound_holds) << "round " << round;
  }
}

TEST(Union, ScenarioComparisonNeedsTwoFilters) {
  auto dir = scratch("union");
  write(dir / "two.flt", "filter c { when port = call }\nfilter e { when port = exit and depth > 1 }\n");
  write(dir / "one.flt", "filter c { when port = call }\n");
  auto list = parse_scenarios(
      "[scenario u]\nworkload = bench:4\nanalyzer = null filters=two.flt\nanalyzer = null filters=one.flt\n"
      "[scenario v]\nworkload = bench:4\nanalyzer = null filters=one.flt\n",
      dir);
  auto specs = scenario_filters(list[0]);
  ASSERT_EQ(specs.size(), 3u);
  EXPECT_EQ(specs[0].id, "a1.c");
  EXPECT_EQ(specs[2].id, "a2.c");
  auto c = compare_union_vs_sequential(list[0]);
  EXPECT_EQ(c.filters, 3u);
  EXPECT_TRUE(c.tags_equal);
  EXPECT_TRUE(c.bound_holds);
  EXPECT_THROW(compare_union_vs_sequential(list[1]), ScenarioError);
}

TEST(Bench, DrivenScenarioWithRealProcesses) {
  auto o = options("driven");
  write(o.work_dir / "labels.flt", "filter l { when port = label }\n");
  auto list = parse_scenarios(
      "[scenario q]\nworkload = queens:4\nrepetitions = 2\nanalyzer = nodes filters=labels.flt\n"
      "analyzer = null\n",
      o.work_dir);
  auto rec = fixture::record(corpus::queens(4));
  std::uint64_t labels = 0;
  for (const auto& e : rec.events) labels += e.port == Port::label;

  auto r = run_scenario(list[0], o);
  EXPECT_EQ(r.mode, "driven");
  EXPECT_EQ(r.repetitions, 2u);
  EXPECT_EQ(r.solutions, 2);
  EXPECT_EQ(r.engine_events, rec.events.size());
  EXPECT_EQ(r.events_emitted, labels);
  EXPECT_EQ(r.analyzer_events, labels);
  EXPECT_GT(r.bytes_emitted, 0u);
  EXPECT_GT(r.predicate_evaluations, 0u);
  EXPECT_EQ(r.sequential_evaluations, r.predicate_evaluations);
  EXPECT_GE(r.scenario_wall_ns, r.server_wall_ns / 2);
  ASSERT_EQ(r.subscriptions.size(), 1u);
  EXPECT_EQ(r.subscriptions[0].client, "a1");
  EXPECT_EQ(r.analyzer_timings.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(o.work_dir / "q" / "rep2" / "a1.txt"));

  write_reports(o.work_dir, {r}, {});
  EXPECT_TRUE(std::filesystem::exists(o.work_dir / "report.csv"));
  EXPECT_NE(render_table({r}, {}).find("q"), std::string::npos);
}

TEST(Bench, OffAndEmptyModesEmitNothing) {
  auto o = options("quiet");
  write(o.work_dir / "all.flt", "filter a { when true }\n");
  auto list = parse_scenarios(
      "[scenario off]\nworkload = queens:4\nmode = off\nanalyzer = null filters=all.flt\n"
      "[scenario empty]\nworkload = queens:4\nanalyzer = null\n",
      o.work_dir);
  auto off = run_scenario(list[0], o);
  EXPECT_EQ(off.bytes_emitted, 0u);
  EXPECT_EQ(off.t_cond_ns, 0);
  EXPECT_EQ(off.t_extract_ns, 0);
  EXPECT_EQ(off.t_encode_and_com_ns, 0);
  EXPECT_EQ(off.solutions, 2);
  auto empty = run_scenario(list[1], o);
  EXPECT_EQ(empty.bytes_emitted, 0u);
  EXPECT_EQ(empty.events_emitted, 0u);
  EXPECT_EQ(empty.analyzer_events, 0u);
}

TEST(Bench, BroadcastSendsEverything) {
  auto o = options("broadcast");
  auto list = parse_scenarios("[scenario b]\nworkload = bench:3\nmode = full_broadcast\nanalyzer = byrd\n", o.work_dir);
  auto r = run_scenario(list[0], o);
  EXPECT_EQ(r.events_emitted, r.engine_events);
  EXPECT_EQ(r.analyzer_events, r.engine_events);
}

TEST(Scenario, ShippedFilesParse) {
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(TRACELENS_SOURCE_DIR) / "scenarios")) {
    if (entry.path().extension() != ".scn") continue;
    auto list = load_scenarios(entry.path());
    EXPECT_FALSE(list.empty()) << entry.path();
    for (const auto& s : list) {
      EXPECT_NO_THROW(scenario_filters(s)) << s.name;
      for (const auto& a : s.analyzers)
        if (!a.filters.empty()) EXPECT_TRUE(std::filesystem::exists(a.filters)) << a.filters;
    }
    ++files;
  }
  EXPECT_GE(files, 3);
}
