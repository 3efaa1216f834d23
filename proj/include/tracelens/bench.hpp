#pragma once

// Benchmark scenarios: a server process plus analyzer processes per run,
// medians over repetitions, and the merged-versus-sequential filter count.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelens/analyzer.hpp"
#include "tracelens/driver.hpp"
#include "tracelens/filter.hpp"

namespace tracelens::bench {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnalyzerSpec {
  std::string kind = "null";       // byrd, depth, nodes, slow, null
  std::filesystem::path filters;   // empty: no subscription
  std::int64_t delay_us = 0;
  bool mirror = false;
};

struct Scenario {
  std::string name;
  std::string workload;                // corpus spec, or empty with program + goal
  std::filesystem::path program;
  std::string goal;
  driver::Mode mode = driver::Mode::driven;
  std::vector<AnalyzerSpec> analyzers;
  int repetitions = 1;
  std::uint64_t checkpoint_every = 1000;
  std::size_t queue_capacity = 256;
  bool compare_union = false;
};

/// Relative paths are resolved against `base_dir`. Throws ScenarioError.
std::vector<Scenario> parse_scenarios(std::string_view text, const std::filesystem::path& base_dir = {});
std::vector<Scenario> load_scenarios(const std::filesystem::path& file);

struct BenchOptions {
  std::filesystem::path executable;  // the tracelens binary
  std::filesystem::path work_dir = "bench-out";
  std::chrono::seconds timeout{600};
};

/// Path of the running binary.
std::filesystem::path self_executable();

struct WorkloadReport {
  std::string scenario;
  std::string mode;
  std::string workload;
  std::uint64_t analyzers = 0;
  std::uint64_t repetitions = 0;

  // server side, medians
  std::int64_t t_prog_ns = 0;
  std::int64_t t_engine_ns = 0;
  std::int64_t t_core_ns = 0;
  std::int64_t t_cond_ns = 0;
  std::int64_t t_extract_ns = 0;
  std::int64_t t_encode_and_com_ns = 0;
  std::int64_t server_wall_ns = 0;
  std::int64_t scenario_wall_ns = 0;

  // counted
  std::uint64_t engine_events = 0;
  std::uint64_t events_emitted = 0;
  std::uint64_t bytes_emitted = 0;
  std::uint64_t predicate_evaluations = 0;
  std::uint64_t sequential_evaluations = 0;
  std::int64_t solutions = 0;
  std::uint64_t analyzer_events = 0;

  // client side, medians of the sums over analyzers
  std::int64_t t_filter_ns = 0;
  std::int64_t t_decode_ns = 0;
  std::int64_t t_rebuild_ns = 0;
  std::int64_t t_exec_ns = 0;

  // interquartile ranges
  std::int64_t t_core_iqr_ns = 0;
  std::int64_t scenario_wall_iqr_ns = 0;

  // last repetition, not in the CSV
  std::vector<driver::SubscriptionReport> subscriptions;
  std::vector<analyzer::AnalyzerTimings> analyzer_timings;
};

/// Throws ScenarioError when a process fails or times out.
WorkloadReport run_scenario(const Scenario& scenario, const BenchOptions& options);

struct UnionComparison {
  std::string scenario;
  std::size_t filters = 0;
  std::uint64_t events = 0;
  std::uint64_t merged_evaluations = 0;
  std::uint64_t sequential_evaluations = 0;
  std::int64_t merged_ns = 0;
  std::int64_t sequential_ns = 0;
  bool port_constrained = false;  // every filter's first positions test the port
  bool tags_equal = false;        // merged tags equal the per-filter matches
  bool bound_holds = false;       // merged <= sequential evaluations
};

/// Runs both matchers over the same events.
UnionComparison compare_union(const std::vector<TraceEvent>& events, const std::vector<filter::FilterSpec>& specs,
                              std::string name = {});
/// Records the scenario's trace in process and compares over the filters of
/// all its analyzers. Throws ScenarioError when the work bound is violated
/// for a port-constrained set.
UnionComparison compare_union_vs_sequential(const Scenario& scenario);

/// Filters of all analyzers of the scenario, ids made unique.
std::vector<filter::FilterSpec> scenario_filters(const Scenario& scenario);
/// The scenario's trace, recorded in process with tracing on.
std::vector<TraceEvent> record_trace(const Scenario& scenario);

std::string render_csv(const std::vector<WorkloadReport>& reports);
/// Reads back what render_csv wrote (the CSV columns only).
std::vector<WorkloadReport> parse_csv(std::string_view text);
std::string render_table(const std::vector<WorkloadReport>& reports, const std::vector<UnionComparison>& comparisons);
/// Writes report.csv and report.txt.
void write_reports(const std::filesystem::path& dir, const std::vector<WorkloadReport>& reports,
                   const std::vector<UnionComparison>& comparisons);

}  // namespace tracelens::bench
