#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tracelens/analyzer.hpp"
#include "tracelens/bench.hpp"
#include "tracelens/corpus.hpp"
#include "tracelens/driver.hpp"
#include "tracelens/engine.hpp"
#include "tracelens/program.hpp"

using namespace tracelens;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct Source {
  std::string program_file;
  std::string goal;
  std::string workload;

  void add_options(CLI::App* app) {
    app->add_option("--program", program_file, "Program file");
    app->add_option("--goal", goal, "Goal to solve");
    app->add_option("--workload", workload, "Built-in workload: bench:N, queens:N, csp:SEED[:VARS[:DOM[:DENSITY]]]");
  }

  std::pair<clp::Program, clp::Goal> load() const {
    std::string text;
    std::string g = goal;
    if (!workload.empty()) {
      auto w = corpus::resolve(workload);
      text = w.program;
      if (g.empty()) g = w.goal;
    } else if (!program_file.empty()) {
      text = read_file(program_file);
    }
    if (g.empty()) throw std::runtime_error("no goal given (--goal or --workload)");
    return {clp::Program::load(text), clp::parse_goal(g)};
  }
};

driver::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_run(const Source& src, const std::string& format, std::uint64_t checkpoint_every, bool trace) {
  auto [program, goal] = src.load();
  clp::Engine engine(std::move(program), goal, clp::EngineOptions{trace});
  struct Printer final : clp::TraceSink {
    std::string format;
    std::uint64_t events = 0;
    bool on_event(const TraceEvent& e) override {
      ++events;
      if (format == "jsonl") {
        std::cout << encode_event(e);
      } else if (format == "byrd") {
        if (auto line = clp::byrd_line(e)) std::cout << *line << "\n";
      }
      return true;
    }
  } sink;
  sink.format = format;
  auto r = clp::run(engine, sink, clp::RunOptions{checkpoint_every, 0});
  if (format == "summary")
    std::cout << "events " << r.final_chrono.value << "\nsolutions " << r.solutions << "\n";
  return 0;
}

int cmd_serve(const Source& src, driver::DriverConfig config, const std::string& filters_file,
              const std::string& report_file) {
  auto [program, goal] = src.load();
  if (!filters_file.empty()) config.default_filters = filter::parse_filters(read_file(filters_file));
  driver::Server server(std::move(program), std::move(goal), config);
  std::cout << "listening " << config.listen.host << ":" << server.port() << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  auto report = server.run();
  g_server = nullptr;
  auto json = driver::report_to_json(report);
  if (!report_file.empty()) write_file(report_file, json.dump(2) + "\n");
  std::cerr << "engine events " << report.engine_events << ", emitted " << report.events_emitted << " events / "
            << report.bytes_emitted << " bytes, solutions " << report.solutions << "\n";
  return 0;
}

struct AnalyzeArgs {
  std::string connect;
  std::string filters_file;
  std::string kind = "byrd";
  std::int64_t delay_us = 1000;
  std::string timings_file;
  std::string out_file;
  std::string id = "analyzer";
  bool mirror = false;
  bool refilter = false;
  bool no_hold = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
  std::vector<std::string> sources;
  std::vector<filter::FilterSpec> specs;
  if (!a.filters_file.empty()) {
    auto text = read_file(a.filters_file);
    sources = filter::split_filters(text);
    specs = filter::parse_filters(text);
  }
  auto analyzer = analyzer::make_analyzer(a.kind, std::chrono::microseconds(a.delay_us));
  auto session = analyzer::Session::open(net::parse_endpoint(a.connect), sources,
                                         analyzer::SessionOptions{a.id, !a.no_hold});
  analyzer::RunLoopOptions options;
  options.mirror = a.mirror;
  if (a.refilter) options.refilter = specs;
  auto result = analyzer::run_loop(*session, *analyzer, options);
  session->bye();

  auto text = analyzer->report();
  if (a.mirror) {
    text += "mirror_chrono " + std::to_string(result.mirror.last_applied_chrono().value) + "\n";
    text += "gaps_seen " + std::to_string(result.mirror.gaps_seen()) + "\n";
  }
  if (a.out_file.empty())
    std::cout << text;
  else
    write_file(a.out_file, text);
  if (!a.timings_file.empty()) {
    auto j = analyzer::timings_to_json(session->timings());
    j["analyzer_id"] = a.id;
    j["analyzer"] = a.kind;
    if (result.end) {
      j["end_chrono"] = result.end->chrono;
      j["solutions"] = result.end->solutions;
    }
    write_file(a.timings_file, j.dump(2) + "\n");
  }
  return result.end ? 0 : 2;
}

int cmd_bench(const std::string& scenario_file, const std::string& out_dir) {
  auto scenarios = bench::load_scenarios(scenario_file);
  bench::BenchOptions options;
  options.executable = bench::self_executable();
  options.work_dir = out_dir;
  std::vector<bench::WorkloadReport> reports;
  for (const auto& s : scenarios) {
    std::cerr << "scenario " << s.name << "\n";
    reports.push_back(bench::run_scenario(s, options));
  }
  std::vector<bench::UnionComparison> comparisons;
  for (const auto& s : scenarios)
    if (s.compare_union) comparisons.push_back(bench::compare_union_vs_sequential(s));
  bench::write_reports(out_dir, reports, comparisons);
  std::cout << bench::render_table(reports, comparisons);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tracelens: traced constraint engine, tracer driver and analyzers"};
  app.require_subcommand(1);

  Source run_src;
  std::string format = "byrd";
  std::uint64_t run_checkpoints = 0;
  bool no_trace = false;
  auto* run = app.add_subcommand("run", "Run a goal and print its trace");
  run_src.add_options(run);
  run->add_option("--format", format, "byrd, jsonl or summary")->check(CLI::IsMember({"byrd", "jsonl", "summary"}));
  run->add_option("--checkpoint-every", run_checkpoints, "Checkpoint period");
  run->add_flag("--no-trace", no_trace, "Run with tracing off");

  Source serve_src;
  driver::DriverConfig config;
  std::string mode = "driven", filters_file, report_file, listen = "127.0.0.1:0";
  std::int64_t grace_ms = 0, linger_ms = 30000;
  bool skip_prog = false;
  auto* serve = app.add_subcommand("serve", "Serve the trace of a goal to analyzers");
  serve_src.add_options(serve);
  serve->add_option("--mode", mode, "off, full_broadcast or driven");
  serve->add_option("--filters", filters_file, "Filters installed for every client");
  serve->add_option("--listen", listen, "host:port (port 0 picks one)");
  serve->add_option("--checkpoint-every", config.checkpoint_every, "Checkpoint period")->check(CLI::PositiveNumber);
  serve->add_option("--wait-clients", config.wait_clients, "Clients to wait for before starting");
  serve->add_option("--grace-ms", grace_ms, "Longest wait for clients");
  serve->add_option("--linger-ms", linger_ms, "Longest wait for clients to leave after the end");
  serve->add_option("--queue", config.queue_capacity, "Per-client queue capacity")->check(CLI::PositiveNumber);
  serve->add_option("--report", report_file, "Write the server report (JSON)");
  serve->add_flag("--skip-prog", skip_prog, "Do not measure the untraced run time");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Connect to a server and run an analyzer");
  analyze->add_option("--connect", an.connect, "host:port")->required();
  analyze->add_option("--filters", an.filters_file, "Filters to subscribe");
  analyze->add_option("--analyzer", an.kind, "byrd, depth, nodes, slow or null")
      ->check(CLI::IsMember({"byrd", "depth", "nodes", "slow", "null"}));
  analyze->add_option("--delay-us", an.delay_us, "Per-event delay of the slow analyzer");
  analyze->add_option("--timings", an.timings_file, "Write client timings (JSON)");
  analyze->add_option("--out", an.out_file, "Write the analyzer output here instead of stdout");
  analyze->add_option("--id", an.id, "Analyzer id sent at hello");
  analyze->add_flag("--mirror", an.mirror, "Rebuild the full state from deltas");
  analyze->add_flag("--refilter", an.refilter, "Filter again on the client side");
  analyze->add_flag("--no-hold", an.no_hold, "Let the engine run while subscribing");

  std::string scenario_file, out_dir = "bench-out";
  auto* bench_cmd = app.add_subcommand("bench", "Run benchmark scenarios");
  bench_cmd->add_option("--scenario", scenario_file, "Scenario file")->required();
  bench_cmd->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_src, format, run_checkpoints, !no_trace);
    if (*serve) {
      config.mode = driver::mode_from_name(mode);
      config.listen = net::parse_endpoint(listen);
      config.grace = std::chrono::milliseconds(grace_ms);
      config.linger = std::chrono::milliseconds(linger_ms);
      config.measure_prog = !skip_prog;
      return cmd_serve(serve_src, config, filters_file, report_file);
    }
    if (*analyze) return cmd_analyze(an);
    if (*bench_cmd) return cmd_bench(scenario_file, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "tracelens: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
