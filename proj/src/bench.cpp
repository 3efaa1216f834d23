#include "tracelens/bench.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <set>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "tracelens/corpus.hpp"
#include "tracelens/engine.hpp"
#include "tracelens/program.hpp"

extern char** environ;

namespace tracelens::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ScenarioError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::int64_t to_int(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    auto n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ScenarioError("line " + std::to_string(line) + ": expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, int line) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ScenarioError("line " + std::to_string(line) + ": expected true or false, got '" + v + "'");
}

// Child processes ----------------------------------------------------------

struct Child {
  pid_t pid = -1;
  std::string what;
};

Child spawn(const std::vector<std::string>& args, int stdout_fd, const std::string& what) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (stdout_fd >= 0) posix_spawn_file_actions_adddup2(&actions, stdout_fd, STDOUT_FILENO);
  pid_t pid = -1;
  int rc = posix_spawn(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw ScenarioError("cannot start " + what + ": " + std::strerror(rc));
  return {pid, what};
}

/// Waits for all children; kills the rest on timeout or failure.
void wait_all(std::vector<Child>& children, Clock::time_point deadline, Clock::time_point* server_done = nullptr) {
  std::string failure;
  std::size_t left = children.size();
  std::vector<bool> done(children.size(), false);
  while (left) {
    for (std::size_t i = 0; i < children.size(); ++i) {
      if (done[i]) continue;
      int status = 0;
      pid_t r = waitpid(children[i].pid, &status, WNOHANG);
      if (r == 0) continue;
      done[i] = true;
      --left;
      if (i == 0 && server_done) *server_done = Clock::now();
      bool ok = r > 0 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
      if (!ok && failure.empty())
        failure = children[i].what + " failed" +
                  (r > 0 && WIFEXITED(status) ? " with status " + std::to_string(WEXITSTATUS(status)) : "");
    }
    if (!failure.empty() || Clock::now() > deadline) {
      if (failure.empty()) failure = "scenario timed out";
      for (std::size_t i = 0; i < children.size(); ++i)
        if (!done[i]) {
          kill(children[i].pid, SIGKILL);
          waitpid(children[i].pid, nullptr, 0);
        }
      throw ScenarioError(failure);
    }
    if (left) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

template <class T>
T median(std::vector<T> v) {
  if (v.empty()) return T{};
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

template <class T>
T iqr(std::vector<T> v) {
  if (v.size() < 2) return T{};
  std::sort(v.begin(), v.end());
  return v[(3 * (v.size() - 1)) / 4] - v[(v.size() - 1) / 4];
}

struct Rep {
  driver::ServerReport server;
  std::vector<analyzer::AnalyzerTimings> clients;
  std::int64_t scenario_wall_ns = 0;
};

Rep run_once(const Scenario& s, const BenchOptions& o, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto exe = std::filesystem::absolute(o.executable).string();
  std::vector<std::string> args{exe, "serve", "--mode", std::string(driver::mode_name(s.mode)), "--listen",
                                "127.0.0.1:0", "--checkpoint-every", std::to_string(s.checkpoint_every),
                                "--wait-clients", std::to_string(s.analyzers.size()), "--grace-ms", "60000",
                                "--linger-ms", "60000", "--queue", std::to_string(s.queue_capacity), "--report",
                                (dir / "server.json").string()};
  if (!s.workload.empty()) {
    args.insert(args.end(), {"--workload", s.workload});
    if (!s.goal.empty()) args.insert(args.end(), {"--goal", s.goal});
  } else {
    args.insert(args.end(), {"--program", s.program.string(), "--goal", s.goal});
  }

  int fds[2];
  if (pipe(fds) != 0) throw ScenarioError("pipe failed");
  auto t0 = Clock::now();
  std::vector<Child> children;
  children.push_back(spawn(args, fds[1], "server"));
  close(fds[1]);

  std::string first;
  char ch;
  while (read(fds[0], &ch, 1) == 1 && ch != '\n') first.push_back(ch);
  close(fds[0]);
  auto colon = first.rfind(':');
  if (first.rfind("listening ", 0) != 0 || colon == std::string::npos) {
    kill(children[0].pid, SIGKILL);
    waitpid(children[0].pid, nullptr, 0);
    throw ScenarioError("server did not report its port");
  }
  auto endpoint = first.substr(10);

  for (std::size_t i = 0; i < s.analyzers.size(); ++i) {
    const auto& a = s.analyzers[i];
    auto id = "a" + std::to_string(i + 1);
    std::vector<std::string> aargs{exe, "analyze", "--connect", endpoint, "--analyzer", a.kind, "--delay-us",
                                   std::to_string(a.delay_us), "--timings", (dir / (id + ".json")).string(), "--out",
                                   (dir / (id + ".txt")).string(), "--id", id};
    if (!a.filters.empty()) aargs.insert(aargs.end(), {"--filters", a.filters.string()});
    if (a.mirror) aargs.push_back("--mirror");
    children.push_back(spawn(aargs, -1, "analyzer " + id));
  }
  Clock::time_point server_done;
  wait_all(children, Clock::now() + o.timeout, &server_done);

  Rep rep;
  rep.scenario_wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(server_done - t0).count();
  try {
    rep.server = driver::report_from_json(Json::parse(read_file(dir / "server.json")));
    for (std::size_t i = 0; i < s.analyzers.size(); ++i)
      rep.clients.push_back(
          analyzer::timings_from_json(Json::parse(read_file(dir / ("a" + std::to_string(i + 1) + ".json")))));
  } catch (const Json::exception& e) {
    throw ScenarioError(std::string("bad report file: ") + e.what());
  }
  return rep;
}

// CSV ----------------------------------------------------------------------

struct Column {
  const char* name;
  std::function<std::string(const WorkloadReport&)> get;
  std::function<void(WorkloadReport&, const std::string&)> set;
};

template <class T>
Column num(const char* name, T WorkloadReport::*m) {
  return {name, [m](const WorkloadReport& r) { return std::to_string(r.*m); },
          [m](WorkloadReport& r, const std::string& v) {
            if constexpr (std::is_signed_v<T>)
              r.*m = static_cast<T>(std::stoll(v));
            else
              r.*m = static_cast<T>(std::stoull(v));
          }};
}

Column text(const char* name, std::string WorkloadReport::*m) {
  return {name, [m](const WorkloadReport& r) { return r.*m; }, [m](WorkloadReport& r, const std::string& v) { r.*m = v; }};
}

const std::vector<Column>& columns() {
  static const std::vector<Column> cols{
      text("scenario", &WorkloadReport::scenario),
      text("mode", &WorkloadReport::mode),
      text("workload", &WorkloadReport::workload),
      num("analyzers", &WorkloadReport::analyzers),
      num("repetitions", &WorkloadReport::repetitions),
      num("t_prog_ns", &WorkloadReport::t_prog_ns),
      num("t_engine_ns", &WorkloadReport::t_engine_ns),
      num("t_core_ns", &WorkloadReport::t_core_ns),
      num("t_cond_ns", &WorkloadReport::t_cond_ns),
      num("t_extract_ns", &WorkloadReport::t_extract_ns),
      num("t_encode_and_com_ns", &WorkloadReport::t_encode_and_com_ns),
      num("server_wall_ns", &WorkloadReport::server_wall_ns),
      num("scenario_wall_ns", &WorkloadReport::scenario_wall_ns),
      num("engine_events", &WorkloadReport::engine_events),
      num("events_emitted", &WorkloadReport::events_emitted),
      num("bytes_emitted", &WorkloadReport::bytes_emitted),
      num("predicate_evaluations", &WorkloadReport::predicate_evaluations),
      num("sequential_evaluations", &WorkloadReport::sequential_evaluations),
      num("solutions", &WorkloadReport::solutions),
      num("analyzer_events", &WorkloadReport::analyzer_events),
      num("t_filter_ns", &WorkloadReport::t_filter_ns),
      num("t_decode_ns", &WorkloadReport::t_decode_ns),
      num("t_rebuild_ns", &WorkloadReport::t_rebuild_ns),
      num("t_exec_ns", &WorkloadReport::t_exec_ns),
      num("t_core_iqr_ns", &WorkloadReport::t_core_iqr_ns),
      num("scenario_wall_iqr_ns", &WorkloadReport::scenario_wall_iqr_ns),
  };
  return cols;
}

std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

std::string ms(std::int64_t ns) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << static_cast<double>(ns) / 1e6;
  return out.str();
}

}  // namespace

// Scenarios ----------------------------------------------------------------

std::vector<Scenario> parse_scenarios(std::string_view text, const std::filesystem::path& base_dir) {
  std::vector<Scenario> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  auto resolve_path = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    auto where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioError(where + "unterminated section header");
      auto w = words(std::string_view(line).substr(1, line.size() - 2));
      if (w.size() != 2 || w[0] != "scenario") throw ScenarioError(where + "expected [scenario NAME]");
      for (const auto& s : out)
        if (s.name == w[1]) throw ScenarioError(where + "duplicate scenario " + w[1]);
      out.push_back(Scenario{});
      out.back().name = w[1];
      continue;
    }
    if (out.empty()) throw ScenarioError(where + "setting outside a [scenario] section");
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ScenarioError(where + "expected key = value");
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    auto& s = out.back();
    if (key == "workload") {
      s.workload = value;
    } else if (key == "program") {
      s.program = resolve_path(value);
    } else if (key == "goal") {
      s.goal = value;
    } else if (key == "mode") {
      try {
        s.mode = driver::mode_from_name(value);
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(where + e.what());
      }
    } else if (key == "repetitions") {
      s.repetitions = static_cast<int>(to_int(value, lineno));
      if (s.repetitions < 1) throw ScenarioError(where + "repetitions must be positive");
    } else if (key == "checkpoint_every") {
      auto n = to_int(value, lineno);
      if (n < 1) throw ScenarioError(where + "checkpoint_every must be positive");
      s.checkpoint_every = static_cast<std::uint64_t>(n);
    } else if (key == "queue") {
      auto n = to_int(value, lineno);
      if (n < 1) throw ScenarioError(where + "queue must be positive");
      s.queue_capacity = static_cast<std::size_t>(n);
    } else if (key == "compare_union") {
      s.compare_union = to_bool(value, lineno);
    } else if (key == "analyzer") {
      auto w = words(value);
      if (w.empty()) throw ScenarioError(where + "analyzer needs a kind");
      AnalyzerSpec a;
      a.kind = w[0];
      static const std::set<std::string> kinds{"byrd", "depth", "nodes", "slow", "null"};
      if (!kinds.contains(a.kind)) throw ScenarioError(where + "unknown analyzer kind " + a.kind);
      for (std::size_t i = 1; i < w.size(); ++i) {
        auto e = w[i].find('=');
        auto k = w[i].substr(0, e);
        auto v = e == std::string::npos ? std::string() : w[i].substr(e + 1);
        if (k == "filters" && !v.empty())
          a.filters = resolve_path(v);
        else if (k == "delay_us")
          a.delay_us = to_int(v, lineno);
        else if (k == "mirror" && e == std::string::npos)
          a.mirror = true;
        else
          throw ScenarioError(where + "unknown analyzer option " + w[i]);
      }
      s.analyzers.push_back(a);
    } else {
      throw ScenarioError(where + "unknown key " + key);
    }
  }
  for (const auto& s : out)
    if (s.workload.empty() && (s.program.empty() || s.goal.empty()))
      throw ScenarioError("scenario " + s.name + " needs a workload or a program and goal");
  return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& file) {
  return parse_scenarios(read_file(file), file.parent_path());
}

std::filesystem::path self_executable() { return std::filesystem::read_symlink("/proc/self/exe"); }

// Running ------------------------------------------------------------------

WorkloadReport run_scenario(const Scenario& s, const BenchOptions& o) {
  std::vector<Rep> reps;
  for (int i = 0; i < s.repetitions; ++i)
    reps.push_back(run_once(s, o, o.work_dir / s.name / ("rep" + std::to_string(i + 1))));

  WorkloadReport r;
  r.scenario = s.name;
  r.mode = std::string(driver::mode_name(s.mode));
  r.workload = s.workload.empty() ? s.program.filename().string() + " " + s.goal : s.workload;
  r.analyzers = s.analyzers.size();
  r.repetitions = reps.size();

  auto collect = [&](auto get) {
    std::vector<std::int64_t> v;
    for (const auto& rep : reps) v.push_back(get(rep));
    return v;
  };
  auto med = [&](auto get) { return median(collect(get)); };
  r.t_prog_ns = med([](const Rep& x) { return x.server.t_prog_ns; });
  r.t_engine_ns = med([](const Rep& x) { return x.server.t_engine_ns; });
  r.t_core_ns = med([](const Rep& x) { return x.server.t_core_ns; });
  r.t_cond_ns = med([](const Rep& x) { return x.server.t_cond_ns; });
  r.t_extract_ns = med([](const Rep& x) { return x.server.t_extract_ns; });
  r.t_encode_and_com_ns = med([](const Rep& x) { return x.server.t_encode_and_com_ns; });
  r.server_wall_ns = med([](const Rep& x) { return x.server.wall_ns; });
  r.scenario_wall_ns = med([](const Rep& x) { return x.scenario_wall_ns; });
  r.t_core_iqr_ns = iqr(collect([](const Rep& x) { return x.server.t_core_ns; }));
  r.scenario_wall_iqr_ns = iqr(collect([](const Rep& x) { return x.scenario_wall_ns; }));
  auto client_sum = [](const Rep& x, std::int64_t analyzer::AnalyzerTimings::*m) {
    std::int64_t total = 0;
    for (const auto& c : x.clients) total += c.*m;
    return total;
  };
  r.t_filter_ns = med([&](const Rep& x) { return client_sum(x, &analyzer::AnalyzerTimings::t_filter_ns); });
  r.t_decode_ns = med([&](const Rep& x) { return client_sum(x, &analyzer::AnalyzerTimings::t_decode_ns); });
  r.t_rebuild_ns = med([&](const Rep& x) { return client_sum(x, &analyzer::AnalyzerTimings::t_rebuild_ns); });
  r.t_exec_ns = med([&](const Rep& x) { return client_sum(x, &analyzer::AnalyzerTimings::t_exec_ns); });

  const auto& last = reps.back();
  r.engine_events = last.server.engine_events;
  r.events_emitted = last.server.events_emitted;
  r.bytes_emitted = last.server.bytes_emitted;
  r.predicate_evaluations = last.server.predicate_evaluations;
  r.solutions = last.server.solutions;
  for (const auto& c : last.clients) r.analyzer_events += c.events;
  r.subscriptions = last.server.subscriptions;
  r.analyzer_timings = last.clients;

  if (s.mode == driver::Mode::driven) {
    auto specs = scenario_filters(s);
    if (!specs.empty()) {
      std::uint64_t seq = 0;
      std::vector<filter::FilterRunner> runners;
      for (const auto& f : specs) runners.emplace_back(filter::compile(f));
      for (const auto& e : record_trace(s))
        for (auto& run : runners) run.step(e);
      for (const auto& run : runners) seq += run.predicate_evaluations();
      r.sequential_evaluations = seq;
    }
  }
  return r;
}

std::vector<filter::FilterSpec> scenario_filters(const Scenario& s) {
  std::vector<filter::FilterSpec> out;
  for (std::size_t i = 0; i < s.analyzers.size(); ++i) {
    if (s.analyzers[i].filters.empty()) continue;
    for (auto f : filter::parse_filters(read_file(s.analyzers[i].filters))) {
      f.id = "a" + std::to_string(i + 1) + "." + f.id;
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::vector<TraceEvent> record_trace(const Scenario& s) {
  std::string program, goal = s.goal;
  if (!s.workload.empty()) {
    auto w = corpus::resolve(s.workload);
    program = w.program;
    if (goal.empty()) goal = w.goal;
  } else {
    program = read_file(s.program);
  }
  clp::Engine engine(clp::Program::load(program), clp::parse_goal(goal), clp::EngineOptions{true});
  clp::VectorSink sink;
  clp::run(engine, sink);
  return sink.events();
}

UnionComparison compare_union(const std::vector<TraceEvent>& events, const std::vector<filter::FilterSpec>& specs,
                              std::string name) {
  UnionComparison c;
  c.scenario = std::move(name);
  c.filters = specs.size();
  c.events = events.size();

  std::vector<std::pair<std::string, filter::Automaton>> machines;
  c.port_constrained = true;
  for (const auto& f : specs) {
    auto a = filter::compile(f);
    for (int p : a.first)
      if (!a.positions[p].ports) c.port_constrained = false;
    machines.emplace_back(f.id, std::move(a));
  }

  auto merged = filter::MergedMatcher::build(machines);
  std::vector<std::vector<std::string>> merged_tags;
  merged_tags.reserve(events.size());
  auto t0 = Clock::now();
  for (const auto& e : events) merged_tags.push_back(merged.match(e));
  c.merged_ns = ns_since(t0);
  c.merged_evaluations = merged.predicate_evaluations();

  std::vector<filter::FilterRunner> runners;
  for (const auto& [id, a] : machines) runners.emplace_back(a);
  std::vector<std::vector<std::string>> seq_tags(events.size());
  auto t1 = Clock::now();
  for (std::size_t i = 0; i < events.size(); ++i)
    for (std::size_t k = 0; k < runners.size(); ++k)
      if (runners[k].step(events[i])) seq_tags[i].push_back(machines[k].first);
  c.sequential_ns = ns_since(t1);
  for (const auto& r : runners) c.sequential_evaluations += r.predicate_evaluations();
  for (auto& t : seq_tags) std::sort(t.begin(), t.end());

  c.tags_equal = merged_tags == seq_tags;
  c.bound_holds = c.merged_evaluations <= c.sequential_evaluations;
  return c;
}

UnionComparison compare_union_vs_sequential(const Scenario& s) {
  auto specs = scenario_filters(s);
  if (specs.size() < 2) throw ScenarioError("scenario " + s.name + ": union comparison needs at least 2 filters");
  auto c = compare_union(record_trace(s), specs, s.name);
  if (!c.tags_equal) throw ScenarioError("scenario " + s.name + ": merged and per-filter matches differ");
  if (c.port_constrained && !c.bound_holds)
    throw ScenarioError("scenario " + s.name + ": merged evaluations exceed the per-filter sum");
  return c;
}

// Reports ------------------------------------------------------------------

std::string render_csv(const std::vector<WorkloadReport>& reports) {
  std::string out;
  const auto& cols = columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + std::string(cols[i].name);
  out += "\n";
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + csv_field(cols[i].get(r));
    out += "\n";
  }
  return out;
}

std::vector<WorkloadReport> parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ScenarioError("empty CSV");
  auto header = csv_split(line);
  const auto& cols = columns();
  std::vector<const Column*> order;
  for (const auto& h : header) {
    auto it = std::find_if(cols.begin(), cols.end(), [&](const Column& c) { return h == c.name; });
    if (it == cols.end()) throw ScenarioError("unknown CSV column " + h);
    order.push_back(&*it);
  }
  std::vector<WorkloadReport> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = csv_split(line);
    if (fields.size() != order.size()) throw ScenarioError("CSV row with " + std::to_string(fields.size()) + " fields");
    WorkloadReport r;
    try {
      for (std::size_t i = 0; i < order.size(); ++i) order[i]->set(r, fields[i]);
    } catch (const std::logic_error& e) {
      throw ScenarioError(std::string("bad CSV number: ") + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_table(const std::vector<WorkloadReport>& reports, const std::vector<UnionComparison>& comparisons) {
  std::ostringstream out;
  out << std::left << std::setw(22) << "scenario" << std::setw(15) << "mode" << std::right << std::setw(11)
      << "t_prog ms" << std::setw(11) << "t_core ms" << std::setw(11) << "t_cond ms" << std::setw(11) << "t_extr ms"
      << std::setw(11) << "t_enc ms" << std::setw(11) << "wall ms" << std::setw(10) << "events" << std::setw(10)
      << "emitted" << std::setw(12) << "bytes" << std::setw(12) << "pred_evals" << "\n";
  for (const auto& r : reports)
    out << std::left << std::setw(22) << r.scenario << std::setw(15) << r.mode << std::right << std::setw(11)
        << ms(r.t_prog_ns) << std::setw(11) << ms(r.t_core_ns) << std::setw(11) << ms(r.t_cond_ns) << std::setw(11)
        << ms(r.t_extract_ns) << std::setw(11) << ms(r.t_encode_and_com_ns) << std::setw(11)
        << ms(r.scenario_wall_ns) << std::setw(10) << r.engine_events << std::setw(10) << r.events_emitted
        << std::setw(12) << r.bytes_emitted << std::setw(12) << r.predicate_evaluations << "\n";

  bool any_clients = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.analyzers > 0; });
  if (any_clients) {
    out << "\n"
        << std::left << std::setw(22) << "scenario" << std::right << std::setw(11) << "t_filt ms" << std::setw(11)
        << "t_dec ms" << std::setw(11) << "t_rebl ms" << std::setw(11) << "t_exec ms" << std::setw(10) << "received"
        << "\n";
    for (const auto& r : reports)
      if (r.analyzers)
        out << std::left << std::setw(22) << r.scenario << std::right << std::setw(11) << ms(r.t_filter_ns)
            << std::setw(11) << ms(r.t_decode_ns) << std::setw(11) << ms(r.t_rebuild_ns) << std::setw(11)
            << ms(r.t_exec_ns) << std::setw(10) << r.analyzer_events << "\n";
  }

  bool any_subs = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return !r.subscriptions.empty(); });
  if (any_subs) {
    out << "\n" << std::left << std::setw(22) << "scenario" << std::setw(10) << "client" << std::setw(16) << "filter"
        << std::right << std::setw(10) << "events" << std::setw(12) << "bytes" << "\n";
    for (const auto& r : reports)
      for (const auto& s : r.subscriptions)
        out << std::left << std::setw(22) << r.scenario << std::setw(10) << s.client << std::setw(16) << s.id
            << std::right << std::setw(10) << s.events << std::setw(12) << s.bytes << "\n";
  }

  if (!comparisons.empty()) {
    out << "\n"
        << std::left << std::setw(22) << "union vs sequential" << std::right << std::setw(8) << "filters"
        << std::setw(10) << "events" << std::setw(14) << "merged evals" << std::setw(14) << "seq evals"
        << std::setw(8) << "ratio" << std::setw(12) << "merged ms" << std::setw(12) << "seq ms" << std::setw(8)
        << "bound" << "\n";
    for (const auto& c : comparisons) {
      double ratio = c.sequential_evaluations
                         ? static_cast<double>(c.merged_evaluations) / static_cast<double>(c.sequential_evaluations)
                         : 0.0;
      out << std::left << std::setw(22) << c.scenario << std::right << std::setw(8) << c.filters << std::setw(10)
          << c.events << std::setw(14) << c.merged_evaluations << std::setw(14) << c.sequential_evaluations
          << std::setw(8) << std::fixed << std::setprecision(3) << ratio << std::setw(12) << ms(c.merged_ns)
          << std::setw(12) << ms(c.sequential_ns) << std::setw(8) << (c.bound_holds ? "ok" : "over") << "\n";
    }
  }
  return out.str();
}

void write_reports(const std::filesystem::path& dir, const std::vector<WorkloadReport>& reports,
                   const std::vector<UnionComparison>& comparisons) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.csv") << render_csv(reports);
  std::ofstream(dir / "report.txt") << render_table(reports, comparisons);
}

}  // namespace tracelens::bench
