#pragma once

#include <string>
#include <vector>

#include "tracelens/corpus.hpp"
#include "tracelens/engine.hpp"

namespace fixture {

struct Recording {
  tracelens::FullState initial;
  std::vector<tracelens::TraceEvent> events;
  std::vector<tracelens::FullState> states;  // states[i]: after events[i]
  std::int64_t solutions = 0;
};

inline Recording record(const std::string& program, const std::string& goal, bool keep_states = false) {
  using namespace tracelens::clp;
  Engine engine(Program::load(program), parse_goal(goal));
  Recording r;
  r.initial = engine.snapshot();
  while (!engine.terminal()) {
    r.events.push_back(engine.step());
    if (keep_states) r.states.push_back(engine.snapshot());
  }
  r.solutions = engine.solutions();
  return r;
}

inline Recording record(const tracelens::corpus::Workload& w, bool keep_states = false) {
  return record(w.program, w.goal, keep_states);
}

inline std::string normalise_vars(std::string s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += s[i];
    if (s[i] == '_' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
      out += 'G';
      while (i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) ++i;
    }
  }
  return out;
}

inline std::string collapse_spaces(const std::string& s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

}  // namespace fixture
