#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>

namespace oracle {

using namespace tracelens;
using filter::Atom;
using filter::Pattern;

std::vector<std::vector<int>> queens_solutions(int n) {
  std::vector<int> cols(static_cast<std::size_t>(n));
  std::iota(cols.begin(), cols.end(), 1);
  std::vector<std::vector<int>> out;
  do {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i)
      for (int j = i + 1; j < n && ok; ++j)
        if (std::abs(cols[i] - cols[j]) == j - i) ok = false;
    if (ok) out.push_back(cols);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return out;
}

std::int64_t queens_count(int n) { return static_cast<std::int64_t>(queens_solutions(n).size()); }

std::int64_t csp_count(const corpus::CspInstance& csp) {
  int n = csp.options.vars;
  int d = csp.options.domain;
  std::vector<std::int64_t> x(static_cast<std::size_t>(n), 1);
  std::int64_t count = 0;
  while (true) {
    bool ok = true;
    for (const auto& c : csp.constraints) {
      auto xi = x[c.i];
      auto xj = x[c.j];
      bool holds = true;
      switch (c.kind) {
        case corpus::BinaryConstraint::Kind::ne_offset: holds = xi != xj + c.k; break;
        case corpus::BinaryConstraint::Kind::lt: holds = xi < xj; break;
        case corpus::BinaryConstraint::Kind::le_offset: holds = xi <= xj + c.k; break;
        case corpus::BinaryConstraint::Kind::sum_ne: holds = xi + xj != c.k; break;
      }
      if (!holds) {
        ok = false;
        break;
      }
    }
    if (ok) ++count;
    int i = 0;
    while (i < n && x[i] == d) x[i++] = 1;
    if (i == n) break;
    ++x[i];
  }
  return count;
}

namespace {

std::optional<std::int64_t> int_attr(const TraceEvent& e, const std::string& key) {
  auto it = e.attrs.find(key);
  if (it == e.attrs.end() || !std::holds_alternative<std::int64_t>(it->second)) return std::nullopt;
  return std::get<std::int64_t>(it->second);
}

std::optional<std::string> str_attr(const TraceEvent& e, const std::string& key) {
  auto it = e.attrs.find(key);
  if (it == e.attrs.end() || !std::holds_alternative<std::string>(it->second)) return std::nullopt;
  return std::get<std::string>(it->second);
}

bool cmp(std::int64_t x, filter::Cmp c, std::int64_t k) {
  switch (c) {
    case filter::Cmp::eq: return x == k;
    case filter::Cmp::lt: return x < k;
    case filter::Cmp::le: return x <= k;
    case filter::Cmp::gt: return x > k;
    case filter::Cmp::ge: return x >= k;
  }
  return false;
}

/// End positions reachable by matching `p` from `start`.
std::set<std::size_t> ends(const Pattern& p, std::size_t start, const std::vector<TraceEvent>& ev) {
  switch (p.kind) {
    case Pattern::Kind::event: {
      if (start >= ev.size()) return {};
      for (const auto& a : p.atoms)
        if (!atom_holds(a, ev[start])) return {};
      return {start + 1};
    }
    case Pattern::Kind::concat: {
      std::set<std::size_t> cur{start};
      for (const auto& part : p.parts) {
        std::set<std::size_t> next;
        for (auto s : cur)
          for (auto e : ends(*part, s, ev)) next.insert(e);
        cur = std::move(next);
      }
      return cur;
    }
    case Pattern::Kind::alt: {
      std::set<std::size_t> out;
      for (const auto& part : p.parts)
        for (auto e : ends(*part, start, ev)) out.insert(e);
      return out;
    }
    case Pattern::Kind::star: {
      std::set<std::size_t> out{start};
      std::vector<std::size_t> work{start};
      while (!work.empty()) {
        auto s = work.back();
        work.pop_back();
        for (auto e : ends(*p.parts[0], s, ev))
          if (out.insert(e).second) work.push_back(e);
      }
      return out;
    }
  }
  return {};
}

bool ident_like(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '$')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; });
}

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

const std::vector<std::string>& port_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (auto p : kAllPorts) out.emplace_back(port_name(p));
    return out;
  }();
  return names;
}

std::string cmp_text(std::mt19937_64& rng) {
  static const std::vector<std::string> ops{"=", "<", "<=", ">", ">="};
  return pick(rng, ops);
}

std::string port_atom(std::mt19937_64& rng) {
  if (rng() % 2) return "port = " + pick(rng, port_names());
  std::string s = "port in (";
  int k = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < k; ++i) s += (i ? ", " : "") + pick(rng, port_names());
  return s + ")";
}

std::string other_atom(std::mt19937_64& rng, const Vocabulary& v) {
  switch (rng() % 5) {
    case 0:
      if (!v.preds.empty()) {
        const auto& p = pick(rng, v.preds);
        auto slash = p.rfind('/');
        return "pred = " + filter_name(p.substr(0, slash)) + "/" + p.substr(slash + 1);
      }
      return "true";
    case 1: return "depth " + cmp_text(rng) + " " + std::to_string(1 + rng() % static_cast<std::uint64_t>(v.max_depth));
    case 2: return "chrono " + cmp_text(rng) + " " + std::to_string(rng() % (v.events + 1));
    case 3:
      if (!v.vars.empty()) return "variable = " + filter_name(pick(rng, v.vars));
      return "true";
    default: return "true";
  }
}

std::string conjunction(std::mt19937_64& rng, const Vocabulary& v, bool need_port) {
  std::vector<std::string> atoms;
  if (need_port || rng() % 3 != 0) atoms.push_back(port_atom(rng));
  int extra = static_cast<int>(rng() % 3);
  if (atoms.empty() && extra == 0) extra = 1;
  for (int i = 0; i < extra; ++i) atoms.push_back(other_atom(rng, v));
  std::shuffle(atoms.begin(), atoms.end(), rng);
  std::string s;
  for (std::size_t i = 0; i < atoms.size(); ++i) s += (i ? " and " : "") + atoms[i];
  return s;
}

/// Regex whose first events always test the port when `need_port`.
std::string regex(std::mt19937_64& rng, const Vocabulary& v, int depth, bool need_port) {
  int choice = depth <= 0 ? 0 : static_cast<int>(rng() % 4);
  switch (choice) {
    case 1: {
      // concatenation; only the head is at a first position unless it is nullable,
      // so keep the head non-starred
      auto head = regex(rng, v, depth - 1, need_port);
      auto tail = regex(rng, v, depth - 1, false);
      if (rng() % 3 == 0) tail = "(" + tail + ")*";
      if (rng() % 2) tail = tail + " ; " + regex(rng, v, 0, false);
      return "(" + head + ") ; (" + tail + ")";
    }
    case 2: return "(" + regex(rng, v, depth - 1, need_port) + ") | (" + regex(rng, v, depth - 1, need_port) + ")";
    case 3: return "(" + regex(rng, v, depth - 1, need_port) + ") ; (" + regex(rng, v, 0, false) + ")*";
    default: return conjunction(rng, v, need_port);
  }
}

std::string attrs(std::mt19937_64& rng) {
  static const std::vector<std::string> groups{"depths", "goal", "delta", "domains", "constraint", "port", "chrono"};
  if (rng() % 4 == 0) return "";
  std::vector<std::string> chosen;
  for (const auto& g : groups)
    if (rng() % 3 == 0) chosen.push_back(g);
  if (chosen.empty()) chosen.push_back(pick(rng, groups));
  std::string s = " attrs ";
  for (std::size_t i = 0; i < chosen.size(); ++i) s += (i ? ", " : "") + chosen[i];
  return s;
}

}  // namespace

bool atom_holds(const Atom& a, const TraceEvent& e) {
  switch (a.kind) {
    case Atom::Kind::truth: return true;
    case Atom::Kind::port:
      for (auto p : kAllPorts)
        if (a.ports.test(static_cast<std::size_t>(p)) && port_name(p) == port_name(e.port)) return true;
      return false;
    case Atom::Kind::pred: {
      auto p = str_attr(e, "pred");
      return p && *p == a.text;
    }
    case Atom::Kind::depth: {
      auto d = int_attr(e, "depth");
      return d && cmp(*d, a.cmp, a.value);
    }
    case Atom::Kind::chrono: return cmp(static_cast<std::int64_t>(e.chrono.value), a.cmp, a.value);
    case Atom::Kind::variable: {
      auto v = str_attr(e, "var");
      return v && *v == a.text;
    }
  }
  return false;
}

std::vector<bool> naive_matches(const filter::FilterSpec& spec, const std::vector<TraceEvent>& events) {
  std::vector<bool> out(events.size(), false);
  for (std::size_t i = 0; i < events.size(); ++i)
    for (auto e : ends(*spec.pattern, i, events))
      if (e > i) out[e - 1] = true;
  return out;
}

TraceEvent project(const TraceEvent& e, const std::set<AttrGroup>& groups, std::vector<std::string> tags) {
  TraceEvent out;
  out.id = e.id;
  out.chrono = e.chrono;
  out.port = e.port;
  for (const auto& [k, v] : e.attrs) {
    AttrGroup g;
    if (k == "goal" || k == "pred" || k == "solution" || k == "error")
      g = AttrGroup::goal;
    else if (k == "var" || k == "domain" || k == "removed" || k == "value")
      g = AttrGroup::domains;
    else if (k == "constraint" || k == "ctext")
      g = AttrGroup::constraint;
    else
      g = AttrGroup::depths;
    if (groups.contains(g)) out.attrs.emplace(k, v);
  }
  if (groups.contains(AttrGroup::delta)) out.delta = e.delta;
  std::sort(tags.begin(), tags.end());
  out.tags = std::move(tags);
  return out;
}

std::vector<TraceEvent> client_side(const std::vector<TraceEvent>& full, const std::vector<filter::FilterSpec>& filters) {
  std::vector<std::vector<bool>> matches;
  for (const auto& f : filters) matches.push_back(naive_matches(f, full));
  std::vector<TraceEvent> out;
  for (std::size_t i = 0; i < full.size(); ++i) {
    std::vector<std::string> tags;
    std::set<AttrGroup> groups;
    for (std::size_t k = 0; k < filters.size(); ++k)
      if (matches[k][i]) {
        tags.push_back(filters[k].id);
        groups.insert(filters[k].wanted_attrs.begin(), filters[k].wanted_attrs.end());
      }
    if (!tags.empty()) out.push_back(project(full[i], groups, std::move(tags)));
  }
  return out;
}

Vocabulary vocabulary(const std::vector<TraceEvent>& events) {
  Vocabulary v;
  std::set<std::string> preds, vars;
  for (const auto& e : events) {
    if (auto p = str_attr(e, "pred")) preds.insert(*p);
    if (auto x = str_attr(e, "var")) vars.insert(*x);
    if (auto d = int_attr(e, "depth")) v.max_depth = std::max(v.max_depth, *d);
  }
  v.preds.assign(preds.begin(), preds.end());
  v.vars.assign(vars.begin(), vars.end());
  v.events = std::max<std::uint64_t>(1, events.size());
  return v;
}

std::string filter_name(const std::string& name) {
  if (ident_like(name)) return name;
  std::string s = "'";
  for (char c : name) {
    if (c == '\'' || c == '\\') s += '\\';
    s += c;
  }
  return s + "'";
}

std::string random_filter(std::mt19937_64& rng, const std::string& id, const Vocabulary& v, bool sequence_allowed) {
  std::string body;
  if (sequence_allowed && rng() % 3 == 0)
    body = "seq ( " + regex(rng, v, 2, false) + " )";
  else
    body = "when " + conjunction(rng, v, false);
  return "filter " + id + " { " + body + attrs(rng) + " }";
}

std::string random_port_filter(std::mt19937_64& rng, const std::string& id, const Vocabulary& v) {
  std::string body;
  if (rng() % 3 == 0)
    body = "seq ( " + regex(rng, v, 2, true) + " )";
  else
    body = "when " + conjunction(rng, v, true);
  return "filter " + id + " { " + body + attrs(rng) + " }";
}

}  // namespace oracle
