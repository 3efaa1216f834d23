#include "tracelens/filter.hpp"

#include <algorithm>
#include <cctype>

namespace tracelens::filter {

namespace {

struct Token {
  enum class Kind { ident, integer, quoted, symbol, eof } kind = Kind::eof;
  std::string text;
  std::int64_t value = 0;
  int line = 1;
  int column = 1;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip();
    Token t;
    t.line = line_;
    t.column = col_;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    auto ident_char = [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '$'; };
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      t.kind = Token::Kind::ident;
      while (pos_ < src_.size() && ident_char(src_[pos_])) t.text += advance();
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      t.kind = Token::Kind::integer;
      t.text += advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += advance();
      try {
        t.value = std::stoll(t.text);
      } catch (const std::out_of_range&) {
        throw ParseError("integer out of range", t.line, t.column);
      }
      return t;
    }
    if (c == '\'' || c == '"') {
      char q = advance();
      t.kind = Token::Kind::quoted;
      while (true) {
        if (pos_ >= src_.size()) throw ParseError("unterminated quoted name", t.line, t.column);
        char ch = advance();
        if (ch == q) break;
        if (ch == '\\' && pos_ < src_.size()) ch = advance();
        t.text += ch;
      }
      return t;
    }
    if ((c == '<' || c == '>') && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
      t.kind = Token::Kind::symbol;
      t.text += advance();
      t.text += advance();
      return t;
    }
    if (std::string_view("{}(),;|*/=<>").find(c) != std::string_view::npos) {
      t.kind = Token::Kind::symbol;
      t.text += advance();
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", t.line, t.column);
  }

 private:
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.next(); }

  bool at_eof() const { return tok_.kind == Token::Kind::eof; }
  int line() const { return tok_.line; }
  int column() const { return tok_.column; }
  std::size_t offset() const { return tok_.offset; }

  FilterSpec filter() {
    expect_ident("filter");
    if (tok_.kind != Token::Kind::ident) fail("expected filter id");
    FilterSpec spec;
    spec.id = tok_.text;
    advance();
    expect("{");
    if (is_ident("when")) {
      advance();
      auto p = std::make_shared<Pattern>();
      p->atoms = conjunction();
      spec.pattern = p;
    } else if (is_ident("seq")) {
      advance();
      expect("(");
      spec.pattern = alternation();
      expect(")");
      spec.sequence = true;
    } else {
      fail("expected 'when' or 'seq'");
    }
    spec.wanted_attrs = {AttrGroup::port, AttrGroup::chrono};
    if (is_ident("attrs")) {
      advance();
      while (true) {
        if (tok_.kind != Token::Kind::ident) fail("expected attribute selector");
        auto g = attr_group_from_name(tok_.text);
        if (!g) fail("unknown attribute selector");
        spec.wanted_attrs.insert(*g);
        advance();
        if (!is_symbol(",")) break;
        advance();
      }
    }
    expect("}");
    return spec;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::string what = msg;
    what += tok_.kind == Token::Kind::eof ? " (found end of input)" : " (found '" + tok_.text + "')";
    throw ParseError(what, tok_.line, tok_.column);
  }
  void advance() { tok_ = lex_.next(); }
  bool is_ident(std::string_view s) const { return tok_.kind == Token::Kind::ident && tok_.text == s; }
  bool is_symbol(std::string_view s) const { return tok_.kind == Token::Kind::symbol && tok_.text == s; }
  void expect(std::string_view s) {
    if (!is_symbol(s)) fail("expected '" + std::string(s) + "'");
    advance();
  }
  void expect_ident(std::string_view s) {
    if (!is_ident(s)) fail("expected '" + std::string(s) + "'");
    advance();
  }

  PatternPtr alternation() {
    std::vector<PatternPtr> parts{concatenation()};
    while (is_symbol("|")) {
      advance();
      parts.push_back(concatenation());
    }
    if (parts.size() == 1) return parts[0];
    auto p = std::make_shared<Pattern>();
    p->kind = Pattern::Kind::alt;
    p->parts = std::move(parts);
    return p;
  }

  PatternPtr concatenation() {
    std::vector<PatternPtr> parts{repetition()};
    while (is_symbol(";")) {
      advance();
      parts.push_back(repetition());
    }
    if (parts.size() == 1) return parts[0];
    auto p = std::make_shared<Pattern>();
    p->kind = Pattern::Kind::concat;
    p->parts = std::move(parts);
    return p;
  }

  PatternPtr repetition() {
    auto p = primary();
    while (is_symbol("*")) {
      advance();
      auto s = std::make_shared<Pattern>();
      s->kind = Pattern::Kind::star;
      s->parts = {p};
      p = s;
    }
    return p;
  }

  PatternPtr primary() {
    if (is_symbol("(")) {
      advance();
      auto p = alternation();
      expect(")");
      return p;
    }
    auto p = std::make_shared<Pattern>();
    p->atoms = conjunction();
    return p;
  }

  std::vector<Atom> conjunction() {
    std::vector<Atom> atoms{atom()};
    while (is_ident("and")) {
      advance();
      atoms.push_back(atom());
    }
    return atoms;
  }

  Port port_name_token() {
    if (tok_.kind != Token::Kind::ident) fail("expected port name");
    auto p = port_from_name(tok_.text);
    if (!p) fail("unknown port");
    advance();
    return *p;
  }

  std::string name_token() {
    if (tok_.kind != Token::Kind::ident && tok_.kind != Token::Kind::quoted) fail("expected a name");
    auto s = tok_.text;
    advance();
    return s;
  }

  Cmp comparison() {
    if (tok_.kind != Token::Kind::symbol) fail("expected comparison");
    const auto& s = tok_.text;
    Cmp c;
    if (s == "=") c = Cmp::eq;
    else if (s == "<") c = Cmp::lt;
    else if (s == "<=") c = Cmp::le;
    else if (s == ">") c = Cmp::gt;
    else if (s == ">=") c = Cmp::ge;
    else fail("expected comparison");
    advance();
    return c;
  }

  std::int64_t integer() {
    if (tok_.kind != Token::Kind::integer) fail("expected integer");
    auto v = tok_.value;
    advance();
    return v;
  }

  Atom atom() {
    Atom a;
    if (tok_.kind != Token::Kind::ident) fail("expected predicate");
    auto word = tok_.text;
    if (word == "true") {
      advance();
      return a;
    }
    if (word == "port") {
      advance();
      a.kind = Atom::Kind::port;
      if (is_symbol("=")) {
        advance();
        a.ports.set(static_cast<std::size_t>(port_name_token()));
        return a;
      }
      expect_ident("in");
      expect("(");
      if (!is_symbol(")")) {
        a.ports.set(static_cast<std::size_t>(port_name_token()));
        while (is_symbol(",")) {
          advance();
          a.ports.set(static_cast<std::size_t>(port_name_token()));
        }
      }
      expect(")");
      return a;
    }
    if (word == "pred") {
      advance();
      expect("=");
      a.kind = Atom::Kind::pred;
      auto name = name_token();
      expect("/");
      auto arity = integer();
      if (arity < 0) fail("negative arity");
      a.text = name + "/" + std::to_string(arity);
      return a;
    }
    if (word == "depth" || word == "chrono") {
      advance();
      a.kind = word == "depth" ? Atom::Kind::depth : Atom::Kind::chrono;
      a.cmp = comparison();
      a.value = integer();
      return a;
    }
    if (word == "variable") {
      advance();
      expect("=");
      a.kind = Atom::Kind::variable;
      a.text = name_token();
      return a;
    }
    fail("unknown predicate");
  }

  Lexer lex_;
  Token tok_;
};

bool compare(std::int64_t x, Cmp c, std::int64_t k) {
  switch (c) {
    case Cmp::eq: return x == k;
    case Cmp::lt: return x < k;
    case Cmp::le: return x <= k;
    case Cmp::gt: return x > k;
    case Cmp::ge: return x >= k;
  }
  return false;
}

std::string_view cmp_text(Cmp c) {
  switch (c) {
    case Cmp::eq: return "=";
    case Cmp::lt: return "<";
    case Cmp::le: return "<=";
    case Cmp::gt: return ">";
    case Cmp::ge: return ">=";
  }
  return "?";
}

Guard make_guard(const std::vector<Atom>& atoms) {
  Guard g;
  for (const auto& a : atoms) {
    if (a.kind == Atom::Kind::port) {
      g.ports = g.ports ? (*g.ports & a.ports) : a.ports;
    } else if (a.kind != Atom::Kind::truth) {
      g.rest.push_back(a);
    }
  }
  return g;
}

struct Glushkov {
  Automaton& a;

  struct Info {
    bool nullable = false;
    std::vector<int> first;
    std::vector<int> last;
  };

  static void add_all(std::vector<int>& to, const std::vector<int>& from) { to.insert(to.end(), from.begin(), from.end()); }

  Info visit(const Pattern& p) {
    Info out;
    switch (p.kind) {
      case Pattern::Kind::event: {
        int id = static_cast<int>(a.positions.size());
        a.positions.push_back(make_guard(p.atoms));
        a.follow.emplace_back();
        out.first = {id};
        out.last = {id};
        return out;
      }
      case Pattern::Kind::concat: {
        out = visit(*p.parts[0]);
        for (std::size_t i = 1; i < p.parts.size(); ++i) {
          auto next = visit(*p.parts[i]);
          for (int x : out.last) add_all(a.follow[x], next.first);
          if (out.nullable) add_all(out.first, next.first);
          if (next.nullable) add_all(next.last, out.last);
          out.last = std::move(next.last);
          out.nullable = out.nullable && next.nullable;
        }
        return out;
      }
      case Pattern::Kind::alt: {
        for (const auto& part : p.parts) {
          auto info = visit(*part);
          add_all(out.first, info.first);
          add_all(out.last, info.last);
          out.nullable = out.nullable || info.nullable;
        }
        return out;
      }
      case Pattern::Kind::star: {
        out = visit(*p.parts[0]);
        for (int x : out.last) add_all(a.follow[x], out.first);
        out.nullable = true;
        return out;
      }
    }
    return out;
  }
};

void sort_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

bool Atom::eval(const TraceEvent& e) const {
  switch (kind) {
    case Kind::port: return ports.test(static_cast<std::size_t>(e.port));
    case Kind::pred: {
      auto p = attr_str(e.attrs, "pred");
      return p && *p == text;
    }
    case Kind::depth: {
      auto d = attr_int(e.attrs, "depth");
      return d && compare(*d, cmp, value);
    }
    case Kind::chrono: return compare(static_cast<std::int64_t>(e.chrono.value), cmp, value);
    case Kind::variable: {
      auto v = attr_str(e.attrs, "var");
      return v && *v == text;
    }
    case Kind::truth: return true;
  }
  return false;
}

std::string Atom::key() const {
  switch (kind) {
    case Kind::port: {
      std::string s = "port in (";
      bool first = true;
      for (auto p : kAllPorts)
        if (ports.test(static_cast<std::size_t>(p))) {
          if (!first) s += ",";
          first = false;
          s += port_name(p);
        }
      return s + ")";
    }
    case Kind::pred: return "pred = " + text;
    case Kind::depth: return "depth " + std::string(cmp_text(cmp)) + " " + std::to_string(value);
    case Kind::chrono: return "chrono " + std::string(cmp_text(cmp)) + " " + std::to_string(value);
    case Kind::variable: return "variable = " + text;
    case Kind::truth: return "true";
  }
  return "?";
}

std::vector<FilterSpec> parse_filters(std::string_view source) {
  Parser p(source);
  std::vector<FilterSpec> out;
  std::set<std::string> ids;
  while (!p.at_eof()) {
    auto f = p.filter();
    if (!ids.insert(f.id).second) throw DuplicateId("duplicate filter id " + f.id);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::string> split_filters(std::string_view source) {
  Parser p(source);
  std::vector<std::string> out;
  std::set<std::string> ids;
  while (!p.at_eof()) {
    auto start = p.offset();
    auto f = p.filter();
    if (!ids.insert(f.id).second) throw DuplicateId("duplicate filter id " + f.id);
    auto text = std::string(source.substr(start, p.offset() - start));
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    out.push_back(std::move(text));
  }
  return out;
}

FilterSpec parse_filter(std::string_view source) {
  Parser p(source);
  auto f = p.filter();
  if (!p.at_eof()) throw ParseError("unexpected input after filter", p.line(), p.column());
  return f;
}

Automaton compile(const FilterSpec& spec) {
  Automaton a;
  Glushkov g{a};
  auto info = g.visit(*spec.pattern);
  a.first = std::move(info.first);
  sort_unique(a.first);
  a.last.assign(a.positions.size(), false);
  for (int x : info.last) a.last[x] = true;
  for (auto& f : a.follow) sort_unique(f);
  return a;
}

FilterRunner::FilterRunner(Automaton automaton) : a_(std::move(automaton)), mark_(a_.positions.size(), 0) {}

bool FilterRunner::step(const TraceEvent& e) {
  std::vector<int> candidates;
  auto consider = [&](int p) {
    if (!mark_[p]) {
      mark_[p] = 1;
      candidates.push_back(p);
    }
  };
  for (int p : a_.first) consider(p);
  for (int q : active_)
    for (int p : a_.follow[q]) consider(p);
  std::vector<int> next;
  bool accept = false;
  for (int p : candidates) {
    mark_[p] = 0;
    const auto& g = a_.positions[p];
    bool ok = true;
    if (g.ports) {
      ++evaluations_;
      ok = g.ports->test(static_cast<std::size_t>(e.port));
    }
    for (std::size_t i = 0; ok && i < g.rest.size(); ++i) {
      ++evaluations_;
      ok = g.rest[i].eval(e);
    }
    if (ok) {
      next.push_back(p);
      accept = accept || a_.last[p];
    }
  }
  std::sort(next.begin(), next.end());
  active_ = std::move(next);
  return accept;
}

MergedMatcher MergedMatcher::build(const std::vector<std::pair<std::string, Automaton>>& machines) {
  MergedMatcher m;
  std::set<std::string> seen;
  std::map<std::string, int> atom_ids;
  m.first_by_port_.assign(kPortCount, {});
  for (std::size_t mi = 0; mi < machines.size(); ++mi) {
    const auto& [tag, a] = machines[mi];
    if (!seen.insert(tag).second) throw DuplicateId("duplicate filter id " + tag);
    m.tags_.push_back(tag);
    int base = static_cast<int>(m.pos_.size());
    m.offset_.push_back(base);
    for (std::size_t p = 0; p < a.positions.size(); ++p) {
      Pos pos;
      pos.guard = a.positions[p];
      pos.machine = static_cast<int>(mi);
      pos.last = a.last[p];
      for (int f : a.follow[p]) pos.follow.push_back(base + f);
      for (const auto& atom : pos.guard.rest) {
        auto [it, inserted] = atom_ids.emplace(atom.key(), static_cast<int>(m.atoms_.size()));
        if (inserted) m.atoms_.push_back(atom);
        pos.atom_ids.push_back(it->second);
      }
      m.pos_.push_back(std::move(pos));
    }
    for (int f : a.first) {
      const auto& g = m.pos_[base + f].guard;
      if (!g.ports) {
        m.first_any_.push_back(base + f);
        continue;
      }
      m.first_has_port_ = true;
      for (std::size_t port = 0; port < kPortCount; ++port)
        if (g.ports->test(port)) m.first_by_port_[port].push_back(base + f);
    }
  }
  m.mark_.assign(m.pos_.size(), 0);
  m.memo_.assign(m.atoms_.size(), -1);
  return m;
}

std::vector<std::string> MergedMatcher::match(const TraceEvent& e) {
  ++events_;
  if (pos_.empty()) return {};
  const auto port = static_cast<std::size_t>(e.port);
  std::fill(memo_.begin(), memo_.end(), -1);

  bool port_read = first_has_port_;
  std::vector<int> candidates;
  auto consider = [&](int p) {
    if (!mark_[p]) {
      mark_[p] = 1;
      candidates.push_back(p);
    }
  };
  for (int p : first_by_port_[port]) consider(p);
  for (int p : first_any_) consider(p);
  for (int q : active_)
    for (int p : pos_[q].follow) {
      const auto& g = pos_[p].guard;
      if (g.ports) {
        port_read = true;
        if (!g.ports->test(port)) continue;
      }
      consider(p);
    }
  if (port_read) ++evaluations_;

  std::vector<int> next;
  std::vector<char> hit(tags_.size(), 0);
  for (int p : candidates) {
    mark_[p] = 0;
    bool ok = true;
    const auto& pos = pos_[p];
    for (std::size_t i = 0; ok && i < pos.atom_ids.size(); ++i) {
      auto id = pos.atom_ids[i];
      if (memo_[id] < 0) {
        ++evaluations_;
        memo_[id] = atoms_[id].eval(e) ? 1 : 0;
      }
      ok = memo_[id] == 1;
    }
    if (ok) {
      next.push_back(p);
      if (pos.last) hit[pos.machine] = 1;
    }
  }
  std::sort(next.begin(), next.end());
  active_ = std::move(next);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tags_.size(); ++i)
    if (hit[i]) out.push_back(tags_[i]);
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::string, std::vector<int>> MergedMatcher::run_state() const {
  std::map<std::string, std::vector<int>> out;
  for (auto& t : tags_) out[t];
  for (int p : active_) out[tags_[pos_[p].machine]].push_back(p - offset_[pos_[p].machine]);
  return out;
}

void MergedMatcher::restore_run_state(const std::map<std::string, std::vector<int>>& state) {
  active_.clear();
  for (std::size_t mi = 0; mi < tags_.size(); ++mi) {
    auto it = state.find(tags_[mi]);
    if (it == state.end()) continue;
    int end = mi + 1 < offset_.size() ? offset_[mi + 1] : static_cast<int>(pos_.size());
    for (int local : it->second) {
      int p = offset_[mi] + local;
      if (p >= offset_[mi] && p < end) active_.push_back(p);
    }
  }
  std::sort(active_.begin(), active_.end());
}

MergedMatcher merge(const std::vector<FilterSpec>& specs) {
  std::vector<std::pair<std::string, Automaton>> machines;
  machines.reserve(specs.size());
  for (const auto& s : specs) machines.emplace_back(s.id, compile(s));
  return MergedMatcher::build(machines);
}

}  // namespace tracelens::filter
