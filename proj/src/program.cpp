#include "tracelens/program.hpp"

#include <cctype>
#include <optional>
#include <unordered_map>

namespace tracelens::clp {

namespace {

bool is_symbol_char(char c) {
  switch (c) {
    case '+': case '-': case '*': case '/': case '\\': case '^': case '<': case '>':
    case '=': case '~': case ':': case '.': case '?': case '@': case '#': case '&': case '$':
      return true;
    default:
      return false;
  }
}

struct Token {
  enum class Kind { atom, qatom, var, integer, punct, end, eof } kind = Kind::eof;
  std::string text;
  std::int64_t value = 0;
  int line = 1;
  int column = 1;
  bool layout_before = false;  // whitespace precedes the token
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    bool layout = skip_layout();
    Token t;
    t.line = line_;
    t.column = col_;
    t.layout_before = layout;
    if (pos_ >= src_.size()) {
      t.kind = Token::Kind::eof;
      return t;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string digits;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) digits += advance();
      t.kind = Token::Kind::integer;
      t.text = digits;
      try {
        t.value = std::stoll(digits);
      } catch (const std::out_of_range&) {
        throw ParseError("integer out of range", t.line, t.column);
      }
      return t;
    }
    if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = Token::Kind::var;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        t.text += advance();
      return t;
    }
    if (std::islower(static_cast<unsigned char>(c))) {
      t.kind = Token::Kind::atom;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        t.text += advance();
      return t;
    }
    if (c == '\'') {
      advance();
      t.kind = Token::Kind::qatom;
      while (true) {
        if (pos_ >= src_.size()) throw ParseError("unterminated quoted atom", t.line, t.column);
        char q = advance();
        if (q == '\\' && pos_ < src_.size()) {
          t.text += advance();
          continue;
        }
        if (q == '\'') {
          if (pos_ < src_.size() && src_[pos_] == '\'') {
            t.text += advance();
            continue;
          }
          break;
        }
        t.text += q;
      }
      return t;
    }
    if (c == '(' || c == ')' || c == '[' || c == ']' || c == ',' || c == '|' || c == '!' || c == ';') {
      t.kind = (c == '!' || c == ';') ? Token::Kind::atom : Token::Kind::punct;
      t.text = std::string(1, advance());
      return t;
    }
    if (is_symbol_char(c)) {
      // A lone '.' followed by layout or end of input terminates a clause.
      if (c == '.' && end_follows(pos_ + 1)) {
        advance();
        t.kind = Token::Kind::end;
        t.text = ".";
        return t;
      }
      std::size_t start = pos_;
      std::size_t stop = start;
      while (stop < src_.size() && is_symbol_char(src_[stop])) ++stop;
      // `foo:-.` : split off a terminating period.
      if (stop - start > 1 && src_[stop - 1] == '.' && end_follows(stop)) --stop;
      while (pos_ < stop) t.text += advance();
      t.kind = Token::Kind::atom;
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", t.line, t.column);
  }

 private:
  bool end_follows(std::size_t at) const {
    return at >= src_.size() || std::isspace(static_cast<unsigned char>(src_[at])) || src_[at] == '%';
  }

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

  bool skip_layout() {
    bool any = false;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
        any = true;
      } else if (c == '%') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        any = true;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        int l = line_, col = col_;
        advance();
        advance();
        while (true) {
          if (pos_ + 1 >= src_.size()) throw ParseError("unterminated block comment", l, col);
          if (src_[pos_] == '*' && src_[pos_ + 1] == '/') {
            advance();
            advance();
            break;
          }
          advance();
        }
        any = true;
      } else {
        break;
      }
    }
    return any;
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

  /// Reads a term followed by the clause terminator.
  TermPtr clause_term() {
    reset_vars();
    auto t = parse(1200);
    if (tok_.kind != Token::Kind::end) fail_here("expected '.' at end of clause");
    tok_ = lex_.next();
    return t;
  }

  TermPtr whole_term() {
    reset_vars();
    auto t = parse(1200);
    if (tok_.kind == Token::Kind::end) tok_ = lex_.next();
    if (tok_.kind != Token::Kind::eof) fail_here("unexpected trailing input");
    return t;
  }

  std::uint32_t var_count() const { return static_cast<std::uint32_t>(names_.size()); }
  const std::vector<std::string>& var_names() const { return names_; }
  int line() const { return tok_.line; }
  int column() const { return tok_.column; }

 private:
  [[noreturn]] void fail_here(const std::string& msg) const {
    std::string what = msg;
    if (tok_.kind == Token::Kind::eof) what += " (found end of input)";
    else what += " (found '" + tok_.text + "')";
    throw ParseError(what, tok_.line, tok_.column);
  }

  void reset_vars() {
    vars_.clear();
    names_.clear();
  }

  TermPtr variable(const std::string& name) {
    if (name == "_") {
      names_.push_back("_");
      return make_var(static_cast<std::uint32_t>(names_.size() - 1));
    }
    auto it = vars_.find(name);
    if (it != vars_.end()) return make_var(it->second);
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.push_back(name);
    vars_.emplace(name, id);
    return make_var(id);
  }

  bool is_term_start() const {
    switch (tok_.kind) {
      case Token::Kind::atom: case Token::Kind::qatom: case Token::Kind::var: case Token::Kind::integer:
        return true;
      case Token::Kind::punct:
        return tok_.text == "(" || tok_.text == "[";
      default:
        return false;
    }
  }

  std::optional<std::pair<std::string, const OpDef*>> peek_infix() const {
    if (tok_.kind == Token::Kind::punct && tok_.text == ",") return std::make_pair(std::string(","), infix_op(","));
    if (tok_.kind == Token::Kind::punct && tok_.text == "|") return std::make_pair(std::string(";"), infix_op(";"));
    if (tok_.kind == Token::Kind::atom) {
      if (const auto* op = infix_op(tok_.text)) return std::make_pair(tok_.text, op);
    }
    return std::nullopt;
  }

  TermPtr parse(int max_prec) {
    auto [left, left_prec] = primary(max_prec);
    while (true) {
      auto inf = peek_infix();
      if (!inf) break;
      const auto& [name, op] = *inf;
      int left_max = op->type == OpDef::Type::yfx ? op->priority : op->priority - 1;
      int right_max = op->type == OpDef::Type::xfy ? op->priority : op->priority - 1;
      if (op->priority > max_prec || left_prec > left_max) break;
      // '|' is only an infix operator at the top level of a body.
      if (tok_.kind == Token::Kind::punct && tok_.text == "|" && max_prec < 1100) break;
      tok_ = lex_.next();
      auto right = parse(right_max);
      left = make_compound(name, {left, right});
      left_prec = op->priority;
    }
    return left;
  }

  std::vector<TermPtr> arguments() {
    std::vector<TermPtr> args;
    args.push_back(parse(999));
    while (tok_.kind == Token::Kind::punct && tok_.text == ",") {
      tok_ = lex_.next();
      args.push_back(parse(999));
    }
    expect(")");
    return args;
  }

  void expect(const char* punct) {
    if (tok_.kind != Token::Kind::punct || tok_.text != punct) fail_here(std::string("expected '") + punct + "'");
    tok_ = lex_.next();
  }

  std::pair<TermPtr, int> primary(int max_prec) {
    Token t = tok_;
    switch (t.kind) {
      case Token::Kind::integer:
        tok_ = lex_.next();
        return {make_int(t.value), 0};
      case Token::Kind::var:
        tok_ = lex_.next();
        return {variable(t.text), 0};
      case Token::Kind::punct:
        if (t.text == "(") {
          tok_ = lex_.next();
          auto inner = parse(1200);
          expect(")");
          return {inner, 0};
        }
        if (t.text == "[") {
          tok_ = lex_.next();
          if (tok_.kind == Token::Kind::punct && tok_.text == "]") {
            tok_ = lex_.next();
            return {name_or_call("[]"), 0};
          }
          std::vector<TermPtr> items{parse(999)};
          while (tok_.kind == Token::Kind::punct && tok_.text == ",") {
            tok_ = lex_.next();
            items.push_back(parse(999));
          }
          TermPtr tail;
          if (tok_.kind == Token::Kind::punct && tok_.text == "|") {
            tok_ = lex_.next();
            tail = parse(999);
          }
          expect("]");
          return {make_list(items, tail), 0};
        }
        fail_here("unexpected token");
      case Token::Kind::atom:
      case Token::Kind::qatom: {
        tok_ = lex_.next();
        bool functional = tok_.kind == Token::Kind::punct && tok_.text == "(" && !tok_.layout_before;
        if (functional) {
          tok_ = lex_.next();
          return {make_compound(t.text, arguments()), 0};
        }
        if (t.kind == Token::Kind::atom) {
          if (t.text == "-" && tok_.kind == Token::Kind::integer && !tok_.layout_before) {
            auto v = tok_.value;
            tok_ = lex_.next();
            return {make_int(-v), 0};
          }
          if (const auto* pre = prefix_op(t.text); pre && is_term_start()) {
            int arg_max = pre->type == OpDef::Type::fy ? pre->priority : pre->priority - 1;
            int prec = pre->priority;
            if (prec > max_prec) {
              prec = 999;
              arg_max = 999;
            }
            auto arg = parse(arg_max);
            return {make_compound(t.text, {arg}), prec};
          }
          if (infix_op(t.text) && !prefix_op(t.text)) {
            throw ParseError("unexpected operator '" + t.text + "'", t.line, t.column);
          }
        }
        return {make_atom(t.text), 0};
      }
      case Token::Kind::end:
        throw ParseError("unexpected end of clause", t.line, t.column);
      case Token::Kind::eof:
        throw ParseError("unexpected end of input", t.line, t.column);
    }
    fail_here("unexpected token");
  }

  TermPtr name_or_call(const std::string& name) {
    if (tok_.kind == Token::Kind::punct && tok_.text == "(" && !tok_.layout_before) {
      tok_ = lex_.next();
      return make_compound(name, arguments());
    }
    return make_atom(name);
  }

  Lexer lex_;
  Token tok_;
  std::unordered_map<std::string, std::uint32_t> vars_;
  std::vector<std::string> names_;
};

void flatten_body(const TermPtr& t, std::vector<TermPtr>& out) {
  if (t->is(",", 2)) {
    flatten_body(t->args[0], out);
    flatten_body(t->args[1], out);
  } else if (!t->is("true", 0)) {
    out.push_back(t);
  }
}

}  // namespace

std::string indicator(std::string_view name, std::size_t arity) {
  return std::string(name) + "/" + std::to_string(arity);
}

bool is_builtin(std::string_view name, std::size_t arity) {
  static const char* const k2[] = {"=", "\\=", "is", "<", ">", "=<", ">=", "=:=", "=\\="};
  if (arity == 2)
    for (const auto* b : k2)
      if (name == b) return true;
  if (arity == 0) return name == "true" || name == "fail" || name == "false";
  if (arity == 1) return name == "fd_post" || name == "fd_labeling" || name == "$call$" || name == ",";
  if (arity == 3) return name == "fd_domain";
  return false;
}

Program Program::load(std::string_view source) {
  Program p;
  Parser parser(source);
  while (!parser.at_eof()) {
    int line = parser.line(), col = parser.column();
    auto t = parser.clause_term();
    Clause c;
    if (t->is(":-", 2)) {
      c.head = t->args[0];
      flatten_body(t->args[1], c.body);
    } else {
      c.head = t;
    }
    if (!c.head->is_callable()) throw ParseError("clause head must be an atom or compound term", line, col);
    if (is_builtin(c.head->name, c.head->arity()) || c.head->is(",", 2))
      throw ParseError("cannot redefine built-in " + indicator(c.head->name, c.head->arity()), line, col);
    for (const auto& g : c.body)
      if (g->is_int()) throw ParseError("integer used as a goal", line, col);
    c.var_count = parser.var_count();
    p.index_[indicator(c.head->name, c.head->arity())].push_back(p.clauses_.size());
    p.clauses_.push_back(std::move(c));
  }
  return p;
}

std::span<const std::size_t> Program::clauses_for(std::string_view name, std::size_t arity) const {
  auto it = index_.find(indicator(name, arity));
  if (it == index_.end()) return {};
  return it->second;
}

bool Program::defines(std::string_view name, std::size_t arity) const {
  return index_.contains(indicator(name, arity));
}

TermPtr parse_term(std::string_view text, std::vector<std::string>* names) {
  Parser parser(text);
  auto t = parser.whole_term();
  if (names) *names = parser.var_names();
  return t;
}

Goal parse_goal(std::string_view text) {
  Goal g;
  g.term = parse_term(text, &g.var_names);
  return g;
}

}  // namespace tracelens::clp
