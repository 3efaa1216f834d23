#include "tracelens/term.hpp"

#include <array>
#include <cctype>
#include <utility>

namespace tracelens::clp {

namespace {

struct NamedOp {
  std::string_view name;
  OpDef def;
};

constexpr std::array kInfix = {
    NamedOp{":-", {1200, OpDef::Type::xfx}},   NamedOp{";", {1100, OpDef::Type::xfy}},
    NamedOp{"->", {1050, OpDef::Type::xfy}},   NamedOp{",", {1000, OpDef::Type::xfy}},
    NamedOp{"=", {700, OpDef::Type::xfx}},     NamedOp{"\\=", {700, OpDef::Type::xfx}},
    NamedOp{"==", {700, OpDef::Type::xfx}},    NamedOp{"\\==", {700, OpDef::Type::xfx}},
    NamedOp{"<", {700, OpDef::Type::xfx}},     NamedOp{">", {700, OpDef::Type::xfx}},
    NamedOp{"=<", {700, OpDef::Type::xfx}},    NamedOp{">=", {700, OpDef::Type::xfx}},
    NamedOp{"=:=", {700, OpDef::Type::xfx}},   NamedOp{"=\\=", {700, OpDef::Type::xfx}},
    NamedOp{"is", {700, OpDef::Type::xfx}},    NamedOp{"#=", {700, OpDef::Type::xfx}},
    NamedOp{"#\\=", {700, OpDef::Type::xfx}},  NamedOp{"#<", {700, OpDef::Type::xfx}},
    NamedOp{"#>", {700, OpDef::Type::xfx}},    NamedOp{"#=<", {700, OpDef::Type::xfx}},
    NamedOp{"#>=", {700, OpDef::Type::xfx}},   NamedOp{"+", {500, OpDef::Type::yfx}},
    NamedOp{"-", {500, OpDef::Type::yfx}},     NamedOp{"*", {400, OpDef::Type::yfx}},
    NamedOp{"/", {400, OpDef::Type::yfx}},     NamedOp{"//", {400, OpDef::Type::yfx}},
    NamedOp{"mod", {400, OpDef::Type::yfx}},   NamedOp{"rem", {400, OpDef::Type::yfx}},
    NamedOp{"^", {200, OpDef::Type::xfy}},
};

constexpr std::array kPrefix = {
    NamedOp{"-", {200, OpDef::Type::fy}},
    NamedOp{"\\+", {900, OpDef::Type::fy}},
};

bool is_symbol_char(char c) {
  switch (c) {
    case '+': case '-': case '*': case '/': case '\\': case '^': case '<': case '>':
    case '=': case '~': case ':': case '.': case '?': case '@': case '#': case '&': case '$':
      return true;
    default:
      return false;
  }
}

bool is_alnum_(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class PlainContext final : public TermContext {
 public:
  TermPtr deref(const TermPtr& t) const override { return t; }
  std::string var_name(std::uint32_t v) const override { return "_" + std::to_string(v); }
};

class Writer {
 public:
  explicit Writer(const TermContext& ctx) : ctx_(ctx) {}

  std::string write(const TermPtr& raw, int max_prec) {
    auto t = ctx_.deref(raw);
    switch (t->kind) {
      case Term::Kind::integer: return std::to_string(t->value);
      case Term::Kind::var: return ctx_.var_name(t->var);
      case Term::Kind::atom: {
        auto s = quote_atom(t->name);
        if ((infix_op(t->name) || prefix_op(t->name)) && max_prec < 1200 && t->name != "[]") {
          auto p = infix_op(t->name) ? infix_op(t->name)->priority : prefix_op(t->name)->priority;
          if (p > max_prec) return "(" + s + ")";
        }
        return s;
      }
      case Term::Kind::compound: break;
    }
    if (t->name == "." && t->args.size() == 2) return write_list(t);
    if (t->args.size() == 2) {
      if (const auto* op = infix_op(t->name)) return write_infix(*t, *op, max_prec);
    }
    if (t->args.size() == 1) {
      if (const auto* op = prefix_op(t->name)) {
        auto arg_max = op->type == OpDef::Type::fy ? op->priority : op->priority - 1;
        auto inner = write(t->args[0], arg_max);
        auto arg = ctx_.deref(t->args[0]);
        bool space = std::isalpha(static_cast<unsigned char>(t->name[0])) || arg->is_int() ||
                     (!inner.empty() && (is_symbol_char(inner[0]) || inner[0] == '('));
        auto s = quote_atom(t->name) + (space ? " " : "") + inner;
        return op->priority > max_prec ? "(" + s + ")" : s;
      }
    }
    std::string s = quote_atom(t->name) + "(";
    for (std::size_t i = 0; i < t->args.size(); ++i) {
      if (i) s += ",";
      s += write(t->args[i], 999);
    }
    return s + ")";
  }

 private:
  std::string write_infix(const Term& t, const OpDef& op, int max_prec) {
    int left_max = op.type == OpDef::Type::yfx ? op.priority : op.priority - 1;
    int right_max = op.type == OpDef::Type::xfy ? op.priority : op.priority - 1;
    auto left = write(t.args[0], left_max);
    auto right = write(t.args[1], right_max);
    std::string s;
    if (t.name == ",") {
      s = left + "," + right;
    } else if (std::isalpha(static_cast<unsigned char>(t.name[0]))) {
      s = left + " " + t.name + " " + right;
    } else {
      s = left;
      if (!left.empty() && is_symbol_char(left.back())) s += ' ';
      s += t.name;
      if (!right.empty() && is_symbol_char(right[0])) s += ' ';
      s += right;
    }
    return op.priority > max_prec ? "(" + s + ")" : s;
  }

  std::string write_list(const TermPtr& list) {
    std::string s = "[";
    auto cur = list;
    bool first = true;
    while (true) {
      cur = ctx_.deref(cur);
      if (cur->is_compound() && cur->name == "." && cur->args.size() == 2) {
        if (!first) s += ",";
        first = false;
        s += write(cur->args[0], 999);
        cur = cur->args[1];
        continue;
      }
      if (cur->is_atom() && cur->name == "[]") break;
      s += "|" + write(cur, 999);
      break;
    }
    return s + "]";
  }

  const TermContext& ctx_;
};

}  // namespace

TermPtr make_atom(std::string name) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::atom;
  t->name = std::move(name);
  return t;
}

TermPtr make_int(std::int64_t v) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::integer;
  t->value = v;
  return t;
}

TermPtr make_var(std::uint32_t id) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::var;
  t->var = id;
  return t;
}

TermPtr make_compound(std::string functor, std::vector<TermPtr> args) {
  if (args.empty()) return make_atom(std::move(functor));
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::compound;
  t->name = std::move(functor);
  t->args = std::move(args);
  return t;
}

TermPtr make_list(const std::vector<TermPtr>& items, TermPtr tail) {
  TermPtr out = tail ? std::move(tail) : make_atom("[]");
  for (auto it = items.rbegin(); it != items.rend(); ++it) out = make_compound(".", {*it, out});
  return out;
}

TermPtr rename(const TermPtr& t, std::uint32_t offset) {
  switch (t->kind) {
    case Term::Kind::var: return make_var(t->var + offset);
    case Term::Kind::compound: {
      std::vector<TermPtr> args;
      args.reserve(t->args.size());
      for (const auto& a : t->args) args.push_back(rename(a, offset));
      return make_compound(t->name, std::move(args));
    }
    default: return t;
  }
}

std::string quote_atom(std::string_view name) {
  if (name == "[]" || name == "!" || name == ";" || name == "{}" || name == ",") {
    return name == "," ? "','" : std::string(name);
  }
  if (!name.empty() && std::islower(static_cast<unsigned char>(name[0]))) {
    bool plain = true;
    for (char c : name) plain = plain && is_alnum_(c);
    if (plain) return std::string(name);
  }
  if (!name.empty()) {
    bool sym = true;
    for (char c : name) sym = sym && is_symbol_char(c);
    if (sym) return std::string(name);
  }
  std::string s = "'";
  for (char c : name) {
    if (c == '\'' || c == '\\') s += '\\';
    s += c;
  }
  return s + "'";
}

const OpDef* infix_op(std::string_view name) {
  for (const auto& o : kInfix)
    if (o.name == name) return &o.def;
  return nullptr;
}

const OpDef* prefix_op(std::string_view name) {
  for (const auto& o : kPrefix)
    if (o.name == name) return &o.def;
  return nullptr;
}

std::string write_term(const TermPtr& t, const TermContext& ctx) { return Writer(ctx).write(t, 1200); }

std::string write_term(const TermPtr& t) {
  PlainContext ctx;
  return write_term(t, ctx);
}

}  // namespace tracelens::clp
