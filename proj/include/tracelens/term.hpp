#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace tracelens::clp {

struct Term;
using TermPtr = std::shared_ptr<const Term>;

/// Immutable first-order term. Variables are numbered; a clause stores
/// clause-local numbers 0..n-1 and the engine renames them on use.
struct Term {
  enum class Kind : std::uint8_t { atom, integer, var, compound };

  Kind kind = Kind::atom;
  std::string name;                // atom name or functor
  std::int64_t value = 0;          // integer value
  std::uint32_t var = 0;           // variable number
  std::vector<TermPtr> args;       // compound arguments

  bool is_atom() const { return kind == Kind::atom; }
  bool is_int() const { return kind == Kind::integer; }
  bool is_var() const { return kind == Kind::var; }
  bool is_compound() const { return kind == Kind::compound; }
  bool is_callable() const { return is_atom() || is_compound(); }
  std::size_t arity() const { return args.size(); }
  bool is(std::string_view functor, std::size_t n) const {
    return (is_atom() || is_compound()) && name == functor && args.size() == n;
  }
};

TermPtr make_atom(std::string name);
TermPtr make_int(std::int64_t v);
TermPtr make_var(std::uint32_t id);
TermPtr make_compound(std::string functor, std::vector<TermPtr> args);
TermPtr make_list(const std::vector<TermPtr>& items, TermPtr tail = nullptr);

/// Copies `t` adding `offset` to every variable number.
TermPtr rename(const TermPtr& t, std::uint32_t offset);

/// Access to bindings while writing terms.
class TermContext {
 public:
  virtual ~TermContext() = default;
  virtual TermPtr deref(const TermPtr& t) const = 0;
  virtual std::string var_name(std::uint32_t var) const = 0;
};

/// Writes a term in standard operator syntax (`2>0`, `_3 is 2-1`, `[a,b|T]`).
std::string write_term(const TermPtr& t, const TermContext& ctx);
/// Writes a term with no bindings; variables print as `_<n>`.
std::string write_term(const TermPtr& t);

/// Atom text, quoted when it is not a plain identifier or symbol atom.
std::string quote_atom(std::string_view name);

struct OpDef {
  int priority;
  enum class Type : std::uint8_t { xfx, xfy, yfx, fy } type;
};
/// Infix operator definition or nullptr.
const OpDef* infix_op(std::string_view name);
/// Prefix operator definition or nullptr.
const OpDef* prefix_op(std::string_view name);

}  // namespace tracelens::clp
