#pragma once

#include "bsvie/error.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// A small arithmetic language for generators and terminal conditions.
///
///   expr    := term   (('+' | '-') term)*
///   term    := unary  (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?          (right associative)
///   primary := number | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Variables: t s y z zeta w wt wT T1 T.  Functions: exp log sqrt abs sin cos
/// (one argument), min max (two arguments).
namespace bsvie::expr {

enum class Var : std::uint8_t { t, s, y, z, zeta, w, wt, wT, T1, T };
inline constexpr std::size_t kVarCount = 10;
inline constexpr std::array<std::string_view, kVarCount> kVarNames = {
    "t", "s", "y", "z", "zeta", "w", "wt", "wT", "T1", "T"};

using VarMask = std::uint32_t;
constexpr VarMask mask_of(Var v) { return VarMask{1} << static_cast<unsigned>(v); }
constexpr VarMask mask_of(std::initializer_list<Var> vs) {
  VarMask m = 0;
  for (Var v : vs) m |= mask_of(v);
  return m;
}

enum class Op : std::uint8_t { number, variable, neg, add, sub, mul, div, pow, call };
enum class Func : std::uint8_t { exp, log, sqrt, abs, min, max, sin, cos };

struct Node {
  Op op = Op::number;
  double value = 0.0;
  Var var = Var::t;
  Func func = Func::exp;
  int lhs = -1;
  int rhs = -1;
  std::size_t offset = 0;  // byte offset in the source text
};

/// Immutable syntax tree. Copies share storage.
class Expr {
 public:
  Expr() = default;
  Expr(std::vector<Node> nodes, int root);

  const std::vector<Node>& nodes() const { return *nodes_; }
  const Node& node(int i) const { return (*nodes_)[static_cast<std::size_t>(i)]; }
  int root() const noexcept { return root_; }
  bool empty() const noexcept { return !nodes_; }

  VarMask free_vars() const noexcept { return free_; }
  bool uses(Var v) const noexcept { return (free_ & mask_of(v)) != 0; }

  /// Structural equality (source offsets are ignored).
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const std::vector<Node>> nodes_;
  int root_ = -1;
  VarMask free_ = 0;
};

enum class ParseErrorKind { lexical, unknown_identifier, arity, unbalanced, unexpected_token, unexpected_end };

class ParseError : public ValidationError {
 public:
  ParseError(ParseErrorKind kind, std::size_t offset, const std::string& message);
  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ParseErrorKind kind_;
  std::size_t offset_;
};

Expr parse(std::string_view text);

/// Fully parenthesized canonical text; parse(print(e)) == e.
std::string print(const Expr& e);

/// True when the expression is affine in the variables of `mask`.
bool affine_in(const Expr& e, VarMask mask);

/// Throws ValidationError naming the first variable of `e` not in `allowed`.
void require_vars(const Expr& e, VarMask allowed, std::string_view context);

class UnboundVariable : public ValidationError {
 public:
  explicit UnboundVariable(Var v);
  Var var() const noexcept { return var_; }

 private:
  Var var_;
};

/// Domain errors (log or sqrt outside the domain, division by zero) yield NaN
/// and are counted here.
struct DomainReport {
  std::size_t count = 0;
  std::size_t first_offset = 0;
};

class Env {
 public:
  Env() = default;
  Env(std::initializer_list<std::pair<std::string_view, double>> bindings);

  Env& bind(Var v, double value);
  Env& bind(std::string_view name, double value);
  bool bound(Var v) const noexcept { return (bound_ & mask_of(v)) != 0; }
  double get(Var v) const noexcept { return values_[static_cast<std::size_t>(v)]; }

 private:
  std::array<double, kVarCount> values_{};
  VarMask bound_ = 0;
};

double eval(const Expr& e, const Env& env, DomainReport* report = nullptr);

/// Bindings for evaluating one expression over many paths at once. Each
/// variable is either a scalar or a per-path array of common length.
class BatchEnv {
 public:
  explicit BatchEnv(Eigen::Index size) : size_(size) {}

  BatchEnv& bind(Var v, double value);
  BatchEnv& bind(Var v, const Eigen::ArrayXd& values);
  Eigen::Index size() const noexcept { return size_; }

  struct Slot {
    bool bound = false;
    const Eigen::ArrayXd* array = nullptr;
    double scalar = 0.0;
  };
  const Slot& slot(Var v) const { return slots_[static_cast<std::size_t>(v)]; }

 private:
  Eigen::Index size_;
  std::array<Slot, kVarCount> slots_{};
};

void eval_batch(const Expr& e, const BatchEnv& env, Eigen::ArrayXd& out,
                DomainReport* report = nullptr);

}  // namespace bsvie::expr
