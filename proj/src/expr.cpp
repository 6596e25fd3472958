#include "bsvie/expr.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <system_error>

namespace bsvie::expr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct FuncInfo {
  std::string_view name;
  Func func;
  int arity;
};

constexpr std::array<FuncInfo, 8> kFuncs = {{{"exp", Func::exp, 1},
                                             {"log", Func::log, 1},
                                             {"sqrt", Func::sqrt, 1},
                                             {"abs", Func::abs, 1},
                                             {"min", Func::min, 2},
                                             {"max", Func::max, 2},
                                             {"sin", Func::sin, 1},
                                             {"cos", Func::cos, 1}}};

std::optional<Var> lookup_var(std::string_view name) {
  for (std::size_t i = 0; i < kVarCount; ++i)
    if (kVarNames[i] == name) return static_cast<Var>(i);
  return std::nullopt;
}

std::optional<FuncInfo> lookup_func(std::string_view name) {
  for (const auto& f : kFuncs)
    if (f.name == name) return f;
  return std::nullopt;
}

std::string_view func_name(Func f) {
  for (const auto& info : kFuncs)
    if (info.func == f) return info.name;
  return "?";
}

// ---------------------------------------------------------------- lexer

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, comma, end };

struct Token {
  Tok kind = Tok::end;
  std::size_t offset = 0;
  std::string_view text;
  double value = 0.0;
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    Token tok;
    tok.offset = i;
    if (is_digit(c) || (c == '.' && i + 1 < src.size() && is_digit(src[i + 1]))) {
      std::size_t j = i;
      while (j < src.size() && is_digit(src[j])) ++j;
      if (j < src.size() && src[j] == '.') {
        ++j;
        while (j < src.size() && is_digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k >= src.size() || !is_digit(src[k])) {
          throw ParseError(ParseErrorKind::lexical, i, "malformed exponent in number literal");
        }
        while (k < src.size() && is_digit(src[k])) ++k;
        j = k;
      }
      tok.kind = Tok::number;
      tok.text = src.substr(i, j - i);
      const auto [ptr, ec] = std::from_chars(src.data() + i, src.data() + j, tok.value);
      if (ec != std::errc() || ptr != src.data() + j || !std::isfinite(tok.value)) {
        throw ParseError(ParseErrorKind::lexical, i, "number literal out of range");
      }
      i = j;
    } else if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && (is_ident_start(src[j]) || is_digit(src[j]))) ++j;
      tok.kind = Tok::ident;
      tok.text = src.substr(i, j - i);
      i = j;
    } else {
      switch (c) {
        case '+': tok.kind = Tok::plus; break;
        case '-': tok.kind = Tok::minus; break;
        case '*': tok.kind = Tok::star; break;
        case '/': tok.kind = Tok::slash; break;
        case '^': tok.kind = Tok::caret; break;
        case '(': tok.kind = Tok::lparen; break;
        case ')': tok.kind = Tok::rparen; break;
        case ',': tok.kind = Tok::comma; break;
        default:
          throw ParseError(ParseErrorKind::lexical, i,
                           std::string("unexpected character '") + c + "'");
      }
      tok.text = src.substr(i, 1);
      ++i;
    }
    out.push_back(tok);
  }
  Token end;
  end.kind = Tok::end;
  end.offset = src.size();
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------- parser

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Expr run() {
    const int root = expression();
    if (peek().kind == Tok::rparen) {
      throw ParseError(ParseErrorKind::unbalanced, peek().offset, "unmatched ')'");
    }
    if (peek().kind != Tok::end) {
      throw ParseError(ParseErrorKind::unexpected_token, peek().offset,
                       "unexpected '" + std::string(peek().text) + "'");
    }
    return Expr(std::move(nodes_), root);
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }

  int push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int binary(Op op, int lhs, int rhs, std::size_t offset) {
    Node n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    n.offset = offset;
    return push(n);
  }

  int expression() {
    int lhs = term();
    while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
      const Token& op = take();
      const int rhs = term();
      lhs = binary(op.kind == Tok::plus ? Op::add : Op::sub, lhs, rhs, op.offset);
    }
    return lhs;
  }

  int term() {
    int lhs = unary();
    while (peek().kind == Tok::star || peek().kind == Tok::slash) {
      const Token& op = take();
      const int rhs = unary();
      lhs = binary(op.kind == Tok::star ? Op::mul : Op::div, lhs, rhs, op.offset);
    }
    return lhs;
  }

  int unary() {
    if (peek().kind == Tok::minus) {
      const Token& op = take();
      Node n;
      n.op = Op::neg;
      n.lhs = unary();
      n.offset = op.offset;
      return push(n);
    }
    return power();
  }

  int power() {
    const int base = primary();
    if (peek().kind == Tok::caret) {
      const Token& op = take();
      const int exponent = unary();
      return binary(Op::pow, base, exponent, op.offset);
    }
    return base;
  }

  int primary() {
    const Token& tok = take();
    switch (tok.kind) {
      case Tok::number: {
        Node n;
        n.op = Op::number;
        n.value = tok.value;
        n.offset = tok.offset;
        return push(n);
      }
      case Tok::ident: return identifier(tok);
      case Tok::lparen: {
        ++depth_;
        const int inner = expression();
        expect_close(tok.offset);
        return inner;
      }
      case Tok::rparen:
        if (depth_ > 0) throw ParseError(ParseErrorKind::unexpected_token, tok.offset, "unexpected ')'");
        throw ParseError(ParseErrorKind::unbalanced, tok.offset, "unmatched ')'");
      case Tok::end:
        throw ParseError(ParseErrorKind::unexpected_end, tok.offset, "unexpected end of input");
      default:
        throw ParseError(ParseErrorKind::unexpected_token, tok.offset,
                         "unexpected '" + std::string(tok.text) + "'");
    }
  }

  void expect_close(std::size_t open_offset) {
    if (peek().kind == Tok::rparen) {
      take();
      --depth_;
      return;
    }
    if (peek().kind == Tok::end) {
      throw ParseError(ParseErrorKind::unbalanced, open_offset, "unclosed '('");
    }
    throw ParseError(ParseErrorKind::unexpected_token, peek().offset,
                     "expected ')' but found '" + std::string(peek().text) + "'");
  }

  int identifier(const Token& tok) {
    if (const auto v = lookup_var(tok.text)) {
      Node n;
      n.op = Op::variable;
      n.var = *v;
      n.offset = tok.offset;
      return push(n);
    }
    const auto f = lookup_func(tok.text);
    if (!f) {
      throw ParseError(ParseErrorKind::unknown_identifier, tok.offset,
                       "unknown identifier '" + std::string(tok.text) + "'");
    }
    if (peek().kind != Tok::lparen) {
      throw ParseError(ParseErrorKind::unexpected_token, peek().offset,
                       "expected '(' after '" + std::string(tok.text) + "'");
    }
    const Token& open = take();
    ++depth_;
    std::vector<int> args;
    args.push_back(expression());
    while (peek().kind == Tok::comma) {
      take();
      args.push_back(expression());
    }
    expect_close(open.offset);
    if (static_cast<int>(args.size()) != f->arity) {
      throw ParseError(ParseErrorKind::arity, tok.offset,
                       "'" + std::string(f->name) + "' takes " + std::to_string(f->arity) +
                           " argument(s), got " + std::to_string(args.size()));
    }
    Node n;
    n.op = Op::call;
    n.func = f->func;
    n.lhs = args[0];
    n.rhs = args.size() > 1 ? args[1] : -1;
    n.offset = tok.offset;
    return push(n);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int depth_ = 0;  // open parentheses
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------- helpers

bool same_tree(const Expr& a, int ia, const Expr& b, int ib) {
  if ((ia < 0) != (ib < 0)) return false;
  if (ia < 0) return true;
  const Node& x = a.node(ia);
  const Node& y = b.node(ib);
  if (x.op != y.op) return false;
  switch (x.op) {
    case Op::number: return x.value == y.value && std::signbit(x.value) == std::signbit(y.value);
    case Op::variable: return x.var == y.var;
    case Op::call:
      if (x.func != y.func) return false;
      break;
    default: break;
  }
  return same_tree(a, x.lhs, b, y.lhs) && same_tree(a, x.rhs, b, y.rhs);
}

void print_node(const Expr& e, int i, std::string& out) {
  const Node& n = e.node(i);
  switch (n.op) {
    case Op::number: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, n.value);
      out.append(buf, res.ptr);
      return;
    }
    case Op::variable: out += kVarNames[static_cast<std::size_t>(n.var)]; return;
    case Op::neg:
      out += "(-";
      print_node(e, n.lhs, out);
      out += ')';
      return;
    case Op::call:
      out += func_name(n.func);
      out += '(';
      print_node(e, n.lhs, out);
      if (n.rhs >= 0) {
        out += ", ";
        print_node(e, n.rhs, out);
      }
      out += ')';
      return;
    default: break;
  }
  static constexpr std::string_view ops[] = {" + ", " - ", " * ", " / ", " ^ "};
  out += '(';
  print_node(e, n.lhs, out);
  out += ops[static_cast<int>(n.op) - static_cast<int>(Op::add)];
  print_node(e, n.rhs, out);
  out += ')';
}

VarMask collect_vars(const std::vector<Node>& nodes) {
  VarMask m = 0;
  for (const Node& n : nodes)
    if (n.op == Op::variable) m |= mask_of(n.var);
  return m;
}

struct Affinity {
  bool depends;
  bool affine;
};

Affinity affinity(const Expr& e, int i, VarMask mask) {
  const Node& n = e.node(i);
  switch (n.op) {
    case Op::number: return {false, true};
    case Op::variable: return {(mask & mask_of(n.var)) != 0, true};
    case Op::neg: return affinity(e, n.lhs, mask);
    case Op::add:
    case Op::sub: {
      const auto l = affinity(e, n.lhs, mask);
      const auto r = affinity(e, n.rhs, mask);
      return {l.depends || r.depends, l.affine && r.affine};
    }
    case Op::mul: {
      const auto l = affinity(e, n.lhs, mask);
      const auto r = affinity(e, n.rhs, mask);
      return {l.depends || r.depends, !(l.depends && r.depends) && l.affine && r.affine};
    }
    case Op::div: {
      const auto l = affinity(e, n.lhs, mask);
      const auto r = affinity(e, n.rhs, mask);
      return {l.depends || r.depends, !r.depends && l.affine};
    }
    case Op::pow:
    case Op::call: {
      const auto l = affinity(e, n.lhs, mask);
      const bool rdep = n.rhs >= 0 && affinity(e, n.rhs, mask).depends;
      const bool dep = l.depends || rdep;
      return {dep, !dep};
    }
  }
  return {true, false};
}

void flag(DomainReport* report, std::size_t offset, std::size_t count = 1) {
  if (!report || count == 0) return;
  if (report->count == 0) report->first_offset = offset;
  report->count += count;
}

double apply_scalar(const Node& n, double a, double b, DomainReport* report) {
  switch (n.op) {
    case Op::neg: return -a;
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
      if (b == 0.0) {
        flag(report, n.offset);
        return kNaN;
      }
      return a / b;
    case Op::pow: {
      const double r = std::pow(a, b);
      if (std::isnan(r) && !std::isnan(a) && !std::isnan(b)) flag(report, n.offset);
      return r;
    }
    case Op::call:
      switch (n.func) {
        case Func::exp: return std::exp(a);
        case Func::log:
          if (!(a > 0.0)) {
            flag(report, n.offset);
            return kNaN;
          }
          return std::log(a);
        case Func::sqrt:
          if (a < 0.0) {
            flag(report, n.offset);
            return kNaN;
          }
          return std::sqrt(a);
        case Func::abs: return std::abs(a);
        case Func::min: return std::min(a, b);
        case Func::max: return std::max(a, b);
        case Func::sin: return std::sin(a);
        case Func::cos: return std::cos(a);
      }
      break;
    default: break;
  }
  return kNaN;
}

double eval_node(const Expr& e, int i, const Env& env, DomainReport* report) {
  const Node& n = e.node(i);
  switch (n.op) {
    case Op::number: return n.value;
    case Op::variable:
      if (!env.bound(n.var)) throw UnboundVariable(n.var);
      return env.get(n.var);
    default: break;
  }
  const double a = eval_node(e, n.lhs, env, report);
  const double b = n.rhs >= 0 ? eval_node(e, n.rhs, env, report) : 0.0;
  return apply_scalar(n, a, b, report);
}

// Batch values are scalar until a per-path variable is involved.
struct Value {
  bool is_scalar = true;
  double scalar = 0.0;
  Eigen::ArrayXd array;
};

Value batch_node(const Expr& e, int i, const BatchEnv& env, DomainReport* report) {
  const Node& n = e.node(i);
  if (n.op == Op::number) return {true, n.value, {}};
  if (n.op == Op::variable) {
    const auto& slot = env.slot(n.var);
    if (!slot.bound) throw UnboundVariable(n.var);
    if (slot.array) return {false, 0.0, *slot.array};
    return {true, slot.scalar, {}};
  }
  Value a = batch_node(e, n.lhs, env, report);
  Value b = n.rhs >= 0 ? batch_node(e, n.rhs, env, report) : Value{};
  if (a.is_scalar && b.is_scalar) return {true, apply_scalar(n, a.scalar, b.scalar, report), {}};

  const Eigen::Index size = env.size();
  auto widen = [size](Value& v) {
    if (v.is_scalar) {
      v.array = Eigen::ArrayXd::Constant(size, v.scalar);
      v.is_scalar = false;
    }
  };
  Value out{false, 0.0, {}};
  switch (n.op) {
    case Op::neg: out.array = -a.array; return out;
    case Op::add:
      if (a.is_scalar) out.array = a.scalar + b.array;
      else if (b.is_scalar) out.array = a.array + b.scalar;
      else out.array = a.array + b.array;
      return out;
    case Op::sub:
      if (a.is_scalar) out.array = a.scalar - b.array;
      else if (b.is_scalar) out.array = a.array - b.scalar;
      else out.array = a.array - b.array;
      return out;
    case Op::mul:
      if (a.is_scalar) out.array = a.scalar * b.array;
      else if (b.is_scalar) out.array = a.array * b.scalar;
      else out.array = a.array * b.array;
      return out;
    default: break;
  }
  // Remaining operators go element by element through the scalar kernel so
  // results match eval() bit for bit.
  if (n.op == Op::call && n.rhs < 0) {
    out.array.resize(size);
    for (Eigen::Index p = 0; p < size; ++p)
      out.array[p] = apply_scalar(n, a.array[p], 0.0, report);
    return out;
  }
  widen(a);
  widen(b);
  out.array.resize(size);
  for (Eigen::Index p = 0; p < size; ++p)
    out.array[p] = apply_scalar(n, a.array[p], b.array[p], report);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- public

Expr::Expr(std::vector<Node> nodes, int root)
    : nodes_(std::make_shared<const std::vector<Node>>(std::move(nodes))), root_(root) {
  free_ = collect_vars(*nodes_);
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.empty() || b.empty()) return a.empty() == b.empty();
  return same_tree(a, a.root(), b, b.root());
}

ParseError::ParseError(ParseErrorKind kind, std::size_t offset, const std::string& message)
    : ValidationError("parse error at byte " + std::to_string(offset) + ": " + message),
      kind_(kind),
      offset_(offset) {}

Expr parse(std::string_view text) { return Parser(lex(text)).run(); }

std::string print(const Expr& e) {
  std::string out;
  if (!e.empty()) print_node(e, e.root(), out);
  return out;
}

bool affine_in(const Expr& e, VarMask mask) { return affinity(e, e.root(), mask).affine; }

void require_vars(const Expr& e, VarMask allowed, std::string_view context) {
  const VarMask extra = e.free_vars() & ~allowed;
  if (extra == 0) return;
  for (std::size_t i = 0; i < kVarCount; ++i) {
    if (extra & (VarMask{1} << i)) {
      throw ValidationError(std::string(context) + ": variable '" + std::string(kVarNames[i]) +
                            "' is not allowed here");
    }
  }
}

UnboundVariable::UnboundVariable(Var v)
    : ValidationError("unbound variable '" +
                      std::string(kVarNames[static_cast<std::size_t>(v)]) + "'"),
      var_(v) {}

Env::Env(std::initializer_list<std::pair<std::string_view, double>> bindings) {
  for (const auto& [name, value] : bindings) bind(name, value);
}

Env& Env::bind(Var v, double value) {
  values_[static_cast<std::size_t>(v)] = value;
  bound_ |= mask_of(v);
  return *this;
}

Env& Env::bind(std::string_view name, double value) {
  const auto v = lookup_var(name);
  if (!v) throw ValidationError("unknown variable '" + std::string(name) + "'");
  return bind(*v, value);
}

double eval(const Expr& e, const Env& env, DomainReport* report) {
  if (e.empty()) throw ValidationError("eval: empty expression");
  return eval_node(e, e.root(), env, report);
}

BatchEnv& BatchEnv::bind(Var v, double value) {
  slots_[static_cast<std::size_t>(v)] = Slot{true, nullptr, value};
  return *this;
}

BatchEnv& BatchEnv::bind(Var v, const Eigen::ArrayXd& values) {
  if (values.size() != size_) throw ShapeError("batch env: array length mismatch");
  slots_[static_cast<std::size_t>(v)] = Slot{true, &values, 0.0};
  return *this;
}

void eval_batch(const Expr& e, const BatchEnv& env, Eigen::ArrayXd& out, DomainReport* report) {
  if (e.empty()) throw ValidationError("eval: empty expression");
  Value v = batch_node(e, e.root(), env, report);
  if (v.is_scalar) out = Eigen::ArrayXd::Constant(env.size(), v.scalar);
  else out = std::move(v.array);
}

}  // namespace bsvie::expr
