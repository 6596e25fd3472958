#include "bsvie/problem.hpp"

#include "bsvie/error.hpp"

#include <utility>

namespace bsvie {

using expr::Var;

namespace {

constexpr expr::VarMask kGeneratorVars =
    expr::mask_of({Var::t, Var::s, Var::y, Var::z, Var::zeta, Var::w, Var::wt, Var::T1, Var::T});
constexpr expr::VarMask kTerminalVars = expr::mask_of({Var::t, Var::T, Var::T1, Var::wt, Var::wT});

}  // namespace

Generator Generator::parse(std::string_view text) {
  return from_expr(expr::parse(text), std::string(text));
}

Generator Generator::from_expr(expr::Expr e, std::string label) {
  expr::require_vars(e, kGeneratorVars, "generator");
  Generator g;
  g.traits_.depends_on_y = e.uses(Var::y);
  g.traits_.depends_on_z = e.uses(Var::z);
  g.traits_.depends_on_zeta = e.uses(Var::zeta);
  g.traits_.linear = expr::affine_in(e, expr::mask_of({Var::y, Var::z, Var::zeta}));
  g.label_ = label.empty() ? expr::print(e) : std::move(label);
  g.expr_ = std::move(e);
  return g;
}

Generator Generator::from_function(Fn fn, GeneratorTraits traits, std::string label) {
  if (!fn) throw ValidationError("generator: empty function");
  Generator g;
  g.fn_ = std::move(fn);
  g.traits_ = traits;
  g.label_ = std::move(label);
  return g;
}

Generator Generator::zero() { return Generator{}; }

Eigen::ArrayXd Generator::operator()(const GeneratorArgs& a) const {
  if (expr_) {
    expr::BatchEnv env(a.y.size());
    env.bind(Var::t, a.t)
        .bind(Var::s, a.s)
        .bind(Var::y, a.y)
        .bind(Var::z, a.z)
        .bind(Var::zeta, a.zeta)
        .bind(Var::w, a.w)
        .bind(Var::wt, a.wt)
        .bind(Var::T1, a.start)
        .bind(Var::T, a.horizon);
    Eigen::ArrayXd out;
    expr::eval_batch(*expr_, env, out);
    return out;
  }
  if (fn_) return fn_(a);
  return Eigen::ArrayXd::Zero(a.y.size());
}

Generator Generator::averaged() const {
  if (traits_.depends_on_zeta) {
    throw ValidationError("adapted solution: the generator must not depend on zeta");
  }
  GeneratorTraits traits = traits_;
  traits.depends_on_zeta = traits_.depends_on_z;
  const Generator base = *this;
  return from_function(
      [base](const GeneratorArgs& a) {
        const Eigen::ArrayXd mid = (a.z + a.zeta) / 2.0;
        return base(GeneratorArgs{a.t, a.s, a.y, mid, a.zeta, a.w, a.wt, a.start, a.horizon});
      },
      traits, "f(t,s,y,(z+zeta)/2) with f = " + label_);
}

Terminal Terminal::parse(std::string_view text) {
  return from_expr(expr::parse(text), std::string(text));
}

Terminal Terminal::from_expr(expr::Expr e, std::string label) {
  expr::require_vars(e, kTerminalVars, "terminal");
  Terminal psi;
  psi.label_ = label.empty() ? expr::print(e) : std::move(label);
  psi.expr_ = std::move(e);
  return psi;
}

Terminal Terminal::from_function(Fn fn, std::string label) {
  if (!fn) throw ValidationError("terminal: empty function");
  Terminal psi;
  psi.fn_ = std::move(fn);
  psi.label_ = std::move(label);
  return psi;
}

Terminal Terminal::constant(double c) {
  Terminal psi;
  psi.constant_ = c;
  psi.label_ = std::to_string(c);
  return psi;
}

Eigen::ArrayXd Terminal::operator()(const TerminalArgs& a) const {
  if (expr_) {
    expr::BatchEnv env(a.wt.size());
    env.bind(Var::t, a.t)
        .bind(Var::wt, a.wt)
        .bind(Var::wT, a.wT)
        .bind(Var::T1, a.start)
        .bind(Var::T, a.horizon);
    Eigen::ArrayXd out;
    expr::eval_batch(*expr_, env, out);
    return out;
  }
  if (fn_) return fn_(a);
  return Eigen::ArrayXd::Constant(a.wt.size(), constant_);
}

}  // namespace bsvie
