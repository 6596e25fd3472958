#include "parser_golden.hpp"

#include "bsvie/expr.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bsvie::expr;

TEST_SUITE("expr") {

TEST_CASE("golden parse suite") {
  for (const auto& c : golden::cases()) {
    CAPTURE(c.input);
    const auto problem = golden::check(c);
    CHECK_MESSAGE(!problem, (problem ? *problem : ""));
  }
}

TEST_CASE("precedence places unary minus between power and product") {
  CHECK(parse("-t*y/s^2") == parse("((-t)*y)/(s^2)"));
  CHECK(parse("-2^2") == parse("-(2^2)"));
  CHECK(eval(parse("-2^2"), Env{}) == -4.0);
  CHECK(eval(parse("2^3^2"), Env{}) == 512.0);
}

TEST_CASE("scalar evaluation") {
  CHECK(eval(parse("t*s"), Env{{"t", 0.75}, {"s", 0.9}}) == doctest::Approx(0.675).epsilon(1e-15));
  CHECK(eval(parse("-t*y/s^2"), Env{{"t", 0.5}, {"y", 2.0}, {"s", 1.0}}) == -1.0);
  CHECK(eval(parse("min(t, 2) + max(t, 2)"), Env{{"t", 5.0}}) == 7.0);
  CHECK(eval(parse("abs(-3) + sqrt(16) + exp(0) + log(1) + sin(0) + cos(0)"), Env{}) == 9.0);
}

TEST_CASE("unbound variables are reported") {
  try {
    (void)eval(parse("w"), Env{});
    FAIL("expected UnboundVariable");
  } catch (const UnboundVariable& e) {
    CHECK(e.var() == Var::w);
  }
  CHECK_THROWS_AS(Env{}.bind("nope", 1.0), bsvie::ValidationError);
}

TEST_CASE("domain errors give NaN and a report") {
  DomainReport rep;
  const double v = eval(parse("1 + log(t - 1)"), Env{{"t", 0.5}}, &rep);
  CHECK(std::isnan(v));
  CHECK(rep.count == 1);
  CHECK(rep.first_offset == 4);
  DomainReport div;
  CHECK(std::isnan(eval(parse("1/t"), Env{{"t", 0.0}}, &div)));
  CHECK(div.count == 1);
}

TEST_CASE("print and parse reach a fixpoint") {
  const char* inputs[] = {"exp(0.1*(T - t))*w", "wT*(T+1)*(t+1)", "0.5*sin(zeta) - t*y/(1+s)",
                          "max(-z, zeta)^2/3", "1e-300*t", "-(-(-t))", "0.1 + 0.2",
                          "123456789.123456789*y"};
  for (const char* in : inputs) {
    CAPTURE(in);
    const Expr e = parse(in);
    const std::string p = print(e);
    CHECK(parse(p) == e);
    CHECK(print(parse(p)) == p);
  }
}

TEST_CASE("free variables and affinity") {
  const Expr e = parse("t*y + 2*z - zeta/s");
  CHECK(e.uses(Var::t));
  CHECK(e.uses(Var::zeta));
  CHECK_FALSE(e.uses(Var::w));
  CHECK(affine_in(e, mask_of({Var::y, Var::z, Var::zeta})));
  CHECK_FALSE(affine_in(parse("y*z"), mask_of({Var::y, Var::z})));
  CHECK_FALSE(affine_in(parse("sin(y)"), mask_of(Var::y)));
  CHECK(affine_in(parse("sin(t)*y"), mask_of(Var::y)));
  CHECK_FALSE(affine_in(parse("1/y"), mask_of(Var::y)));
  CHECK_THROWS_AS(require_vars(parse("wT + y"), mask_of({Var::y}), "g"), bsvie::ValidationError);
}

TEST_CASE("batch evaluation matches scalar evaluation bitwise") {
  const Expr e = parse("0.5*sin(zeta) - t*y/(1+s)^2 + exp(-w^2) / (1 + abs(z)) + max(wt, y)^3");
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  const Eigen::Index m = 257;
  Eigen::ArrayXd y(m), z(m), zeta(m), w(m), wt(m);
  for (Eigen::Index p = 0; p < m; ++p) {
    y[p] = n01(rng);
    z[p] = n01(rng);
    zeta[p] = n01(rng);
    w[p] = n01(rng);
    wt[p] = n01(rng);
  }
  BatchEnv env(m);
  env.bind(Var::t, 0.3).bind(Var::s, 0.7).bind(Var::y, y).bind(Var::z, z).bind(Var::zeta, zeta);
  env.bind(Var::w, w).bind(Var::wt, wt);
  Eigen::ArrayXd out;
  eval_batch(e, env, out);
  REQUIRE(out.size() == m);
  for (Eigen::Index p = 0; p < m; ++p) {
    Env s;
    s.bind(Var::t, 0.3).bind(Var::s, 0.7).bind(Var::y, y[p]).bind(Var::z, z[p]).bind(Var::zeta, zeta[p]);
    s.bind(Var::w, w[p]).bind(Var::wt, wt[p]);
    CHECK(out[p] == eval(e, s));
  }
}

TEST_CASE("eval is pure") {
  const Expr e = parse("exp(0.1*(T - t))*w");
  const Env env{{"T", 1.0}, {"t", 0.25}, {"w", -0.3}};
  const double a = eval(e, env);
  for (int k = 0; k < 5; ++k) CHECK(eval(e, env) == a);
}

}  // TEST_SUITE
