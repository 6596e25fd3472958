#include "bsvie/analytic.hpp"
#include "bsvie/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace bsvie;

TEST_SUITE("analytic") {

TEST_CASE("closed-form cell values") {
  const ReferenceCase a = reference_case(CaseId::eq43);
  CHECK(a.z_s(0.75, 0.9, 0.3, -0.2) == doctest::Approx(0.675));
  CHECK(a.z_s(0.9, 0.75, 0.3, -0.2) == doctest::Approx(0.675));
  CHECK(a.z_m(0.9, 0.75, 0.3, -0.2) == doctest::Approx(0.81));
  CHECK(a.y(0.8, 0.5) == doctest::Approx(0.32));
  const ReferenceCase b = reference_case(CaseId::eq44);
  CHECK(b.z_s(0.2, 0.5, 0.0, 0.0) == doctest::Approx(1.8));
  CHECK(b.z_m(0.5, 0.2, 0.0, 0.0) == doctest::Approx(2.25));
  CHECK(a.start == 0.5);
  CHECK(b.start == 0.0);
}

TEST_CASE("case ids round-trip") {
  for (CaseId id : {CaseId::eq43, CaseId::eq44, CaseId::eq48_49, CaseId::zero, CaseId::corrected_intro})
    CHECK(parse_case_id(case_name(id)) == id);
  CHECK_THROWS_AS(parse_case_id("eq42"), ValidationError);
}

TEST_CASE("eq44 is a shifted and rescaled eq43") {
  // With u = t + 1 both examples read Y = u^2 W, Z_S = u v, Z_M = u^2.
  const ReferenceCase a = reference_case(CaseId::eq43);
  const ReferenceCase b = reference_case(CaseId::eq44);
  for (double t : {0.1, 0.4}) {
    for (double s : {0.2, 0.7}) {
      CHECK(b.z_s(t, s, 0, 0) == doctest::Approx(a.z_s(t + 1, s + 1, 0, 0)));
      CHECK(b.z_m(t, s, 0, 0) == doctest::Approx(a.z_m(t + 1, s + 1, 0, 0)));
    }
  }
}

TEST_CASE("closed forms satisfy the equation") {
  // The residual of the reference fields is pure discretization error.
  double prev = INFINITY;
  for (Index n : {16, 32, 64}) {
    const ReferenceCase c = reference_case(CaseId::eq43);
    const ProblemSpec p = case_problem(c, n);
    const PathEnsemble e = sample_ensemble(p.grid, 4096, 3);
    const ReferenceFields ref = reference_fields(c, e);
    const double r = residual(p, ref.y, ref.z_s, Driver(e), ResidualForm::row).rms;
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("the column-diffusion field transposes the M-solution") {
  const ReferenceCase c = reference_case(CaseId::eq48_49);
  const PathEnsemble e = sample_ensemble(case_grid(c, 8), 256, 1);
  const ReferenceFields ref = reference_fields(c, e);
  REQUIRE(ref.z_column);
  REQUIRE(ref.z_m);
  const TimeGrid& g = e.grid();
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) {
      CHECK(ref.z_column->value(0, i, j) == doctest::Approx(ref.z_m->value(0, j, i)));
    }
  // Upper cells: Z1 is t s, Z2 is s^2, so the two conventions differ off the diagonal.
  CHECK(ref.z_m->value(0, 1, 5) == doctest::Approx(g[1] * g[5]));
  CHECK(ref.z_column->value(0, 1, 5) == doctest::Approx(g[5] * g[5]));
}

TEST_CASE("error metrics") {
  const ReferenceCase c = reference_case(CaseId::eq43);
  const PathEnsemble e = sample_ensemble(case_grid(c, 8), 512, 2);
  const ReferenceFields ref = reference_fields(c, e);
  const ErrorReport same = error_metrics(ref.y, *ref.z_m, ref.y, *ref.z_m);
  CHECK(same.y == 0.0);
  CHECK(same.z_upper == 0.0);
  CHECK(same.z_lower == 0.0);

  AdaptedField y = ref.y;
  y.values.array() += 0.01;
  const double norm = std::sqrt(y_l2(ref.y));
  const double expect = std::sqrt(0.01 * 0.01 * e.grid().span()) / norm;
  CHECK(error_metrics(y, *ref.z_m, ref.y, *ref.z_m).y == doctest::Approx(expect).epsilon(1e-9));
  const ErrorReport scaled = error_metrics(ref.y.scaled(1.1), ref.z_m->scaled(1.1), ref.y, *ref.z_m);
  CHECK(scaled.y == doctest::Approx(0.1));
  CHECK(scaled.z_upper == doctest::Approx(0.1));
  CHECK(scaled.z_lower == doctest::Approx(0.1));
}

TEST_CASE("zero case has an exactly zero reference") {
  const ReferenceCase c = reference_case(CaseId::zero);
  const PathEnsemble e = sample_ensemble(case_grid(c, 8), 64, 1);
  const ReferenceFields ref = reference_fields(c, e);
  CHECK(ref.y.values.isZero(0.0));
  const ErrorReport err = error_metrics(ref.y, ref.z_s, ref.y, ref.z_s);
  CHECK(err.y == 0.0);
}

TEST_CASE("convergence table") {
  const ReferenceCase c = reference_case(CaseId::eq43);
  const std::vector<ConvergenceRow> one = convergence_study(c, {{8, 1024}}, {}, 1);
  REQUIRE(one.size() == 1);
  CHECK_FALSE(one[0].order_y);
  const std::vector<ConvergenceRow> two = convergence_study(c, {{8, 1024}, {16, 1024}}, {}, 1);
  REQUIRE(two.size() == 2);
  CHECK(two[1].order_y);
  CHECK(two[0].level.steps == 8);
  CHECK(two[1].errors.y >= 0.0);
}

}  // TEST_SUITE
