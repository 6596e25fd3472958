#pragma once

#include "bsvie/expr.hpp"
#include "bsvie/grid.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace bsvie {

/// Arguments of g(t, s, y, z, zeta) for one cell (t_i, t_j) over all paths.
struct GeneratorArgs {
  double t;                    // outer time t_i
  double s;                    // inner time t_j >= t_i
  const Eigen::ArrayXd& y;     // Y(s)
  const Eigen::ArrayXd& z;     // Z(t, s)
  const Eigen::ArrayXd& zeta;  // Z(s, t)
  const Eigen::ArrayXd& w;     // W(s)
  const Eigen::ArrayXd& wt;    // W(t)
  double start;                // T1, the left end of the interval
  double horizon;              // T
};

/// Which arguments a generator reads, and whether it is affine in (y, z, zeta).
struct GeneratorTraits {
  bool depends_on_y = true;
  bool depends_on_z = true;
  bool depends_on_zeta = true;
  bool linear = false;
};

class Generator {
 public:
  using Fn = std::function<Eigen::ArrayXd(const GeneratorArgs&)>;

  Generator() = default;

  /// Parses an expression over t s y z zeta w wt T1 T (wT is rejected).
  static Generator parse(std::string_view text);
  static Generator from_expr(expr::Expr e, std::string label = {});
  static Generator from_function(Fn fn, GeneratorTraits traits, std::string label);
  static Generator zero();

  Eigen::ArrayXd operator()(const GeneratorArgs& a) const;

  const GeneratorTraits& traits() const noexcept { return traits_; }
  bool depends_on_y() const noexcept { return traits_.depends_on_y; }
  bool depends_on_z() const noexcept { return traits_.depends_on_z; }
  bool depends_on_zeta() const noexcept { return traits_.depends_on_zeta; }
  bool linear() const noexcept { return traits_.linear; }
  const std::string& label() const noexcept { return label_; }
  const std::optional<expr::Expr>& expression() const noexcept { return expr_; }

  /// f(t, s, y, (z + zeta) / 2) for a zeta-free f.
  Generator averaged() const;

 private:
  std::optional<expr::Expr> expr_;
  Fn fn_;
  GeneratorTraits traits_{false, false, false, true};
  std::string label_ = "0";
};

/// Arguments of the terminal Psi(t_i) over all paths.
struct TerminalArgs {
  Index node;
  double t;
  const Eigen::ArrayXd& wt;  // W(t)
  const Eigen::ArrayXd& wT;  // W(T)
  double start;
  double horizon;
};

class Terminal {
 public:
  using Fn = std::function<Eigen::ArrayXd(const TerminalArgs&)>;

  Terminal() = default;

  /// Parses an expression over t T T1 wt wT.
  static Terminal parse(std::string_view text);
  static Terminal from_expr(expr::Expr e, std::string label = {});
  static Terminal from_function(Fn fn, std::string label);
  static Terminal constant(double c);

  Eigen::ArrayXd operator()(const TerminalArgs& a) const;

  const std::string& label() const noexcept { return label_; }
  const std::optional<expr::Expr>& expression() const noexcept { return expr_; }

 private:
  std::optional<expr::Expr> expr_;
  Fn fn_;
  double constant_ = 0.0;
  std::string label_ = "0";
};

/// Y(t) = Psi(t) + int_t^T g(t, s, Y(s), Z(t,s), Z(s,t)) ds - int_t^T Z(t,s) dW(s).
struct ProblemSpec {
  TimeGrid grid;
  Generator generator;
  Terminal terminal;
  /// Declared Lipschitz bound of g; metadata only.
  double lipschitz = std::numeric_limits<double>::quiet_NaN();
  std::string label;
};

}  // namespace bsvie
