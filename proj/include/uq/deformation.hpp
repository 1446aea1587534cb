#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace uq {

struct NonInvertibleMap : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parameterization of the random vertical stretch of the upper half of the
/// unit square.  The stretch factor is
///   e(x1, y) = 1 + c A1 y_1 + c sum_{n>=2} sqrt(mu_n) phi_n(x1) y_n
/// with decay sqrt(mu_n) = (sqrt(pi) L)^{1/2} / n^k and the oscillating mode
/// family phi_n.  The first Ns variables are the large-deviation block, the
/// remaining Nf the small-deviation tail.
struct DeformationSpec {
  double c = 1.0 / 15.0;  // amplitude
  double k = 3.0;         // decay exponent
  double L = 0.5;         // correlation length
  double Lp = 1.0;        // mode period parameter
  int Ns = 4;             // large-deviation dimensions
  int Nf = 11;            // small-deviation (tail) dimensions

  int dim() const { return Ns + Nf; }

  void validate() const;

  /// sqrt(mu_n) = (sqrt(pi) L)^{1/2} / n^k, n >= 1.
  double sqrt_mu(int n) const;
  double mu(int n) const { return sqrt_mu(n) * sqrt_mu(n); }
  /// Tail decay mu_{f,n} = mu_{n+Ns}, 1 <= n <= Nf.
  double mu_tail(int n) const { return mu(n + Ns); }
  double sqrt_mu_tail(int n) const { return sqrt_mu(n + Ns); }

  /// Amplitude of the constant first mode, (sqrt(pi) L / 2)^{1/2}.
  double first_mode_amp() const;
};

/// Threshold below which det(dF) is treated as a fold of the map.
inline constexpr double kDetEps = 1e-10;

/// Half-width of the uniform support of each parameter.
inline constexpr double kSupportHalfWidth = 1.7320508075688772;  // sqrt(3)

/// A realization y in Gamma; the first Ns entries are the collocated block,
/// the rest the tail block.
struct ParamPoint {
  Eigen::VectorXd y;

  ParamPoint() = default;
  explicit ParamPoint(Eigen::VectorXd v) : y(std::move(v)) {}
  static ParamPoint zeros(int n) { return ParamPoint(Eigen::VectorXd::Zero(n)); }

  Eigen::VectorBlock<const Eigen::VectorXd> head(int ns) const { return y.head(ns); }
  bool in_support(double tol = 1e-12) const {
    return (y.array().abs() <= kSupportHalfWidth + tol).all();
  }
};

struct JacobianData {
  Eigen::Vector2d F;    // mapped point
  Eigen::Matrix2d dF;   // Jacobian of the map
  double detF = 1.0;
  Eigen::Matrix2d G;    // pullback diffusion tensor a det(dF) dF^{-1} dF^{-T}
};

/// Mode shape phi_n(x1) = [sin(n pi x1 / 2Lp) - cos(n pi x1 / 2Lp)
///                         + cosh(x1) + sinh(x1)] / n, n >= 2.
double mode_phi(const DeformationSpec& spec, int n, double x1);
double mode_dphi(const DeformationSpec& spec, int n, double x1);

/// Stretch factor e(x1, y) and its x1 derivative.
double eval_e(const DeformationSpec& spec, const ParamPoint& y, double x1);
double eval_de(const DeformationSpec& spec, const ParamPoint& y, double x1);

/// F(x, y): identity on {x2 <= 0.5}, vertical stretch above.
Eigen::Vector2d eval_map(const DeformationSpec& spec, const ParamPoint& y,
                         const Eigen::Vector2d& x);

/// Jacobian, determinant and coefficient matrix at x.  `a` is the diffusion
/// coefficient value at x (a composed with F is parameter independent).
JacobianData eval_jacobian(const DeformationSpec& spec, const ParamPoint& y,
                           const Eigen::Vector2d& x, double a = 1.0);

/// Jacobian mode of the tail term in the scaled variable
/// ytil_n = sqrt(mu_{f,n}) y_n: d(dF)/d ytil_n, no sqrt(mu) factor.
Eigen::Matrix2d tail_mode_matrix(const DeformationSpec& spec,
                                 const Eigen::Vector2d& x, int n);

/// dG / d ytil_n via the product rule and the matrix-inverse derivative
/// identity.  1 <= n <= Nf.
Eigen::Matrix2d eval_dG_tail(const DeformationSpec& spec, const ParamPoint& y,
                             const Eigen::Vector2d& x, int n, double a = 1.0);

/// d det(dF) / d ytil_n via Jacobi's formula.
double eval_ddet_tail(const DeformationSpec& spec, const ParamPoint& y,
                      const Eigen::Vector2d& x, int n);

struct AssumptionReport {
  double F_min = 1.0;    // empirical min singular value of dF
  double F_max = 1.0;    // empirical max singular value of dF
  double mode_sum = 0.0; // empirical sup of sum_l ||B_l|| sqrt(mu_l)
  bool violated = false;
};

/// Empirical check of the invertibility and mode-decay assumptions over a
/// sample set of (x, y) pairs.
AssumptionReport validate_assumptions(
    const DeformationSpec& spec,
    std::span<const std::pair<Eigen::Vector2d, ParamPoint>> samples);

}  // namespace uq
