#include "uq/deformation.hpp"

#include <cmath>

#include "uq/matrix_calculus.hpp"

namespace uq {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void DeformationSpec::validate() const {
  if (Ns < 1) throw std::invalid_argument("DeformationSpec: Ns must be >= 1");
  if (Nf < 0) throw std::invalid_argument("DeformationSpec: Nf must be >= 0");
  if (c < 0.0) throw std::invalid_argument("DeformationSpec: c must be >= 0");
  if (!(k > 0.0)) throw std::invalid_argument("DeformationSpec: k must be > 0");
  if (!(L > 0.0)) throw std::invalid_argument("DeformationSpec: L must be > 0");
  if (!(Lp > 0.0)) throw std::invalid_argument("DeformationSpec: Lp must be > 0");
}

double DeformationSpec::sqrt_mu(int n) const {
  return std::sqrt(std::sqrt(kPi) * L) / std::pow(static_cast<double>(n), k);
}

double DeformationSpec::first_mode_amp() const {
  return std::sqrt(std::sqrt(kPi) * L / 2.0);
}

double mode_phi(const DeformationSpec& spec, int n, double x1) {
  const double t = n * kPi * x1 / (2.0 * spec.Lp);
  return (std::sin(t) - std::cos(t) + std::cosh(x1) + std::sinh(x1)) / n;
}

double mode_dphi(const DeformationSpec& spec, int n, double x1) {
  const double r = n * kPi / (2.0 * spec.Lp);
  const double t = r * x1;
  return (r * (std::cos(t) + std::sin(t)) + std::sinh(x1) + std::cosh(x1)) / n;
}

double eval_e(const DeformationSpec& spec, const ParamPoint& y, double x1) {
  spec.validate();
  double e = 1.0 + spec.c * spec.first_mode_amp() * y.y[0];
  for (int n = 2; n <= spec.dim(); ++n)
    e += spec.c * spec.sqrt_mu(n) * mode_phi(spec, n, x1) * y.y[n - 1];
  return e;
}

double eval_de(const DeformationSpec& spec, const ParamPoint& y, double x1) {
  double de = 0.0;
  for (int n = 2; n <= spec.dim(); ++n)
    de += spec.c * spec.sqrt_mu(n) * mode_dphi(spec, n, x1) * y.y[n - 1];
  return de;
}

Eigen::Vector2d eval_map(const DeformationSpec& spec, const ParamPoint& y,
                         const Eigen::Vector2d& x) {
  if (x[1] <= 0.5) return x;
  return {x[0], (x[1] - 0.5) * eval_e(spec, y, x[0]) + 0.5};
}

JacobianData eval_jacobian(const DeformationSpec& spec, const ParamPoint& y,
                           const Eigen::Vector2d& x, double a) {
  JacobianData out;
  out.F = x;
  out.dF.setIdentity();
  out.detF = 1.0;
  out.G = a * Eigen::Matrix2d::Identity();
  if (x[1] <= 0.5) return out;

  const double e = eval_e(spec, y, x[0]);
  const double de = eval_de(spec, y, x[0]);
  const double s = (x[1] - 0.5) * de;
  out.F = {x[0], (x[1] - 0.5) * e + 0.5};
  out.dF << 1.0, 0.0, s, e;
  out.detF = e;
  if (out.detF <= kDetEps)
    throw NonInvertibleMap("map fold: det(dF) <= eps at x1=" +
                           std::to_string(x[0]));
  // Closed form of a det(dF) dF^{-1} dF^{-T} for the triangular Jacobian;
  // symmetric by construction.
  out.G << a * e, -a * s, -a * s, a * (s * s + 1.0) / e;
  return out;
}

Eigen::Matrix2d tail_mode_matrix(const DeformationSpec& spec,
                                 const Eigen::Vector2d& x, int n) {
  if (n < 1 || n > spec.Nf)
    throw std::out_of_range("tail mode index out of range");
  Eigen::Matrix2d b = Eigen::Matrix2d::Zero();
  if (x[1] <= 0.5) return b;
  const int g = spec.Ns + n;  // global mode index
  b(1, 0) = (x[1] - 0.5) * spec.c * mode_dphi(spec, g, x[0]);
  b(1, 1) = spec.c * mode_phi(spec, g, x[0]);
  return b;
}

Eigen::Matrix2d eval_dG_tail(const DeformationSpec& spec, const ParamPoint& y,
                             const Eigen::Vector2d& x, int n, double a) {
  const JacobianData j = eval_jacobian(spec, y, x, a);
  if (x[1] <= 0.5) return Eigen::Matrix2d::Zero();
  const Eigen::Matrix2d b = tail_mode_matrix(spec, x, n);
  const Eigen::Matrix2d inv = j.dF.inverse();
  const Eigen::Matrix2d dinv = inverse_derivative(j.dF, b);
  const double ddet = determinant_derivative(j.dF, b);
  return a * (ddet * inv * inv.transpose() +
              j.detF * (dinv * inv.transpose() + inv * dinv.transpose()));
}

double eval_ddet_tail(const DeformationSpec& spec, const ParamPoint& y,
                      const Eigen::Vector2d& x, int n) {
  if (x[1] <= 0.5) {
    if (n < 1 || n > spec.Nf)
      throw std::out_of_range("tail mode index out of range");
    return 0.0;
  }
  const JacobianData j = eval_jacobian(spec, y, x);
  return determinant_derivative(j.dF, tail_mode_matrix(spec, x, n));
}

AssumptionReport validate_assumptions(
    const DeformationSpec& spec,
    std::span<const std::pair<Eigen::Vector2d, ParamPoint>> samples) {
  AssumptionReport rep;
  rep.F_min = std::numeric_limits<double>::infinity();
  rep.F_max = 0.0;
  rep.mode_sum = 0.0;
  for (const auto& [x, y] : samples) {
    Eigen::Matrix2d dF = Eigen::Matrix2d::Identity();
    if (x[1] > 0.5) {
      const double e = eval_e(spec, y, x[0]);
      dF << 1.0, 0.0, (x[1] - 0.5) * eval_de(spec, y, x[0]), e;
    }
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(dF);
    rep.F_min = std::min(rep.F_min, svd.singularValues()[1]);
    rep.F_max = std::max(rep.F_max, svd.singularValues()[0]);

    // sum_l ||B_l|| sqrt(mu_l) evaluated as the 2-norm of d(dF)/dy_l.
    double sum = 0.0;
    if (x[1] > 0.5) {
      sum = spec.c * spec.first_mode_amp();
      for (int g = 2; g <= spec.dim(); ++g) {
        const double p = mode_phi(spec, g, x[0]);
        const double dp = (x[1] - 0.5) * mode_dphi(spec, g, x[0]);
        sum += spec.c * spec.sqrt_mu(g) * std::hypot(p, dp);
      }
    }
    rep.mode_sum = std::max(rep.mode_sum, sum);
  }
  rep.violated = !(rep.F_min > 0.0) || rep.mode_sum >= 1.0;
  return rep;
}

}  // namespace uq
