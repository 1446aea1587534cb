#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace uq {

/// Index-set rule: level constraint g(i) <= w on multi-indices i >= 1.
enum class IndexRule { Smolyak, TotalDegree, HyperbolicCross };

/// Knots per level: m(1) = 1, m(i) = 2^{i-1} + 1.
int m_rule(int level);
/// Smallest level i with m(i) >= points (inverse of m on its range).
int m_inverse(int points);

/// Nested Clenshaw-Curtis nodes (Chebyshev extrema) on [-1, 1], ascending.
/// Nodes are generated from reduced fractions j/(m-1) so coinciding nodes of
/// different levels are bit-identical.
std::vector<double> cc_nodes(int level);

/// Quadrature weights of the Lagrange bases on cc_nodes(level) against the
/// uniform density on [-1, 1]; they sum to 1.
std::vector<double> cc_weights(int level);

struct MultiIndex {
  std::vector<int> i;  // per-dimension levels, each >= 1
  int sum_minus_one() const;
};

struct SparseGrid {
  int dim = 0;
  int level = 0;
  IndexRule rule = IndexRule::Smolyak;
  double lo = -1.0, hi = 1.0;  // physical support per dimension

  /// One surviving tensor component of the combination technique.
  struct Component {
    std::vector<int> levels;
    double coeff;
    std::vector<int> knot_ids;  // tensor order, last dimension fastest
  };
  std::vector<Component> components;

  Eigen::MatrixXd knots;    // dim x n_knots, canonical [-1,1] coordinates
  Eigen::VectorXd weights;  // quadrature weight per knot, sums to 1

  int num_knots() const { return static_cast<int>(knots.cols()); }
  Eigen::VectorXd knot_physical(int id) const;

  /// Expectation of the sparse interpolant under the product uniform density.
  double integrate(std::span<const double> samples) const;

  /// Combination-technique evaluation of the sparse interpolant at a physical
  /// point y.
  double interpolate(std::span<const double> samples,
                     const Eigen::VectorXd& y_phys) const;

  /// CSV export: knot_id, y_1..y_N (physical), weight.
  void export_knots_csv(const std::string& path) const;
};

/// Builds the admissible index set, combination coefficients, deduplicated
/// knots and quadrature weights.  Throws std::length_error if the knot count
/// exceeds `knot_cap`.
SparseGrid build_grid(int dim, int w, IndexRule rule = IndexRule::Smolyak,
                      double lo = -1.0, double hi = 1.0,
                      std::size_t knot_cap = 4'000'000);

/// Exponent multi-indices of the polynomial space reproduced exactly by the
/// grid (p with g(m^{-1}(p + 1)) <= w).
std::vector<std::vector<int>> polynomial_exactness_set(int dim, int w,
                                                       IndexRule rule);

}  // namespace uq
