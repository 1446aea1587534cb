#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "uq/fem.hpp"
#include "uq/sparse_grid.hpp"

namespace uq {

/// Per-mode tail sensitivities gamma_n(y_s) = integral of the adjoint-paired
/// sensitivity integrand, evaluated at y_f = 0.
struct TailSensitivity {
  Eigen::VectorXd gamma;  // size Nf
};

struct EstimatorReport {
  std::string method;  // collocation | hybrid | monte-carlo
  int Ns = 0, Nf = 0, w = 0;
  long knots = 0;
  long pde_solves = 0;
  double mean = 0.0;
  double variance = 0.0;
  double correction_mean = 0.0;
  double correction_var = 0.0;
  double wall_ms = 0.0;
};

struct EstimatorOptions {
  int w_corr = -1;  // correction grid level; -1 means same as w
  int threads = 1;
  /// Preconditioner shared across knots, factored once from the nominal
  /// matrix: "jacobi" (diagonal), "ic" (incomplete Cholesky) or "chol"
  /// (exact Cholesky; near-nominal knot matrices then converge in a few
  /// iterations).
  std::string precond = "chol";
};

/// Tail sensitivities at a collocation knot: the full five-term integrand
/// (diffusion, two forcing terms, two lifting terms) assembled with the
/// element quadrature.  Assumes `solver` was assembled at (y_s, 0) and takes
/// the already computed primal and adjoint solutions.
TailSensitivity compute_gamma(const FemSolver& solver, const FemSolution& primal,
                              const FemSolution& adjoint);

/// Convenience overload: assembles and solves at (y_s, 0).
TailSensitivity compute_gamma(const FemContext& ctx,
                              const Eigen::VectorXd& y_s);

/// First-order mean correction; identically zero for the independent
/// symmetric density (the only supported one).
double mean_correction(const SparseGrid& grid,
                       const std::vector<TailSensitivity>& gammas);

/// sum_n mu_{f,n} E_{y_s}[gamma_n^2] via sparse-grid quadrature.
double variance_correction(const SparseGrid& grid,
                           const std::vector<TailSensitivity>& gammas,
                           const DeformationSpec& spec);

EstimatorReport run_hybrid(const TriMesh& mesh, const DeformationSpec& spec,
                           const Problem& problem, const QoISpec& qoi, int w,
                           const EstimatorOptions& opts = {});

/// Pure collocation over the first `dims` parameters (default Ns); the
/// remaining parameters are frozen at zero.
EstimatorReport run_collocation(const TriMesh& mesh,
                                const DeformationSpec& spec,
                                const Problem& problem, const QoISpec& qoi,
                                int w, int dims = -1,
                                const EstimatorOptions& opts = {});

/// Deterministic knot-parallel map: fn(knot_id) for every knot, executed on
/// `threads` workers; results must be written by knot id.
void parallel_for(int count, int threads,
                  const std::function<void(int)>& fn);

}  // namespace uq
