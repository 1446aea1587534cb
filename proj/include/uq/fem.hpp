#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "uq/deformation.hpp"
#include "uq/mesh.hpp"

namespace uq {

struct SolverDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Smooth bump: exp(-1 / (1 - 4(t - 1/2)^2)) on (0,1), zero outside.
double bump(double t);

/// QoI weight q(x) = bump(x1) bump(2 x2), supported on (0,1) x (0,1/2).
struct QoISpec {
  double weight(const Eigen::Vector2d& x) const {
    if (x[1] >= 0.5) return 0.0;
    return bump(x[0]) * bump(2.0 * x[1]);
  }
};

/// Coefficient and forcing data.  `a` lives on the reference square (a
/// composed with the map is parameter independent); `f` and its gradient
/// live on the physical domain.  Null callables mean a = 1 and f = 0.
struct Problem {
  std::function<double(const Eigen::Vector2d&)> a;
  std::function<double(const Eigen::Vector2d&)> f;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> grad_f;
};

struct FemSolution {
  enum class Kind { Primal, Adjoint, Lifting };
  Kind kind = Kind::Primal;
  Eigen::VectorXd coeffs;  // one value per mesh node
};

struct SolveStats {
  int iterations = 0;
  double rel_residual = 0.0;
};

struct Preconditioner {
  virtual ~Preconditioner() = default;
  virtual void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const = 0;
};

struct JacobiPreconditioner final : Preconditioner {
  Eigen::VectorXd inv_diag;
  explicit JacobiPreconditioner(const Eigen::SparseMatrix<double>& a);
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const override;
};

/// Incomplete-Cholesky preconditioner, typically factored once from the
/// nominal (y = 0) matrix and shared across knots.
struct IcPreconditioner final : Preconditioner {
  Eigen::IncompleteCholesky<double> ic;
  explicit IcPreconditioner(const Eigen::SparseMatrix<double>& a);
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const override;
};

/// Exact sparse Cholesky of a fixed matrix used as a preconditioner.  With
/// the nominal (y = 0) matrix this makes PCG converge in a handful of
/// iterations for every nearby knot matrix.
struct CholPreconditioner final : Preconditioner {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  explicit CholPreconditioner(const Eigen::SparseMatrix<double>& a);
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const override;
};

struct PcgOptions {
  double rel_tol = 1e-10;
  int max_iterations = 0;  // 0 -> 50 sqrt(n)
};

/// Preconditioned conjugate gradient for SPD systems.  Throws
/// SolverDivergence if the residual target is not met within the cap.
Eigen::VectorXd pcg(const Eigen::SparseMatrix<double>& a,
                    const Eigen::VectorXd& b, const Preconditioner& prec,
                    const Eigen::VectorXd* guess = nullptr,
                    const PcgOptions& opts = {}, SolveStats* stats = nullptr);

/// Immutable per-(mesh, spec, problem, qoi) data shared by all knot solves:
/// quadrature tables, mode tables at the distinct quadrature x1 values,
/// Dirichlet numbering, lifting vector, QoI vector and sparsity pattern.
class FemContext {
 public:
  FemContext(const TriMesh& mesh, DeformationSpec spec, Problem problem,
             QoISpec qoi);

  const TriMesh& mesh;
  DeformationSpec spec;
  Problem problem;
  QoISpec qoi;

  int n_unknowns = 0;
  std::vector<int> unknown_of_node;  // -1 for Dirichlet nodes
  std::vector<int> node_of_unknown;

  Eigen::VectorXd lifting;   // nodal boundary interpolation, zero inside
  Eigen::VectorXd qoi_rhs;   // full nodal vector of integral(q hat_i)

  struct TriData {
    Eigen::Matrix<double, 2, 3> grads;  // hat gradients, constant per triangle
    double area;
  };
  struct QuadPoint {
    Eigen::Vector2d x;
    double w;       // quadrature weight (area / 3)
    int x1_idx;     // row into the mode tables
    bool upper;     // x2 > 0.5
    double a;       // diffusion coefficient at x
  };
  std::vector<TriData> tris;
  std::vector<QuadPoint> qps;  // 3 per triangle, triangle-major

  // Mode tables at the distinct quadrature x1 values (multiples of h/2).
  // Columns carry the folded coefficients so that at a table row r:
  //   e  = 1 + (PHI.row(r)  * y),   d(e)/dx1 = DPHI.row(r) * y,
  //   d(e)/d ytil_n  = TPHI(r, n-1)  (scaled tail variables).
  Eigen::MatrixXd PHI, DPHI;    // n_x1 x N
  Eigen::MatrixXd TPHI, TDPHI;  // n_x1 x Nf

  Eigen::SparseMatrix<double> pattern;       // zero values, compressed
  std::vector<std::array<int, 9>> slots;     // value slot per (tri, local i,j)

  std::shared_ptr<const Preconditioner> default_precond;  // Jacobi of nominal

  FemSolution lifting_solution() const {
    return {FemSolution::Kind::Lifting, lifting};
  }
};

/// Per-thread workspace: assembled matrix and load for one parameter point.
class FemSolver {
 public:
  explicit FemSolver(const FemContext& ctx);

  /// Assemble stiffness and load at y (Dirichlet rows/columns eliminated).
  void assemble(const ParamPoint& y);

  FemSolution solve_primal(const Eigen::VectorXd* guess = nullptr);
  FemSolution solve_adjoint(const Eigen::VectorXd* guess = nullptr);

  const Eigen::SparseMatrix<double>& matrix() const { return A_; }
  const Eigen::VectorXd& load() const { return b_; }
  /// e - 1 and d(e)/dx1 per mode-table row at the current y.
  const Eigen::VectorXd& evec() const { return evec_; }
  const Eigen::VectorXd& devec() const { return devec_; }
  const FemContext& context() const { return ctx_; }
  SolveStats last_stats;

  void set_preconditioner(std::shared_ptr<const Preconditioner> p) {
    precond_ = std::move(p);
  }

 private:
  const FemContext& ctx_;
  Eigen::SparseMatrix<double> A_;
  Eigen::VectorXd b_;
  Eigen::VectorXd evec_, devec_;
  std::shared_ptr<const Preconditioner> precond_;
  FemSolution solve(const Eigen::VectorXd& rhs, FemSolution::Kind kind,
                    const Eigen::VectorXd* guess);
};

/// Builds the named preconditioner ("jacobi", "ic" or "chol") from a matrix,
/// typically the nominal one shared across knots.
std::shared_ptr<const Preconditioner> make_preconditioner(
    const std::string& name, const Eigen::SparseMatrix<double>& a);

/// Nodal vector with bump(x1) on top-edge nodes and zero elsewhere; vanishes
/// on the undeformed lower half so it never contributes to the QoI.
FemSolution build_lifting(const TriMesh& mesh);

/// Quadrature evaluation of the QoI weight against a nodal field.
double eval_qoi(const FemContext& ctx, const FemSolution& sol);

}  // namespace uq
