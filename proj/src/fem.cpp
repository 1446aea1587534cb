#include "uq/fem.hpp"

#include <algorithm>
#include <cmath>

namespace uq {

double bump(double t) {
  const double d = t - 0.5;
  const double den = 1.0 - 4.0 * d * d;
  if (den <= 0.0) return 0.0;
  return std::exp(-1.0 / den);
}

// ---------------------------------------------------------------------------
// preconditioners and PCG

JacobiPreconditioner::JacobiPreconditioner(const Eigen::SparseMatrix<double>& a)
    : inv_diag(a.diagonal().cwiseInverse()) {}

void JacobiPreconditioner::apply(const Eigen::VectorXd& r,
                                 Eigen::VectorXd& z) const {
  z = inv_diag.cwiseProduct(r);
}

IcPreconditioner::IcPreconditioner(const Eigen::SparseMatrix<double>& a) {
  ic.compute(a);
  if (ic.info() != Eigen::Success)
    throw std::runtime_error("incomplete Cholesky factorization failed");
}

void IcPreconditioner::apply(const Eigen::VectorXd& r,
                             Eigen::VectorXd& z) const {
  z = ic.solve(r);
}

CholPreconditioner::CholPreconditioner(const Eigen::SparseMatrix<double>& a) {
  llt.compute(a);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sparse Cholesky factorization failed");
}

void CholPreconditioner::apply(const Eigen::VectorXd& r,
                               Eigen::VectorXd& z) const {
  z = llt.solve(r);
}

Eigen::VectorXd pcg(const Eigen::SparseMatrix<double>& a,
                    const Eigen::VectorXd& b, const Preconditioner& prec,
                    const Eigen::VectorXd* guess, const PcgOptions& opts,
                    SolveStats* stats) {
  const int n = static_cast<int>(a.rows());
  const double bnorm = b.norm();
  Eigen::VectorXd x =
      guess != nullptr ? *guess : Eigen::VectorXd::Zero(n).eval();
  if (bnorm == 0.0) {
    if (stats != nullptr) *stats = {0, 0.0};
    return Eigen::VectorXd::Zero(n);
  }
  const int max_it = opts.max_iterations > 0
                         ? opts.max_iterations
                         : static_cast<int>(50.0 * std::sqrt(double(n))) + 1;
  Eigen::VectorXd r = b - a * x;
  Eigen::VectorXd z(n), p(n), ap(n);
  prec.apply(r, z);
  p = z;
  double rz = r.dot(z);
  int it = 0;
  double rel = r.norm() / bnorm;
  while (rel > opts.rel_tol && it < max_it) {
    ap.noalias() = a * p;
    const double alpha = rz / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    ++it;
    rel = r.norm() / bnorm;
    if (rel <= opts.rel_tol) break;
    prec.apply(r, z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (stats != nullptr) *stats = {it, rel};
  if (rel > opts.rel_tol)
    throw SolverDivergence("pcg: residual " + std::to_string(rel) +
                           " after " + std::to_string(it) + " iterations");
  return x;
}

// ---------------------------------------------------------------------------
// context

std::shared_ptr<const Preconditioner> make_preconditioner(
    const std::string& name, const Eigen::SparseMatrix<double>& a) {
  if (name == "jacobi") return std::make_shared<JacobiPreconditioner>(a);
  if (name == "ic") return std::make_shared<IcPreconditioner>(a);
  if (name == "chol") return std::make_shared<CholPreconditioner>(a);
  throw std::invalid_argument("unknown preconditioner '" + name + "'");
}

FemSolution build_lifting(const TriMesh& mesh) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.tag[i] == BoundaryTag::Top) w[i] = bump(mesh.nodes[i][0]);
  return {FemSolution::Kind::Lifting, std::move(w)};
}

FemContext::FemContext(const TriMesh& mesh_in, DeformationSpec spec_in,
                       Problem problem_in, QoISpec qoi_in)
    : mesh(mesh_in),
      spec(spec_in),
      problem(std::move(problem_in)),
      qoi(qoi_in) {
  spec.validate();
  const int nn = mesh.num_nodes();
  unknown_of_node.assign(nn, -1);
  for (int i = 0; i < nn; ++i) {
    if (!mesh.is_dirichlet(i)) {
      unknown_of_node[i] = n_unknowns++;
      node_of_unknown.push_back(i);
    }
  }
  lifting = build_lifting(mesh).coeffs;

  // mode tables at x1 = r h / 2
  const int n_x1 = 2 * mesh.m - 1;
  const int N = spec.dim();
  PHI.resize(n_x1, N);
  DPHI.resize(n_x1, N);
  TPHI.resize(n_x1, spec.Nf);
  TDPHI.resize(n_x1, spec.Nf);
  for (int r = 0; r < n_x1; ++r) {
    const double x1 = r * mesh.h / 2.0;
    PHI(r, 0) = spec.c * spec.first_mode_amp();
    DPHI(r, 0) = 0.0;
    for (int n = 2; n <= N; ++n) {
      PHI(r, n - 1) = spec.c * spec.sqrt_mu(n) * mode_phi(spec, n, x1);
      DPHI(r, n - 1) = spec.c * spec.sqrt_mu(n) * mode_dphi(spec, n, x1);
    }
    for (int j = 1; j <= spec.Nf; ++j) {
      TPHI(r, j - 1) = spec.c * mode_phi(spec, spec.Ns + j, x1);
      TDPHI(r, j - 1) = spec.c * mode_dphi(spec, spec.Ns + j, x1);
    }
  }

  // per-triangle hat gradients, quadrature points at edge midpoints
  const int nt = mesh.num_triangles();
  tris.resize(nt);
  qps.resize(3u * nt);
  qoi_rhs = Eigen::VectorXd::Zero(nn);
  const auto a_of = [this](const Eigen::Vector2d& x) {
    return problem.a ? problem.a(x) : 1.0;
  };
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector2d p0 = mesh.nodes[tri[0]];
    const Eigen::Vector2d p1 = mesh.nodes[tri[1]];
    const Eigen::Vector2d p2 = mesh.nodes[tri[2]];
    const double twice_area =
        (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    TriData& td = tris[t];
    td.area = 0.5 * twice_area;
    td.grads.col(0) = Eigen::Vector2d(p1[1] - p2[1], p2[0] - p1[0]) / twice_area;
    td.grads.col(1) = Eigen::Vector2d(p2[1] - p0[1], p0[0] - p2[0]) / twice_area;
    td.grads.col(2) = Eigen::Vector2d(p0[1] - p1[1], p1[0] - p0[0]) / twice_area;

    static constexpr int edge[3][2] = {{0, 1}, {1, 2}, {2, 0}};
    for (int l = 0; l < 3; ++l) {
      QuadPoint& qp = qps[3 * t + l];
      const int na = tri[edge[l][0]], nb = tri[edge[l][1]];
      qp.x = 0.5 * (mesh.nodes[na] + mesh.nodes[nb]);
      qp.w = td.area / 3.0;
      qp.x1_idx = na % mesh.m + nb % mesh.m;
      qp.upper = qp.x[1] > 0.5;
      qp.a = a_of(qp.x);
      const double qv = qoi.weight(qp.x);
      if (qv != 0.0) {
        qoi_rhs[na] += qp.w * qv * 0.5;
        qoi_rhs[nb] += qp.w * qv * 0.5;
      }
    }
  }

  // sparsity pattern over interior unknowns and per-triangle value slots
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9u * nt);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      const int ui = unknown_of_node[tri[i]];
      if (ui < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int uj = unknown_of_node[tri[j]];
        if (uj >= 0) trip.emplace_back(ui, uj, 0.0);
      }
    }
  }
  pattern.resize(n_unknowns, n_unknowns);
  pattern.setFromTriplets(trip.begin(), trip.end());
  pattern.makeCompressed();

  slots.assign(nt, {-1, -1, -1, -1, -1, -1, -1, -1, -1});
  const auto* outer = pattern.outerIndexPtr();
  const auto* inner = pattern.innerIndexPtr();
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      const int ui = unknown_of_node[tri[i]];
      if (ui < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int uj = unknown_of_node[tri[j]];
        if (uj < 0) continue;
        const auto* lo = inner + outer[uj];
        const auto* hi = inner + outer[uj + 1];
        const auto* it = std::lower_bound(lo, hi, ui);
        slots[t][3 * i + j] = static_cast<int>(it - inner);
      }
    }
  }

  // nominal-matrix Jacobi preconditioner as the default
  FemSolver nominal(*this);
  nominal.assemble(ParamPoint::zeros(spec.dim()));
  default_precond = std::make_shared<JacobiPreconditioner>(nominal.matrix());
}

// ---------------------------------------------------------------------------
// solver workspace

FemSolver::FemSolver(const FemContext& ctx)
    : ctx_(ctx), A_(ctx.pattern), precond_(ctx.default_precond) {
  b_.resize(ctx.n_unknowns);
}

void FemSolver::assemble(const ParamPoint& y) {
  if (y.y.size() != ctx_.spec.dim())
    throw std::invalid_argument("assemble: parameter dimension mismatch");
  evec_.noalias() = ctx_.PHI * y.y;
  devec_.noalias() = ctx_.DPHI * y.y;

  Eigen::Map<Eigen::VectorXd>(A_.valuePtr(), A_.nonZeros()).setZero();
  b_.setZero();
  double* vals = A_.valuePtr();

  const bool has_f = static_cast<bool>(ctx_.problem.f);
  const int nt = static_cast<int>(ctx_.tris.size());
  Eigen::Matrix2d G;
  Eigen::Matrix3d k_local;
  for (int t = 0; t < nt; ++t) {
    const auto& td = ctx_.tris[t];
    const auto& tri = ctx_.mesh.triangles[t];
    Eigen::Matrix2d gbar = Eigen::Matrix2d::Zero();
    double floc[3] = {0.0, 0.0, 0.0};
    for (int l = 0; l < 3; ++l) {
      const auto& qp = ctx_.qps[3 * t + l];
      double det = 1.0;
      if (qp.upper) {
        const double e = 1.0 + evec_[qp.x1_idx];
        if (e <= kDetEps)
          throw NonInvertibleMap("assemble: map fold at quadrature point");
        const double s = (qp.x[1] - 0.5) * devec_[qp.x1_idx];
        G(0, 0) = qp.a * e;
        G(0, 1) = G(1, 0) = -qp.a * s;
        G(1, 1) = qp.a * (s * s + 1.0) / e;
        det = e;
      } else {
        G = qp.a * Eigen::Matrix2d::Identity();
      }
      gbar += qp.w * G;
      if (has_f) {
        Eigen::Vector2d fx = qp.x;
        if (qp.upper) fx[1] = (qp.x[1] - 0.5) * det + 0.5;
        const double fv = ctx_.problem.f(fx) * det * qp.w * 0.5;
        // hat values at the edge midpoint: 1/2 on the edge vertices
        static constexpr int edge[3][2] = {{0, 1}, {1, 2}, {2, 0}};
        floc[edge[l][0]] += fv;
        floc[edge[l][1]] += fv;
      }
    }
    k_local.noalias() = td.grads.transpose() * gbar * td.grads;

    const auto& slot = ctx_.slots[t];
    for (int i = 0; i < 3; ++i) {
      const int ui = ctx_.unknown_of_node[tri[i]];
      if (ui < 0) continue;
      b_[ui] += floc[i];
      for (int j = 0; j < 3; ++j) {
        const int s = slot[3 * i + j];
        if (s >= 0) {
          vals[s] += k_local(i, j);
        } else {
          b_[ui] -= k_local(i, j) * ctx_.lifting[tri[j]];
        }
      }
    }
  }
}

FemSolution FemSolver::solve(const Eigen::VectorXd& rhs,
                             FemSolution::Kind kind,
                             const Eigen::VectorXd* guess) {
  Eigen::VectorXd g;
  const Eigen::VectorXd* gp = nullptr;
  if (guess != nullptr) {
    g.resize(ctx_.n_unknowns);
    for (int u = 0; u < ctx_.n_unknowns; ++u)
      g[u] = (*guess)[ctx_.node_of_unknown[u]];
    gp = &g;
  }
  const Eigen::VectorXd x = pcg(A_, rhs, *precond_, gp, {}, &last_stats);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(ctx_.mesh.num_nodes());
  for (int u = 0; u < ctx_.n_unknowns; ++u)
    full[ctx_.node_of_unknown[u]] = x[u];
  return {kind, std::move(full)};
}

FemSolution FemSolver::solve_primal(const Eigen::VectorXd* guess) {
  return solve(b_, FemSolution::Kind::Primal, guess);
}

FemSolution FemSolver::solve_adjoint(const Eigen::VectorXd* guess) {
  Eigen::VectorXd rhs(ctx_.n_unknowns);
  for (int u = 0; u < ctx_.n_unknowns; ++u)
    rhs[u] = ctx_.qoi_rhs[ctx_.node_of_unknown[u]];
  return solve(rhs, FemSolution::Kind::Adjoint, guess);
}

double eval_qoi(const FemContext& ctx, const FemSolution& sol) {
  return ctx.qoi_rhs.dot(sol.coeffs);
}

}  // namespace uq
