#include "uq/perturbation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

namespace uq {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

TailSensitivity compute_gamma(const FemSolver& solver,
                              const FemSolution& primal,
                              const FemSolution& adjoint) {
  const FemContext& ctx = solver.context();
  const DeformationSpec& spec = ctx.spec;
  TailSensitivity out;
  out.gamma = Eigen::VectorXd::Zero(spec.Nf);
  if (spec.Nf == 0) return out;

  const Eigen::VectorXd& evec = solver.evec();
  const Eigen::VectorXd& devec = solver.devec();
  const bool has_f = static_cast<bool>(ctx.problem.f);
  // the lifting is parameter independent, so its tail derivative vanishes
  const Eigen::Vector2d dlift_grad = Eigen::Vector2d::Zero();

  const int nt = static_cast<int>(ctx.tris.size());
  for (int t = 0; t < nt; ++t) {
    const auto& td = ctx.tris[t];
    const auto& tri = ctx.mesh.triangles[t];
    Eigen::Vector2d gu = Eigen::Vector2d::Zero();  // grad of primal
    Eigen::Vector2d gw = Eigen::Vector2d::Zero();  // grad of lifting
    Eigen::Vector2d gp = Eigen::Vector2d::Zero();  // grad of adjoint
    for (int i = 0; i < 3; ++i) {
      gu += td.grads.col(i) * primal.coeffs[tri[i]];
      gw += td.grads.col(i) * ctx.lifting[tri[i]];
      gp += td.grads.col(i) * adjoint.coeffs[tri[i]];
    }
    for (int l = 0; l < 3; ++l) {
      const auto& qp = ctx.qps[3 * t + l];
      if (!qp.upper) continue;  // every tail derivative vanishes below
      const double e = 1.0 + evec[qp.x1_idx];
      const double s = (qp.x[1] - 0.5) * devec[qp.x1_idx];
      static constexpr int edge[3][2] = {{0, 1}, {1, 2}, {2, 0}};
      const double phi_mid = 0.5 * (adjoint.coeffs[tri[edge[l][0]]] +
                                    adjoint.coeffs[tri[edge[l][1]]]);
      double fval = 0.0;
      Eigen::Vector2d fgrad = Eigen::Vector2d::Zero();
      if (has_f) {
        Eigen::Vector2d fx(qp.x[0], (qp.x[1] - 0.5) * e + 0.5);
        fval = ctx.problem.f(fx);
        if (ctx.problem.grad_f) fgrad = ctx.problem.grad_f(fx);
      }
      // G at the quadrature point (for the lifting-derivative term)
      Eigen::Matrix2d G;
      G(0, 0) = qp.a * e;
      G(0, 1) = G(1, 0) = -qp.a * s;
      G(1, 1) = qp.a * (s * s + 1.0) / e;

      for (int n = 1; n <= spec.Nf; ++n) {
        const double tau = ctx.TPHI(qp.x1_idx, n - 1);          // d e / d ytil
        const double beta = (qp.x[1] - 0.5) * ctx.TDPHI(qp.x1_idx, n - 1);
        // dG/d ytil in closed form (differentiate the closed-form G)
        Eigen::Matrix2d dG;
        dG(0, 0) = qp.a * tau;
        dG(0, 1) = dG(1, 0) = -qp.a * beta;
        dG(1, 1) = qp.a * (2.0 * s * beta * e - (s * s + 1.0) * tau) / (e * e);

        double integrand = -gu.dot(dG * gp)          // primal-gradient term
                           - gw.dot(dG * gp)         // lifting-gradient term
                           - dlift_grad.dot(G * gp); // lifting tail derivative
        if (has_f) {
          const double df = fgrad[1] * (qp.x[1] - 0.5) * tau;  // d(f o F)
          integrand += df * e * phi_mid + fval * tau * phi_mid;
        }
        out.gamma[n - 1] += qp.w * integrand;
      }
    }
  }
  return out;
}

TailSensitivity compute_gamma(const FemContext& ctx,
                              const Eigen::VectorXd& y_s) {
  FemSolver solver(ctx);
  ParamPoint y = ParamPoint::zeros(ctx.spec.dim());
  y.y.head(y_s.size()) = y_s;
  solver.assemble(y);
  const FemSolution primal = solver.solve_primal();
  const FemSolution adjoint = solver.solve_adjoint();
  return compute_gamma(solver, primal, adjoint);
}

double mean_correction(const SparseGrid& grid,
                       const std::vector<TailSensitivity>& gammas) {
  if (static_cast<int>(gammas.size()) != grid.num_knots())
    throw std::invalid_argument("mean_correction: knot count mismatch");
  // E[y_f] = 0 for the independent symmetric density, so the first-order
  // mean contribution factors out to exactly zero.
  return 0.0;
}

double variance_correction(const SparseGrid& grid,
                           const std::vector<TailSensitivity>& gammas,
                           const DeformationSpec& spec) {
  if (static_cast<int>(gammas.size()) != grid.num_knots())
    throw std::invalid_argument("variance_correction: knot count mismatch");
  double corr = 0.0;
  std::vector<double> sq(grid.num_knots());
  for (int n = 1; n <= spec.Nf; ++n) {
    for (int k = 0; k < grid.num_knots(); ++k) {
      const double g = gammas[k].gamma[n - 1];
      sq[k] = g * g;
    }
    corr += spec.mu_tail(n) * grid.integrate(sq);
  }
  return corr;
}

namespace {

EstimatorReport run_core(const TriMesh& mesh, const DeformationSpec& spec,
                         const Problem& problem, const QoISpec& qoi, int w,
                         int dims, bool with_correction,
                         const EstimatorOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  spec.validate();
  if (dims < 1 || dims > spec.dim())
    throw std::invalid_argument("estimator: invalid collocated dimension count");
  if (with_correction && dims != spec.Ns)
    throw std::invalid_argument("hybrid estimator collocates exactly Ns dims");
  const int w_corr = (opts.w_corr < 0) ? w : opts.w_corr;
  if (w_corr > w)
    throw std::invalid_argument("estimator: w_corr must not exceed w");

  FemContext ctx(mesh, spec, problem, qoi);
  long solves = 0;

  // nominal solves: warm-start guesses and shared preconditioner
  FemSolver nominal(ctx);
  nominal.assemble(ParamPoint::zeros(spec.dim()));
  const std::shared_ptr<const Preconditioner> precond =
      make_preconditioner(opts.precond, nominal.matrix());
  nominal.set_preconditioner(precond);
  const FemSolution primal0 = nominal.solve_primal();
  ++solves;
  FemSolution adjoint0;
  const bool need_adjoint = with_correction && spec.Nf > 0;
  if (need_adjoint) {
    adjoint0 = nominal.solve_adjoint();
    ++solves;
  }

  const SparseGrid grid = build_grid(dims, w, IndexRule::Smolyak,
                                     -kSupportHalfWidth, kSupportHalfWidth);
  const int nk = grid.num_knots();

  // correction grid (nested in the main grid); map its knots to main ids
  SparseGrid grid_corr;
  std::vector<int> corr_of_main(nk, -1);
  int n_corr = 0;
  if (need_adjoint) {
    grid_corr = (w_corr == w)
                    ? grid
                    : build_grid(dims, w_corr, IndexRule::Smolyak,
                                 -kSupportHalfWidth, kSupportHalfWidth);
    n_corr = grid_corr.num_knots();
    std::map<std::vector<double>, int> main_of_coord;
    for (int k = 0; k < nk; ++k) {
      const auto col = grid.knots.col(k);
      main_of_coord.emplace(std::vector<double>(col.begin(), col.end()), k);
    }
    for (int k = 0; k < n_corr; ++k) {
      const auto col = grid_corr.knots.col(k);
      const auto it =
          main_of_coord.find(std::vector<double>(col.begin(), col.end()));
      if (it == main_of_coord.end())
        throw std::logic_error("correction grid not nested in main grid");
      corr_of_main[it->second] = k;
    }
  }

  std::vector<double> q_of_knot(nk);
  std::vector<TailSensitivity> gammas(n_corr);
  std::atomic<long> knot_solves{0};

  parallel_for(nk, opts.threads, [&](int k) {
    thread_local std::unique_ptr<FemSolver> solver;
    if (!solver || &solver->context() != &ctx) {
      solver = std::make_unique<FemSolver>(ctx);
      solver->set_preconditioner(precond);
    }
    ParamPoint y = ParamPoint::zeros(spec.dim());
    y.y.head(dims) = grid.knot_physical(k);
    solver->assemble(y);
    const FemSolution primal = solver->solve_primal(&primal0.coeffs);
    long used = 1;
    q_of_knot[k] = eval_qoi(ctx, primal);
    if (need_adjoint && corr_of_main[k] >= 0) {
      const FemSolution adjoint = solver->solve_adjoint(&adjoint0.coeffs);
      ++used;
      gammas[corr_of_main[k]] = compute_gamma(*solver, primal, adjoint);
    }
    knot_solves += used;
  });
  solves += knot_solves.load();

  EstimatorReport rep;
  rep.method = with_correction ? "hybrid" : "collocation";
  rep.Ns = dims;
  rep.Nf = with_correction ? spec.Nf : spec.dim() - dims;
  rep.w = w;
  rep.knots = nk;
  rep.pde_solves = solves;
  // moments centered at the first knot value: shift invariance makes a
  // parameter-independent QoI give exactly zero variance
  const double q0 = q_of_knot[0];
  std::vector<double> d(nk), d2(nk);
  for (int k = 0; k < nk; ++k) {
    d[k] = q_of_knot[k] - q0;
    d2[k] = d[k] * d[k];
  }
  const double dmean = grid.integrate(d);
  rep.mean = q0 + dmean;
  rep.variance = grid.integrate(d2) - dmean * dmean;
  if (need_adjoint) {
    rep.correction_mean = mean_correction(grid_corr, gammas);
    rep.correction_var = variance_correction(grid_corr, gammas, spec);
    rep.mean += rep.correction_mean;
    rep.variance += rep.correction_var;
  }
  rep.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return rep;
}

}  // namespace

EstimatorReport run_hybrid(const TriMesh& mesh, const DeformationSpec& spec,
                           const Problem& problem, const QoISpec& qoi, int w,
                           const EstimatorOptions& opts) {
  return run_core(mesh, spec, problem, qoi, w, spec.Ns, true, opts);
}

EstimatorReport run_collocation(const TriMesh& mesh,
                                const DeformationSpec& spec,
                                const Problem& problem, const QoISpec& qoi,
                                int w, int dims, const EstimatorOptions& opts) {
  return run_core(mesh, spec, problem, qoi, w, dims < 0 ? spec.Ns : dims,
                  false, opts);
}

}  // namespace uq
