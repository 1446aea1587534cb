#include <doctest.h>

#include <cmath>
#include <random>

#include "uq/perturbation.hpp"

using namespace uq;

namespace {

const TriMesh& mesh33() {
  static const TriMesh mesh = build_mesh(33);
  return mesh;
}

// independent route: the tail integrand assembled from the generic
// derivative kernels (matrix identities) instead of the closed form
Eigen::VectorXd gamma_reference(const FemSolver& solver,
                                const FemSolution& primal,
                                const FemSolution& adjoint,
                                const ParamPoint& y) {
  const FemContext& ctx = solver.context();
  const DeformationSpec& spec = ctx.spec;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(spec.Nf);
  const bool has_f = static_cast<bool>(ctx.problem.f);
  for (std::size_t t = 0; t < ctx.tris.size(); ++t) {
    const auto& td = ctx.tris[t];
    const auto& tri = ctx.mesh.triangles[t];
    Eigen::Vector2d gu = Eigen::Vector2d::Zero();
    Eigen::Vector2d gw = Eigen::Vector2d::Zero();
    Eigen::Vector2d gp = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) {
      gu += td.grads.col(i) * primal.coeffs[tri[i]];
      gw += td.grads.col(i) * ctx.lifting[tri[i]];
      gp += td.grads.col(i) * adjoint.coeffs[tri[i]];
    }
    for (int l = 0; l < 3; ++l) {
      const auto& qp = ctx.qps[3 * t + l];
      if (!qp.upper) continue;
      static constexpr int edge[3][2] = {{0, 1}, {1, 2}, {2, 0}};
      const double phi_mid = 0.5 * (adjoint.coeffs[tri[edge[l][0]]] +
                                    adjoint.coeffs[tri[edge[l][1]]]);
      for (int n = 1; n <= spec.Nf; ++n) {
        const Eigen::Matrix2d dg = eval_dG_tail(spec, y, qp.x, n, qp.a);
        double v = -(gu + gw).dot(dg * gp);
        if (has_f) {
          const JacobianData j = eval_jacobian(spec, y, qp.x, qp.a);
          const double ddet = eval_ddet_tail(spec, y, qp.x, n);
          const Eigen::Vector2d fx = j.F;
          const Eigen::Vector2d gf =
              ctx.problem.grad_f ? ctx.problem.grad_f(fx)
                                 : Eigen::Vector2d::Zero();
          // d(f o F)/d ytil = grad f . dF/d ytil, with dF_2 = (x2-.5) tau
          const double tau = spec.c * mode_phi(spec, spec.Ns + n, qp.x[0]);
          v += gf[1] * (qp.x[1] - 0.5) * tau * j.detF * phi_mid;
          v += ctx.problem.f(fx) * ddet * phi_mid;
        }
        gamma[n - 1] += qp.w * v;
      }
    }
  }
  return gamma;
}

}  // namespace

TEST_CASE("gamma: zero amplitude and empty tail") {
  DeformationSpec flat;
  flat.c = 0.0;
  FemContext ctx(mesh33(), flat, Problem{}, QoISpec{});
  const TailSensitivity ts = compute_gamma(ctx, Eigen::VectorXd::Zero(flat.Ns));
  CHECK(ts.gamma.size() == flat.Nf);
  CHECK(ts.gamma.norm() == 0.0);

  DeformationSpec no_tail;
  no_tail.Ns = 4;
  no_tail.Nf = 0;
  FemContext ctx0(mesh33(), no_tail, Problem{}, QoISpec{});
  const TailSensitivity empty =
      compute_gamma(ctx0, Eigen::VectorXd::Zero(no_tail.Ns));
  CHECK(empty.gamma.size() == 0);
}

TEST_CASE("gamma: closed form matches the generic-kernel route") {
  DeformationSpec spec;
  Problem forced;  // exercise the forcing terms too
  forced.f = [](const Eigen::Vector2d& x) {
    return std::sin(3.0 * x[0]) * x[1] + 0.5;
  };
  forced.grad_f = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(3.0 * std::cos(3.0 * x[0]) * x[1],
                           std::sin(3.0 * x[0]));
  };
  FemContext ctx(mesh33(), spec, forced, QoISpec{});
  FemSolver solver(ctx);
  std::mt19937 gen(53);
  std::uniform_real_distribution<double> dist(-kSupportHalfWidth,
                                              kSupportHalfWidth);
  for (int trial = 0; trial < 5; ++trial) {
    ParamPoint y = ParamPoint::zeros(spec.dim());
    for (int n = 0; n < spec.Ns; ++n) y.y[n] = dist(gen);
    solver.assemble(y);
    const FemSolution primal = solver.solve_primal();
    const FemSolution adjoint = solver.solve_adjoint();
    const TailSensitivity ts = compute_gamma(solver, primal, adjoint);
    const Eigen::VectorXd ref = gamma_reference(solver, primal, adjoint, y);
    CHECK((ts.gamma - ref).norm() < 1e-12 * ref.norm());
  }
}

TEST_CASE("gamma: matches the directional derivative of the discrete QoI") {
  DeformationSpec spec;
  FemContext ctx(mesh33(), spec, Problem{}, QoISpec{});
  FemSolver solver(ctx);
  std::mt19937 gen(59);
  std::uniform_real_distribution<double> dist(-kSupportHalfWidth,
                                              kSupportHalfWidth);
  for (int trial = 0; trial < 10; ++trial) {
    ParamPoint y = ParamPoint::zeros(spec.dim());
    for (int n = 0; n < spec.Ns; ++n) y.y[n] = 0.9 * dist(gen);
    const int n = 1 + trial % spec.Nf;

    const TailSensitivity ts = compute_gamma(ctx, y.y.head(spec.Ns));

    const double h = 1e-3;  // step in the scaled tail variable
    const double smu = spec.sqrt_mu_tail(n);
    const auto qoi_at = [&](double step) {
      ParamPoint yy = y;
      yy.y[spec.Ns + n - 1] += step / smu;
      solver.assemble(yy);
      return eval_qoi(ctx, solver.solve_primal());
    };
    const double fd = (qoi_at(h) - qoi_at(-h)) / (2.0 * h);
    CHECK(ts.gamma[n - 1] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("corrections: mean vanishes, variance accumulates mu-weighted") {
  DeformationSpec spec;
  const SparseGrid grid = build_grid(spec.Ns, 1, IndexRule::Smolyak,
                                     -kSupportHalfWidth, kSupportHalfWidth);
  std::vector<TailSensitivity> gammas(grid.num_knots());
  for (auto& g : gammas) g.gamma = Eigen::VectorXd::Constant(spec.Nf, 2.0);
  CHECK(mean_correction(grid, gammas) == 0.0);

  double expect = 0.0;
  for (int n = 1; n <= spec.Nf; ++n) expect += spec.mu_tail(n) * 4.0;
  CHECK(variance_correction(grid, gammas, spec) ==
        doctest::Approx(expect).epsilon(1e-12));

  gammas.pop_back();
  CHECK_THROWS_AS(mean_correction(grid, gammas), std::invalid_argument);
  CHECK_THROWS_AS(variance_correction(grid, gammas, spec),
                  std::invalid_argument);
}

TEST_CASE("estimators: hybrid with empty tail equals pure collocation") {
  DeformationSpec spec;
  spec.Ns = 4;
  spec.Nf = 0;
  const EstimatorReport hyb =
      run_hybrid(mesh33(), spec, Problem{}, QoISpec{}, 2);
  const EstimatorReport col =
      run_collocation(mesh33(), spec, Problem{}, QoISpec{}, 2);
  CHECK(hyb.mean == col.mean);  // bit-for-bit
  CHECK(hyb.variance == col.variance);
  CHECK(hyb.knots == col.knots);
  CHECK(hyb.correction_mean == 0.0);
  CHECK(hyb.correction_var == 0.0);
}

TEST_CASE("estimators: corrections are non-negative and act additively") {
  DeformationSpec spec;  // Ns = 4, Nf = 11
  EstimatorOptions opts;
  opts.w_corr = 1;
  const EstimatorReport hyb =
      run_hybrid(mesh33(), spec, Problem{}, QoISpec{}, 2, opts);
  const EstimatorReport col =
      run_collocation(mesh33(), spec, Problem{}, QoISpec{}, 2);
  CHECK(hyb.correction_mean == 0.0);
  CHECK(hyb.correction_var > 0.0);
  CHECK(hyb.mean == col.mean);
  CHECK(hyb.variance ==
        doctest::Approx(col.variance + hyb.correction_var).epsilon(1e-14));
  CHECK(hyb.pde_solves > col.pde_solves);  // adjoint solves on the sub-grid

  // zero amplitude: variance and correction vanish exactly
  DeformationSpec flat = spec;
  flat.c = 0.0;
  const EstimatorReport deg =
      run_hybrid(mesh33(), flat, Problem{}, QoISpec{}, 2, opts);
  CHECK(deg.variance == 0.0);
  CHECK(deg.correction_var == 0.0);
}

TEST_CASE("estimators: amplitude scaling of the variance correction") {
  // gamma is first order in c around the nominal geometry, so the
  // correction scales like c^2 (up to higher-order geometry feedback)
  DeformationSpec spec;
  DeformationSpec half = spec;
  half.c = spec.c / 2.0;
  EstimatorOptions opts;
  opts.w_corr = 0;
  const EstimatorReport full =
      run_hybrid(mesh33(), spec, Problem{}, QoISpec{}, 0, opts);
  const EstimatorReport halfc =
      run_hybrid(mesh33(), half, Problem{}, QoISpec{}, 0, opts);
  CHECK(full.correction_var / halfc.correction_var ==
        doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("estimators: thread count does not change the result") {
  DeformationSpec spec;
  EstimatorOptions serial, pooled;
  pooled.threads = 8;
  const EstimatorReport a =
      run_hybrid(mesh33(), spec, Problem{}, QoISpec{}, 2, serial);
  const EstimatorReport b =
      run_hybrid(mesh33(), spec, Problem{}, QoISpec{}, 2, pooled);
  CHECK(a.mean == b.mean);
  CHECK(a.variance == b.variance);
  CHECK(a.correction_var == b.correction_var);
  CHECK(a.pde_solves == b.pde_solves);
}

TEST_CASE("estimators: argument validation") {
  DeformationSpec spec;
  CHECK_THROWS_AS(
      run_collocation(mesh33(), spec, Problem{}, QoISpec{}, 2, spec.dim() + 1),
      std::invalid_argument);
  EstimatorOptions opts;
  opts.w_corr = 3;
  CHECK_THROWS_AS(run_hybrid(mesh33(), spec, Problem{}, QoISpec{}, 2, opts),
                  std::invalid_argument);
}

TEST_CASE("parallel_for: covers every index once and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 8, [&](int i) { hits[i]++; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](int i) {
                                 if (i == 57) throw std::runtime_error("x");
                               }),
                  std::runtime_error);
}
