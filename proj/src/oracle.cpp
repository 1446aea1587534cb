#include "uq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace uq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

double CounterRng::uniform01(std::uint64_t sample, std::uint64_t dim) const {
  const std::uint64_t ctr =
      splitmix64(seed_ ^ splitmix64(sample * 0x100000001b3ull + dim));
  return static_cast<double>(ctr >> 11) * 0x1.0p-53;
}

double CounterRng::uniform_support(std::uint64_t sample,
                                   std::uint64_t dim) const {
  return (2.0 * uniform01(sample, dim) - 1.0) * kSupportHalfWidth;
}

McResult monte_carlo(const TriMesh& mesh, const DeformationSpec& spec,
                     const Problem& problem, const QoISpec& qoi,
                     const McConfig& cfg) {
  if (cfg.samples < 2)
    throw std::invalid_argument("monte_carlo: need at least 2 samples");
  spec.validate();
  FemContext ctx(mesh, spec, problem, qoi);

  FemSolver nominal(ctx);
  nominal.assemble(ParamPoint::zeros(spec.dim()));
  const std::shared_ptr<const Preconditioner> precond =
      make_preconditioner(cfg.precond, nominal.matrix());
  nominal.set_preconditioner(precond);
  const FemSolution primal0 = nominal.solve_primal();

  const CounterRng rng(cfg.seed);
  const long M = cfg.samples;
  std::vector<double> q(M);
  parallel_for(static_cast<int>(M), cfg.threads, [&](int i) {
    thread_local std::unique_ptr<FemSolver> solver;
    if (!solver || &solver->context() != &ctx) {
      solver = std::make_unique<FemSolver>(ctx);
      solver->set_preconditioner(precond);
    }
    ParamPoint y = ParamPoint::zeros(spec.dim());
    for (int n = 0; n < spec.dim(); ++n)
      y.y[n] = rng.uniform_support(static_cast<std::uint64_t>(i), n);
    solver->assemble(y);
    q[i] = eval_qoi(ctx, solver->solve_primal(&primal0.coeffs));
  });

  // moments centered at the first sample so a constant stream gives exact 0
  const double q0 = q[0];
  double sd = 0.0;
  for (double v : q) sd += v - q0;
  const double mean = q0 + sd / M;
  double m2 = 0.0, m4 = 0.0;
  for (double v : q) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  McResult res;
  res.samples = M;
  res.mean = mean;
  res.variance = m2 / (M - 1);
  res.stderr_mean = std::sqrt(res.variance / M);
  m4 /= M;
  const double s2 = res.variance;
  const double var_of_var =
      (m4 - (double(M) - 3.0) / (double(M) - 1.0) * s2 * s2) / M;
  res.stderr_var = var_of_var > 0.0 ? std::sqrt(var_of_var) : 0.0;
  return res;
}

namespace {

std::string reference_key(const DeformationSpec& spec, int m, int w_ref) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "c=%.17g k=%.17g L=%.17g Lp=%.17g Ns=%d Nf=%d m=%d wref=%d",
                spec.c, spec.k, spec.L, spec.Lp, spec.Ns, spec.Nf, m, w_ref);
  return buf;
}

std::string key_hash(const std::string& key) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : key) h = (h ^ c) * 0x100000001b3ull;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

ReferenceStatistics reference_statistics(const TriMesh& mesh,
                                         const DeformationSpec& spec,
                                         const Problem& problem,
                                         const QoISpec& qoi, int w_ref,
                                         const std::string& cache_dir,
                                         const EstimatorOptions& opts) {
  const std::string key = reference_key(spec, mesh.m, w_ref);
  std::filesystem::path file;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    file = std::filesystem::path(cache_dir) / (key_hash(key) + ".ref");
    std::ifstream in(file);
    if (in) {
      std::string stored;
      std::getline(in, stored);
      ReferenceStatistics cached;
      if (stored == key && (in >> cached.mean >> cached.variance >> cached.knots)) {
        cached.from_cache = true;
        return cached;
      }
    }
  }
  const EstimatorReport rep =
      run_collocation(mesh, spec, problem, qoi, w_ref, spec.dim(), opts);
  ReferenceStatistics out{rep.mean, rep.variance, rep.knots, false};
  if (!cache_dir.empty()) {
    std::ofstream os(file, std::ios::binary);
    char buf[80];
    os << key << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %ld\n", out.mean,
                  out.variance, out.knots);
    os << buf;
  }
  return out;
}

FdReport fd_check(FdKind kind, const DeformationSpec& spec,
                  const FdOptions& opts) {
  spec.validate();
  if (spec.Nf < 1)
    throw std::invalid_argument("fd_check: spec needs at least one tail mode");
  if (opts.steps.size() < 2)
    throw std::invalid_argument("fd_check: need at least two steps");
  const CounterRng rng(opts.seed);
  FdReport rep;
  rep.trials = opts.trials;
  std::vector<double> orders;

  std::unique_ptr<FemContext> ctx;
  std::unique_ptr<FemSolver> solver;
  Eigen::VectorXd primal0;
  std::shared_ptr<const Preconditioner> precond;
  if (kind == FdKind::dQ) {
    const static QoISpec qoi{};
    static TriMesh mesh;  // reused across calls of the same m
    if (mesh.m != opts.mesh_m) mesh = build_mesh(opts.mesh_m);
    ctx = std::make_unique<FemContext>(mesh, spec, Problem{}, qoi);
    solver = std::make_unique<FemSolver>(*ctx);
    solver->assemble(ParamPoint::zeros(spec.dim()));
    precond = std::make_shared<CholPreconditioner>(solver->matrix());
    solver->set_preconditioner(precond);
    primal0 = solver->solve_primal().coeffs;
  }

  const auto qoi_at = [&](const ParamPoint& y) {
    solver->assemble(y);
    return eval_qoi(*ctx, solver->solve_primal(&primal0));
  };

  for (int trial = 0; trial < opts.trials; ++trial) {
    ParamPoint y = ParamPoint::zeros(spec.dim());
    // dQ linearizes at (y_s, 0), so only its collocated block is randomized
    const int n_random = kind == FdKind::dQ ? spec.Ns : spec.dim();
    for (int n = 0; n < n_random; ++n)
      y.y[n] = 0.9 * rng.uniform_support(trial, n);
    const int n = 1 + static_cast<int>(rng.uniform01(trial, 100) * spec.Nf);
    const double smu = spec.sqrt_mu_tail(n);
    std::vector<double> errs;

    if (kind == FdKind::dQ) {
      const TailSensitivity ts = compute_gamma(*ctx, y.y.head(spec.Ns));
      const double analytic = ts.gamma[n - 1];
      for (double eps : opts.steps) {
        ParamPoint yp = y, ym = y;
        yp.y[spec.Ns + n - 1] += eps / smu;  // step eps in the scaled variable
        ym.y[spec.Ns + n - 1] -= eps / smu;
        const double fd = (qoi_at(yp) - qoi_at(ym)) / (2.0 * eps);
        errs.push_back(std::abs(fd - analytic) /
                       std::max(std::abs(analytic), 1e-300));
      }
    } else {
      const Eigen::Vector2d x(rng.uniform01(trial, 200),
                              0.5 + 0.5 * rng.uniform01(trial, 201));
      for (double h : opts.steps) {
        ParamPoint yp = y, ym = y;
        yp.y[spec.Ns + n - 1] += h / smu;  // step h in the scaled variable
        ym.y[spec.Ns + n - 1] -= h / smu;
        if (kind == FdKind::dG) {
          const Eigen::Matrix2d fd =
              (eval_jacobian(spec, yp, x).G - eval_jacobian(spec, ym, x).G) /
              (2.0 * h);
          const Eigen::Matrix2d an = eval_dG_tail(spec, y, x, n);
          errs.push_back((fd - an).norm() / std::max(an.norm(), 1e-300));
        } else {
          const double fd = (eval_jacobian(spec, yp, x).detF -
                             eval_jacobian(spec, ym, x).detF) /
                            (2.0 * h);
          const double an = eval_ddet_tail(spec, y, x, n);
          errs.push_back(std::abs(fd - an) / std::max(std::abs(an), 1e-300));
        }
      }
    }

    rep.max_rel_error = std::max(rep.max_rel_error, errs.back());
    const double e1 = errs[0], e2 = errs[1];
    const double h1 = opts.steps[0], h2 = opts.steps[1];
    // below the roundoff floor the ratio measures noise, not truncation
    constexpr double kFloor = 1e-9;
    if (e1 > kFloor && e2 > kFloor)
      orders.push_back(std::log(e1 / e2) / std::log(h1 / h2));
  }
  if (orders.empty()) {
    // the difference quotient is exact (the map is affine in this direction)
    rep.observed_order = std::numeric_limits<double>::infinity();
  } else {
    std::nth_element(orders.begin(), orders.begin() + orders.size() / 2,
                     orders.end());
    rep.observed_order = orders[orders.size() / 2];
  }
  return rep;
}

}  // namespace uq
