#include <doctest.h>

#include <cmath>
#include <random>

#include "uq/fem.hpp"
#include "uq/mesh.hpp"

using namespace uq;

namespace {

// high-resolution 1-D Simpson quadrature
double simpson(const std::function<double(double)>& f, double a, double b,
               int n = 4000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& a) {
  return Eigen::MatrixXd(a);
}

}  // namespace

TEST_CASE("mesh: counts, spacing, orientation") {
  const TriMesh m3 = build_mesh(3);
  CHECK(m3.num_nodes() == 9);
  CHECK(m3.num_triangles() == 8);
  CHECK(m3.h == doctest::Approx(0.5));

  const TriMesh m5 = build_mesh(5);
  CHECK(m5.h == doctest::Approx(0.25));
  CHECK(m5.num_nodes() == 25);
  CHECK(m5.num_triangles() == 32);

  // all triangles counterclockwise with area h^2/2
  for (const auto& tri : m5.triangles) {
    const Eigen::Vector2d p0 = m5.nodes[tri[0]];
    const Eigen::Vector2d p1 = m5.nodes[tri[1]];
    const Eigen::Vector2d p2 = m5.nodes[tri[2]];
    const double twice_area =
        (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    CHECK(twice_area == doctest::Approx(m5.h * m5.h).epsilon(1e-14));
  }

  CHECK_THROWS(build_mesh(2));
}

TEST_CASE("mesh: boundary tags with corner priority") {
  const TriMesh m = build_mesh(5);
  // corner priority: top > bottom > left > right
  CHECK(m.tag[m.node_id(m.m - 1, 0)] == BoundaryTag::Top);      // top-left
  CHECK(m.tag[m.node_id(m.m - 1, m.m - 1)] == BoundaryTag::Top);
  CHECK(m.tag[m.node_id(0, 0)] == BoundaryTag::Bottom);         // bottom-left
  CHECK(m.tag[m.node_id(0, m.m - 1)] == BoundaryTag::Bottom);
  CHECK(m.tag[m.node_id(2, 0)] == BoundaryTag::Left);
  CHECK(m.tag[m.node_id(2, m.m - 1)] == BoundaryTag::Right);
  CHECK(m.tag[m.node_id(2, 2)] == BoundaryTag::Interior);
  CHECK(m.is_dirichlet(m.node_id(0, 1)));
  CHECK_FALSE(m.is_dirichlet(m.node_id(1, 1)));

  int interior = 0;
  for (int i = 0; i < m.num_nodes(); ++i)
    if (!m.is_dirichlet(i)) ++interior;
  CHECK(interior == 9);  // (m-2)^2
}

TEST_CASE("lifting: boundary bump on the top edge only") {
  const TriMesh mesh = build_mesh(9);
  const FemSolution w = build_lifting(mesh);
  CHECK(w.coeffs[mesh.node_id(mesh.m - 1, 4)] ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-15));  // x1 = 0.5
  CHECK(w.coeffs[mesh.node_id(mesh.m - 1, 0)] == 0.0);    // bump vanishes
  for (int i = 0; i < mesh.m; ++i)                         // rows below top
    for (int j = 0; j < mesh.m; ++j)
      if (i < mesh.m - 1) CHECK(w.coeffs[mesh.node_id(i, j)] == 0.0);
}

TEST_CASE("assembly: identity map gives the standard P1 Laplacian") {
  const TriMesh mesh = build_mesh(9);
  DeformationSpec spec;
  spec.c = 0.0;
  FemContext ctx(mesh, spec, Problem{}, QoISpec{});
  FemSolver solver(ctx);
  solver.assemble(ParamPoint::zeros(spec.dim()));
  const Eigen::MatrixXd a = dense(solver.matrix());

  CHECK((a - a.transpose()).norm() == 0.0);
  // five-point stencil: diagonal 4, edge neighbors -1, cell-diagonal 0
  const auto u = [&](int i, int j) { return ctx.unknown_of_node[mesh.node_id(i, j)]; };
  CHECK(a(u(4, 4), u(4, 4)) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(a(u(4, 4), u(4, 5)) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(a(u(4, 4), u(3, 4)) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(a(u(4, 4), u(3, 3)) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(a(u(4, 4), u(5, 5)) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("assembly: y = 0 equals c = 0 bit-for-bit") {
  const TriMesh mesh = build_mesh(9);
  DeformationSpec spec;  // c = 1/15
  DeformationSpec flat = spec;
  flat.c = 0.0;
  FemContext ctx(mesh, spec, Problem{}, QoISpec{});
  FemContext ctx0(mesh, flat, Problem{}, QoISpec{});
  FemSolver solver(ctx), solver0(ctx0);
  solver.assemble(ParamPoint::zeros(spec.dim()));
  solver0.assemble(ParamPoint::zeros(spec.dim()));
  CHECK((dense(solver.matrix()) - dense(solver0.matrix())).norm() == 0.0);
  CHECK((solver.load() - solver0.load()).norm() == 0.0);
  CHECK(eval_qoi(ctx, solver.solve_primal()) ==
        eval_qoi(ctx0, solver0.solve_primal()));
}

TEST_CASE("assembly: symmetry and fold detection at a random knot") {
  const TriMesh mesh = build_mesh(9);
  DeformationSpec spec;
  FemContext ctx(mesh, spec, Problem{}, QoISpec{});
  FemSolver solver(ctx);
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> dist(-kSupportHalfWidth,
                                              kSupportHalfWidth);
  Eigen::VectorXd y(spec.dim());
  for (int n = 0; n < spec.dim(); ++n) y[n] = dist(gen);
  solver.assemble(ParamPoint(y));
  const Eigen::MatrixXd a = dense(solver.matrix());
  CHECK((a - a.transpose()).norm() < 1e-15 * a.norm());

  DeformationSpec wild = spec;
  wild.c = 40.0;
  FemContext wctx(mesh, wild, Problem{}, QoISpec{});
  // context construction itself assembles only the nominal y = 0 matrix
  FemSolver wsolver(wctx);
  ParamPoint yneg = ParamPoint::zeros(wild.dim());
  yneg.y[0] = -kSupportHalfWidth;
  CHECK_THROWS_AS(wsolver.assemble(yneg), NonInvertibleMap);
}

TEST_CASE("pcg: solves SPD systems and reports divergence") {
  std::mt19937 gen(29);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const int n = 40;
  Eigen::MatrixXd md(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) md(i, j) = dist(gen);
  md = (md * md.transpose()).eval();
  md.diagonal().array() += double(n);
  const Eigen::SparseMatrix<double> a = md.sparseView();
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = dist(gen);

  const JacobiPreconditioner prec(a);
  SolveStats stats;
  const Eigen::VectorXd x = pcg(a, b, prec, nullptr, {}, &stats);
  CHECK((md * x - b).norm() < 1e-8 * b.norm());
  CHECK(stats.iterations > 0);
  CHECK(stats.rel_residual <= 1e-10);

  PcgOptions strict;
  strict.max_iterations = 2;  // unreachable target
  CHECK_THROWS_AS(pcg(a, b, prec, nullptr, strict, nullptr), SolverDivergence);

  // zero load: exact zero solution without iterating
  const Eigen::VectorXd z = pcg(a, Eigen::VectorXd::Zero(n), prec);
  CHECK(z.norm() == 0.0);
}

TEST_CASE("qoi: quadrature against a 1-D oracle and linearity") {
  const TriMesh mesh = build_mesh(65);
  DeformationSpec spec;
  FemContext ctx(mesh, spec, Problem{}, QoISpec{});

  // constant field: QoI = integral of the weight
  FemSolution ones{FemSolution::Kind::Primal,
                   Eigen::VectorXd::Ones(mesh.num_nodes())};
  const double iq1 = simpson([](double t) { return bump(t); }, 0.0, 1.0);
  const double iq2 =
      simpson([](double t) { return bump(2.0 * t); }, 0.0, 0.5);
  CHECK(eval_qoi(ctx, ones) == doctest::Approx(iq1 * iq2).epsilon(1e-4));

  // linearity
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd u(mesh.num_nodes()), v(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    u[i] = dist(gen);
    v[i] = dist(gen);
  }
  const double qu = eval_qoi(ctx, {FemSolution::Kind::Primal, u});
  const double qv = eval_qoi(ctx, {FemSolution::Kind::Primal, v});
  const double qc =
      eval_qoi(ctx, {FemSolution::Kind::Primal, 2.5 * u - 0.75 * v});
  CHECK(qc == doctest::Approx(2.5 * qu - 0.75 * qv).epsilon(1e-12));

  // the weight is supported strictly below the midline; hats of nodes
  // strictly above it never meet the support
  Eigen::VectorXd upper = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.nodes[i][1] > 0.5) upper[i] = 1.0;
  CHECK(eval_qoi(ctx, {FemSolution::Kind::Primal, upper}) == 0.0);
}

TEST_CASE("discrete duality: QoI equals load paired with the adjoint") {
  const TriMesh mesh = build_mesh(17);
  DeformationSpec spec;
  FemContext ctx(mesh, spec, Problem{}, QoISpec{});
  FemSolver solver(ctx);
  std::mt19937 gen(37);
  std::uniform_real_distribution<double> dist(-kSupportHalfWidth,
                                              kSupportHalfWidth);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd y(spec.dim());
    for (int n = 0; n < spec.dim(); ++n) y[n] = dist(gen);
    solver.assemble(ParamPoint(y));
    const FemSolution primal = solver.solve_primal();
    const FemSolution adjoint = solver.solve_adjoint();
    const double q = eval_qoi(ctx, primal);
    double dual = 0.0;
    for (int u = 0; u < ctx.n_unknowns; ++u)
      dual += solver.load()[u] * adjoint.coeffs[ctx.node_of_unknown[u]];
    CHECK(q == doctest::Approx(dual).epsilon(1e-10));
  }
}

TEST_CASE("manufactured solution: quadratic QoI convergence") {
  // With the identity map (c = 0), subtracting the f = 0 solve from the
  // f != 0 solve leaves the finite element solution of -lap(u) = f with
  // homogeneous boundary data; u* = x1(1-x1) x2(1-x2) is its exact limit.
  Problem forced;
  forced.f = [](const Eigen::Vector2d& x) {
    return 2.0 * x[1] * (1.0 - x[1]) + 2.0 * x[0] * (1.0 - x[0]);
  };
  forced.grad_f = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(2.0 - 4.0 * x[0], 2.0 - 4.0 * x[1]);
  };
  DeformationSpec spec;
  spec.c = 0.0;

  const double qx =
      simpson([](double t) { return bump(t) * t * (1.0 - t); }, 0.0, 1.0);
  const double qy = simpson(
      [](double t) { return bump(2.0 * t) * t * (1.0 - t); }, 0.0, 0.5);
  const double exact = qx * qy;

  std::vector<double> errs;
  for (int m : {17, 33, 65, 129}) {
    const TriMesh mesh = build_mesh(m);
    FemContext fctx(mesh, spec, forced, QoISpec{});
    FemContext hctx(mesh, spec, Problem{}, QoISpec{});
    FemSolver fs(fctx), hs(hctx);
    fs.assemble(ParamPoint::zeros(spec.dim()));
    hs.assemble(ParamPoint::zeros(spec.dim()));
    const double q =
        eval_qoi(fctx, fs.solve_primal()) - eval_qoi(hctx, hs.solve_primal());
    errs.push_back(std::abs(q - exact));
  }
  // overall observed order across the sweep (the coarsest step is still
  // pre-asymptotic on its own)
  const double rate =
      std::log2(errs.front() / errs.back()) / double(errs.size() - 1);
  CHECK(rate == doctest::Approx(2.0).epsilon(0.075));  // 2.0 +/- 0.15
}
