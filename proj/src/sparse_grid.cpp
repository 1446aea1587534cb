#include "uq/sparse_grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace uq {

namespace {
constexpr double kPi = 3.14159265358979323846;

struct Frac {
  int num, den;  // reduced j/(m-1) in [0,1]
};

Frac reduce(int j, int d) {
  if (d == 0) return {0, 1};  // single midpoint level
  const int g = std::gcd(j, d);
  return {j / g, d / g};
}

double frac_node(const Frac& f) {
  if (f.den == 1) return f.num == 0 ? -1.0 : 1.0;
  if (f.den == 2) return 0.0;
  return -std::cos(kPi * f.num / f.den);
}

std::vector<Frac> cc_fracs(int level) {
  const int m = m_rule(level);
  std::vector<Frac> out;
  out.reserve(m);
  if (m == 1) {
    out.push_back({1, 2});  // midpoint
    return out;
  }
  for (int j = 0; j < m; ++j) out.push_back(reduce(j, m - 1));
  return out;
}

int frac_key(const Frac& f) { return f.num * 65536 + f.den; }

long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

long long g_value(const std::vector<int>& idx, IndexRule rule) {
  if (rule == IndexRule::HyperbolicCross) {
    long long p = 1;
    for (int v : idx) p *= v;
    return p - 1;
  }
  long long s = 0;
  for (int v : idx) s += v - 1;
  return s;
}

/// c(i) = sum over binary j with g(i+j) <= w of (-1)^{|j|}.
long long combination_coeff(const std::vector<int>& idx, int w,
                            IndexRule rule) {
  const int dim = static_cast<int>(idx.size());
  if (rule != IndexRule::HyperbolicCross) {
    // g is linear in the levels: g(i+j) = g(i) + |j|
    const long long g = g_value(idx, rule);
    long long c = 0;
    for (int k = 0; k <= w - g; ++k)
      c += (k % 2 == 0 ? 1 : -1) * binomial(dim, k);
    return c;
  }
  if (dim > 25) throw std::length_error("combination coefficient: dim too large for HC rule");
  std::vector<int> shifted(idx);
  long long c = 0;
  for (std::uint32_t mask = 0; mask < (1u << dim); ++mask) {
    for (int n = 0; n < dim; ++n) shifted[n] = idx[n] + ((mask >> n) & 1u);
    if (g_value(shifted, rule) <= w)
      c += (std::popcount(mask) % 2 == 0) ? 1 : -1;
  }
  return c;
}

template <typename Fn>
void enumerate_indices(int dim, int w, IndexRule rule, std::vector<int>& idx,
                       int pos, Fn&& fn) {
  if (pos == dim) {
    fn(idx);
    return;
  }
  for (int lev = 1;; ++lev) {
    idx[pos] = lev;
    bool admissible = true;
    for (int n = pos + 1; n < dim; ++n) idx[n] = 1;
    if (g_value(idx, rule) > w) admissible = false;
    if (!admissible) break;
    enumerate_indices(dim, w, rule, idx, pos + 1, fn);
  }
  idx[pos] = 1;
}

std::vector<double> barycentric_weights(const std::vector<double>& x) {
  const int m = static_cast<int>(x.size());
  std::vector<double> bw(m, 1.0);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      if (k != j) bw[j] /= (x[j] - x[k]);
  return bw;
}

/// Lagrange basis values at point t (barycentric form, exact at nodes).
std::vector<double> lagrange_basis(const std::vector<double>& x, double t) {
  const int m = static_cast<int>(x.size());
  std::vector<double> out(m, 0.0);
  if (m == 1) {
    out[0] = 1.0;
    return out;
  }
  for (int j = 0; j < m; ++j) {
    if (t == x[j]) {
      out[j] = 1.0;
      return out;
    }
  }
  const std::vector<double> bw = barycentric_weights(x);
  double denom = 0.0;
  for (int j = 0; j < m; ++j) {
    out[j] = bw[j] / (t - x[j]);
    denom += out[j];
  }
  for (int j = 0; j < m; ++j) out[j] /= denom;
  return out;
}

}  // namespace

int m_rule(int level) {
  if (level < 1) throw std::invalid_argument("m_rule: level must be >= 1");
  if (level == 1) return 1;
  return (1 << (level - 1)) + 1;
}

int m_inverse(int points) {
  if (points < 1) throw std::invalid_argument("m_inverse: points must be >= 1");
  int level = 1;
  while (m_rule(level) < points) ++level;
  return level;
}

std::vector<double> cc_nodes(int level) {
  const std::vector<Frac> fr = cc_fracs(level);
  std::vector<double> out(fr.size());
  for (std::size_t j = 0; j < fr.size(); ++j) out[j] = frac_node(fr[j]);
  return out;
}

std::vector<double> cc_weights(int level) {
  const int m = m_rule(level);
  if (m == 1) return {1.0};
  const std::vector<double> x = cc_nodes(level);
  // Solve sum_j w_j T_k(x_j) = (1/2) int T_k over the Chebyshev basis;
  // exact closed-form moments, well conditioned by discrete orthogonality.
  Eigen::MatrixXd T(m, m);
  Eigen::VectorXd rhs(m);
  for (int j = 0; j < m; ++j) {
    T(0, j) = 1.0;
    T(1, j) = x[j];
    for (int k = 2; k < m; ++k) T(k, j) = 2.0 * x[j] * T(k - 1, j) - T(k - 2, j);
  }
  for (int k = 0; k < m; ++k)
    rhs[k] = (k % 2 == 0) ? 1.0 / (1.0 - double(k) * k) : 0.0;
  const Eigen::VectorXd w = T.fullPivLu().solve(rhs);
  return {w.data(), w.data() + m};
}

int MultiIndex::sum_minus_one() const {
  int s = 0;
  for (int v : i) s += v - 1;
  return s;
}

SparseGrid build_grid(int dim, int w, IndexRule rule, double lo, double hi,
                      std::size_t knot_cap) {
  if (dim < 1) throw std::invalid_argument("build_grid: dim must be >= 1");
  if (w < 0) throw std::invalid_argument("build_grid: w must be >= 0");
  SparseGrid grid;
  grid.dim = dim;
  grid.level = w;
  grid.rule = rule;
  grid.lo = lo;
  grid.hi = hi;

  std::vector<std::vector<int>> surviving;
  std::vector<double> coeffs;
  {
    std::vector<int> idx(dim, 1);
    enumerate_indices(dim, w, rule, idx, 0, [&](const std::vector<int>& i) {
      const long long c = combination_coeff(i, w, rule);
      if (c != 0) {
        surviving.push_back(i);
        coeffs.push_back(static_cast<double>(c));
      }
    });
  }

  // pass 1: canonical knot numbering via the ordered fraction-key map
  std::map<std::vector<int>, int> knot_of_key;
  for (const auto& idx : surviving) {
    std::vector<std::vector<Frac>> fr(dim);
    std::size_t tensor = 1;
    for (int n = 0; n < dim; ++n) {
      fr[n] = cc_fracs(idx[n]);
      tensor *= fr[n].size();
    }
    std::vector<int> key(dim), pos(dim, 0);
    for (std::size_t t = 0; t < tensor; ++t) {
      for (int n = 0; n < dim; ++n) key[n] = frac_key(fr[n][pos[n]]);
      knot_of_key.emplace(key, 0);
      if (knot_of_key.size() > knot_cap)
        throw std::length_error("build_grid: knot cap exceeded");
      for (int n = dim - 1; n >= 0; --n) {
        if (++pos[n] < static_cast<int>(fr[n].size())) break;
        pos[n] = 0;
      }
    }
  }
  int next_id = 0;
  for (auto& [key, id] : knot_of_key) id = next_id++;

  grid.knots.resize(dim, next_id);
  for (const auto& [key, id] : knot_of_key)
    for (int n = 0; n < dim; ++n) {
      const Frac f{key[n] / 65536, key[n] % 65536};
      grid.knots(n, id) = frac_node(f);
    }
  grid.weights = Eigen::VectorXd::Zero(next_id);

  // pass 2: components, knot ids and accumulated quadrature weights
  grid.components.resize(surviving.size());
  for (std::size_t ci = 0; ci < surviving.size(); ++ci) {
    const auto& idx = surviving[ci];
    SparseGrid::Component& comp = grid.components[ci];
    comp.levels = idx;
    comp.coeff = coeffs[ci];
    std::vector<std::vector<Frac>> fr(dim);
    std::vector<std::vector<double>> w1(dim);
    std::size_t tensor = 1;
    for (int n = 0; n < dim; ++n) {
      fr[n] = cc_fracs(idx[n]);
      w1[n] = cc_weights(idx[n]);
      tensor *= fr[n].size();
    }
    comp.knot_ids.resize(tensor);
    std::vector<int> key(dim), pos(dim, 0);
    for (std::size_t t = 0; t < tensor; ++t) {
      double wq = comp.coeff;
      for (int n = 0; n < dim; ++n) {
        key[n] = frac_key(fr[n][pos[n]]);
        wq *= w1[n][pos[n]];
      }
      const int id = knot_of_key.at(key);
      comp.knot_ids[t] = id;
      grid.weights[id] += wq;
      for (int n = dim - 1; n >= 0; --n) {
        if (++pos[n] < static_cast<int>(fr[n].size())) break;
        pos[n] = 0;
      }
    }
  }
  return grid;
}

Eigen::VectorXd SparseGrid::knot_physical(int id) const {
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  return (knots.col(id).array() * half + mid).matrix();
}

double SparseGrid::integrate(std::span<const double> samples) const {
  if (static_cast<int>(samples.size()) != num_knots())
    throw std::invalid_argument("integrate: sample count mismatch");
  return weights.dot(Eigen::Map<const Eigen::VectorXd>(
      samples.data(), static_cast<Eigen::Index>(samples.size())));
}

double SparseGrid::interpolate(std::span<const double> samples,
                               const Eigen::VectorXd& y_phys) const {
  if (static_cast<int>(samples.size()) != num_knots())
    throw std::invalid_argument("interpolate: sample count mismatch");
  if (y_phys.size() != dim)
    throw std::invalid_argument("interpolate: dimension mismatch");
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  Eigen::VectorXd yc = (y_phys.array() - mid) / half;

  double total = 0.0;
  for (const Component& comp : components) {
    std::vector<std::vector<double>> basis(dim);
    std::size_t tensor = 1;
    for (int n = 0; n < dim; ++n) {
      basis[n] = lagrange_basis(cc_nodes(comp.levels[n]), yc[n]);
      tensor *= basis[n].size();
    }
    std::vector<int> pos(dim, 0);
    double acc = 0.0;
    for (std::size_t t = 0; t < tensor; ++t) {
      double b = 1.0;
      for (int n = 0; n < dim; ++n) b *= basis[n][pos[n]];
      acc += b * samples[comp.knot_ids[t]];
      for (int n = dim - 1; n >= 0; --n) {
        if (++pos[n] < static_cast<int>(basis[n].size())) break;
        pos[n] = 0;
      }
    }
    total += comp.coeff * acc;
  }
  return total;
}

void SparseGrid::export_knots_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "knot_id";
  for (int n = 1; n <= dim; ++n) out << ",y_" << n;
  out << ",weight\n";
  char buf[32];
  for (int id = 0; id < num_knots(); ++id) {
    out << id;
    const Eigen::VectorXd y = knot_physical(id);
    for (int n = 0; n < dim; ++n) {
      std::snprintf(buf, sizeof(buf), "%.17g", y[n]);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", weights[id]);
    out << ',' << buf << '\n';
  }
}

std::vector<std::vector<int>> polynomial_exactness_set(int dim, int w,
                                                       IndexRule rule) {
  const int pmax = m_rule(w + 1) - 1;
  std::vector<std::vector<int>> out;
  std::vector<int> p(dim, 0), lev(dim, 1);
  const auto admissible = [&](const std::vector<int>& q) {
    for (int n = 0; n < dim; ++n) lev[n] = m_inverse(q[n] + 1);
    return g_value(lev, rule) <= w;
  };
  // odometer over [0, pmax]^dim with the admissibility filter
  while (true) {
    if (admissible(p)) out.push_back(p);
    int n = dim - 1;
    while (n >= 0 && ++p[n] > pmax) p[n--] = 0;
    if (n < 0) break;
  }
  return out;
}

}  // namespace uq
