#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "uq/fem.hpp"
#include "uq/perturbation.hpp"

namespace uq {

/// Counter-based uniform stream: the value for (sample, dimension) depends
/// only on the seed and the counters, so any execution order reproduces the
/// same draws.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}
  /// Uniform draw on [-sqrt(3), sqrt(3)] for the given sample and dimension.
  double uniform_support(std::uint64_t sample, std::uint64_t dim) const;
  /// Uniform draw on [0, 1).
  double uniform01(std::uint64_t sample, std::uint64_t dim) const;

 private:
  std::uint64_t seed_;
};

struct McConfig {
  long samples = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string precond = "chol";
};

struct McResult {
  double mean = 0.0;
  double variance = 0.0;
  double stderr_mean = 0.0;
  double stderr_var = 0.0;
  long samples = 0;
};

/// Full-dimensional Monte Carlo of the remapped primal QoI.
McResult monte_carlo(const TriMesh& mesh, const DeformationSpec& spec,
                     const Problem& problem, const QoISpec& qoi,
                     const McConfig& cfg);

struct ReferenceStatistics {
  double mean = 0.0;
  double variance = 0.0;
  long knots = 0;
  bool from_cache = false;
};

/// Full-dimensional isotropic collocation reference, cached to disk keyed by
/// (spec, mesh size, w_ref).  Pass an empty cache_dir to disable caching.
ReferenceStatistics reference_statistics(const TriMesh& mesh,
                                         const DeformationSpec& spec,
                                         const Problem& problem,
                                         const QoISpec& qoi, int w_ref,
                                         const std::string& cache_dir = "",
                                         const EstimatorOptions& opts = {});

enum class FdKind { dG, dDet, dQ };

struct FdReport {
  double max_rel_error = 0.0;  // at the smallest step
  double observed_order = 0.0; // Richardson estimate from the step sequence
  int trials = 0;
};

struct FdOptions {
  int trials = 100;
  /// Decreasing step sequence; the convergence order is estimated from the
  /// first two (largest) steps, where truncation dominates roundoff, and the
  /// reported max error is taken at the last (smallest) step.
  std::vector<double> steps = {1e-1, 3e-2, 1e-3};
  std::uint64_t seed = 7;
  int mesh_m = 33;  // used by the dQ kind
};

/// Central-difference validation of the analytic derivative kernels along
/// random tail directions.
FdReport fd_check(FdKind kind, const DeformationSpec& spec,
                  const FdOptions& opts = {});

}  // namespace uq
