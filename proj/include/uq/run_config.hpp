#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "uq/oracle.hpp"

namespace uq {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value experiment description (text file, `#` comments).
struct ExperimentConfig {
  // model
  double c = 1.0 / 15.0;
  double k = 3.0;
  double L = 0.5;
  double Lp = 1.0;
  int N = 15;
  std::vector<int> Ns_list = {4};

  // discretization
  int m = 129;
  std::vector<int> levels = {0, 1, 2, 3};
  int w_corr = -1;  // -1: same as w

  // methods: any of collocation, hybrid, mc
  std::vector<std::string> methods = {"collocation", "hybrid"};

  // reference for the err_* columns: none | compute | mc | file
  std::string reference = "none";
  int w_ref = 5;
  std::string reference_cache;
  std::string reference_file;
  double reference_mean = 0.0, reference_variance = 0.0;

  // Monte Carlo settings (for method mc and reference mc)
  long mc_samples = 1000;
  std::uint64_t mc_seed = 0;

  // execution
  int threads = 1;
  std::string precond = "chol";
  bool normalize = true;
  bool timings = false;  // true records wall_ms; false keeps the CSV
                         // byte-reproducible across runs and thread counts
  std::string output_dir = ".";

  DeformationSpec deformation(int Ns) const;
  /// Throws ConfigError on any invariant violation.
  void validate() const;
};

/// Parses the key=value file; throws ConfigError on unreadable files,
/// malformed lines or unknown keys.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in);

/// Runs the configured sweep, writing results.csv and summary.txt into the
/// output directory.  Returns 0 on success, 2 on configuration errors, 3 on
/// numerical failure (rows completed so far are flushed first).
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// Prints assumption diagnostics (F_min / F_max / mode_sum over a sample
/// lattice) and warns when the map can fold; never fails the run.
int validate_experiment(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace uq
