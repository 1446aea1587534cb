#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uq/run_config.hpp"

namespace {

int env_threads(int fallback) {
  const char* env = std::getenv("UQ_THREADS");
  if (!env || !*env) return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) {
    std::cerr << "ignoring invalid UQ_THREADS value: " << env << '\n';
    return fallback;
  }
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-grid collocation with adjoint tail correction for an "
               "elliptic problem on a randomly deformed unit square"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the configured experiment sweep");
  run->add_option("config", config_path, "key=value config file")->required();

  std::string validate_path;
  auto* validate =
      app.add_subcommand("validate", "Check the map-invertibility assumptions");
  validate->add_option("config", validate_path, "key=value config file")
      ->required();

  std::string fd_kind;
  int fd_trials = 100;
  int fd_mesh_m = 33;
  uq::DeformationSpec fd_spec;
  auto* fd = app.add_subcommand(
      "fd-check", "Finite-difference validation of the derivative kernels");
  fd->add_option("kind", fd_kind, "one of: dG, ddet, dQ")
      ->required()
      ->check(CLI::IsMember({"dG", "ddet", "dQ"}));
  fd->add_option("--trials", fd_trials, "number of random trials");
  fd->add_option("--mesh-m", fd_mesh_m, "mesh points per side (dQ kind)");
  fd->add_option("--c", fd_spec.c, "deformation amplitude");
  fd->add_option("--k", fd_spec.k, "mode decay exponent");
  fd->add_option("--Ns", fd_spec.Ns, "collocated dimensions");
  fd->add_option("--Nf", fd_spec.Nf, "tail dimensions");

  int gi_dim = 2, gi_level = 2;
  std::string gi_rule = "smolyak";
  std::string gi_export;
  auto* gi = app.add_subcommand("grid-info", "Describe a sparse grid");
  gi->add_option("--dim", gi_dim, "dimension")->required();
  gi->add_option("--level", gi_level, "level w")->required();
  gi->add_option("--rule", gi_rule, "smolyak | total-degree | hyperbolic")
      ->check(CLI::IsMember({"smolyak", "total-degree", "hyperbolic"}));
  gi->add_option("--export", gi_export, "write knot table CSV to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      uq::ExperimentConfig cfg = uq::load_config(config_path);
      cfg.threads = env_threads(cfg.threads);
      return uq::run_experiment(cfg, std::cerr);
    }
    if (*validate) {
      const uq::ExperimentConfig cfg = uq::load_config(validate_path);
      return uq::validate_experiment(cfg, std::cout);
    }
    if (*fd) {
      fd_spec.validate();
      uq::FdOptions opts;
      opts.trials = fd_trials;
      opts.mesh_m = fd_mesh_m;
      const uq::FdKind kind = fd_kind == "dG"     ? uq::FdKind::dG
                              : fd_kind == "ddet" ? uq::FdKind::dDet
                                                  : uq::FdKind::dQ;
      if (kind == uq::FdKind::dQ && fd_trials > 20) opts.trials = 10;
      const uq::FdReport rep = uq::fd_check(kind, fd_spec, opts);
      std::printf("kind=%s trials=%d max_rel_error=%.3e observed_order=%.2f\n",
                  fd_kind.c_str(), rep.trials, rep.max_rel_error,
                  rep.observed_order);
      return 0;
    }
    // grid-info
    const uq::IndexRule rule = gi_rule == "smolyak" ? uq::IndexRule::Smolyak
                               : gi_rule == "total-degree"
                                   ? uq::IndexRule::TotalDegree
                                   : uq::IndexRule::HyperbolicCross;
    const uq::SparseGrid grid =
        uq::build_grid(gi_dim, gi_level, rule, -uq::kSupportHalfWidth,
                       uq::kSupportHalfWidth);
    std::printf("dim=%d level=%d rule=%s knots=%d tensor_terms=%zu\n", gi_dim,
                gi_level, gi_rule.c_str(), grid.num_knots(),
                grid.components.size());
    if (!gi_export.empty()) {
      grid.export_knots_csv(gi_export);
      std::printf("knot table written to %s\n", gi_export.c_str());
    }
    return 0;
  } catch (const uq::ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return 3;
  }
}
