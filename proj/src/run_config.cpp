#include "uq/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace uq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::stringstream ss(value);
  T out;
  if (!(ss >> out) || !(ss >> std::ws).eof())
    throw ConfigError("bad value for '" + key + "': " + value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad boolean for '" + key + "': " + value);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

DeformationSpec ExperimentConfig::deformation(int Ns) const {
  DeformationSpec spec;
  spec.c = c;
  spec.k = k;
  spec.L = L;
  spec.Lp = Lp;
  spec.Ns = Ns;
  spec.Nf = N - Ns;
  return spec;
}

void ExperimentConfig::validate() const {
  if (N < 1) throw ConfigError("N must be at least 1");
  if (Ns_list.empty()) throw ConfigError("Ns list is empty");
  for (int Ns : Ns_list)
    if (Ns < 1 || Ns > N)
      throw ConfigError("Ns=" + std::to_string(Ns) +
                        " outside [1, N=" + std::to_string(N) + "]");
  if (m < 3) throw ConfigError("m must be at least 3");
  if (levels.empty()) throw ConfigError("levels list is empty");
  for (int w : levels)
    if (w < 0) throw ConfigError("levels must be non-negative");
  if (w_corr < -1) throw ConfigError("w_corr must be -1 or non-negative");
  if (methods.empty()) throw ConfigError("methods list is empty");
  for (const auto& meth : methods)
    if (meth != "collocation" && meth != "hybrid" && meth != "mc")
      throw ConfigError("unknown method '" + meth + "'");
  if (reference != "none" && reference != "compute" && reference != "mc" &&
      reference != "file")
    throw ConfigError("unknown reference source '" + reference + "'");
  if (reference == "compute" && w_ref < 0)
    throw ConfigError("w_ref must be non-negative");
  if (reference == "file" && reference_file.empty())
    throw ConfigError("reference=file needs reference_file");
  if (mc_samples < 2) throw ConfigError("mc_samples must be at least 2");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (precond != "jacobi" && precond != "ic" && precond != "chol")
    throw ConfigError("precond must be jacobi, ic or chol");
  if (c < 0.0) throw ConfigError("c must be non-negative");
  if (L <= 0.0 || Lp <= 0.0) throw ConfigError("L and Lp must be positive");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "c") cfg.c = parse_number<double>(key, value);
    else if (key == "k") cfg.k = parse_number<double>(key, value);
    else if (key == "L") cfg.L = parse_number<double>(key, value);
    else if (key == "Lp") cfg.Lp = parse_number<double>(key, value);
    else if (key == "N") cfg.N = parse_number<int>(key, value);
    else if (key == "Ns") {
      cfg.Ns_list.clear();
      for (const auto& tok : split_list(value))
        cfg.Ns_list.push_back(parse_number<int>(key, tok));
    } else if (key == "m") cfg.m = parse_number<int>(key, value);
    else if (key == "levels") {
      cfg.levels.clear();
      for (const auto& tok : split_list(value))
        cfg.levels.push_back(parse_number<int>(key, tok));
    } else if (key == "w_corr") cfg.w_corr = parse_number<int>(key, value);
    else if (key == "methods") cfg.methods = split_list(value);
    else if (key == "reference") cfg.reference = value;
    else if (key == "w_ref") cfg.w_ref = parse_number<int>(key, value);
    else if (key == "reference_cache") cfg.reference_cache = value;
    else if (key == "reference_file") cfg.reference_file = value;
    else if (key == "reference_mean")
      cfg.reference_mean = parse_number<double>(key, value);
    else if (key == "reference_variance")
      cfg.reference_variance = parse_number<double>(key, value);
    else if (key == "mc_samples") cfg.mc_samples = parse_number<long>(key, value);
    else if (key == "mc_seed")
      cfg.mc_seed = parse_number<unsigned long long>(key, value);
    else if (key == "threads") cfg.threads = parse_number<int>(key, value);
    else if (key == "precond") cfg.precond = value;
    else if (key == "normalize") cfg.normalize = parse_bool(key, value);
    else if (key == "timings") cfg.timings = parse_bool(key, value);
    else if (key == "output_dir") cfg.output_dir = value;
    else throw ConfigError("unknown key '" + key + "'");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  return parse_config(in);
}

namespace {

struct Reference {
  bool present = false;
  double mean = 0.0, variance = 0.0;  // raw (unnormalized) units
  std::string describe;
};

Reference resolve_reference(const ExperimentConfig& cfg, const TriMesh& mesh,
                            const Problem& problem, const QoISpec& qoi) {
  Reference ref;
  if (cfg.reference == "none") return ref;
  ref.present = true;
  if (cfg.reference == "file") {
    std::ifstream in(cfg.reference_file);
    if (!(in >> ref.mean >> ref.variance))
      throw ConfigError("cannot parse reference_file: " + cfg.reference_file);
    ref.describe = "file " + cfg.reference_file;
  } else if (cfg.reference == "mc") {
    McConfig mc;
    mc.samples = cfg.mc_samples;
    mc.seed = cfg.mc_seed;
    mc.threads = cfg.threads;
    mc.precond = cfg.precond;
    const McResult res =
        monte_carlo(mesh, cfg.deformation(cfg.N), problem, qoi, mc);
    ref.mean = res.mean;
    ref.variance = res.variance;
    ref.describe = "monte-carlo, " + std::to_string(res.samples) + " samples";
  } else {  // compute
    EstimatorOptions opts;
    opts.threads = cfg.threads;
    opts.precond = cfg.precond;
    const ReferenceStatistics res =
        reference_statistics(mesh, cfg.deformation(cfg.N), problem, qoi,
                             cfg.w_ref, cfg.reference_cache, opts);
    ref.mean = res.mean;
    ref.variance = res.variance;
    ref.describe = "collocation w_ref=" + std::to_string(cfg.w_ref) + ", " +
                   std::to_string(res.knots) + " knots" +
                   (res.from_cache ? " (cached)" : "");
  }
  return ref;
}

void write_row(std::ofstream& csv, const std::string& method, int Ns, int Nf,
               int w, long knots, long solves, double mean, double variance,
               double cmean, double cvar, const Reference& ref, double scale,
               double wall_ms) {
  csv << method << ',' << Ns << ',' << Nf << ',' << w << ',' << knots << ','
      << solves << ',' << fmt(mean * scale) << ','
      << fmt(variance * scale * scale) << ',' << fmt(cmean * scale) << ','
      << fmt(cvar * scale * scale);
  if (ref.present)
    csv << ',' << fmt(std::abs(mean - ref.mean) * scale) << ','
        << fmt(std::abs(variance - ref.variance) * scale * scale);
  else
    csv << ",,";
  csv << ',' << fmt(wall_ms) << '\n';
  csv.flush();
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    log << "config error: " << err.what() << '\n';
    return 2;
  }

  const TriMesh mesh = build_mesh(cfg.m);
  const Problem problem{};  // a = 1, f = 0
  const QoISpec qoi{};

  std::filesystem::create_directories(cfg.output_dir);
  const auto csv_path = std::filesystem::path(cfg.output_dir) / "results.csv";
  const auto sum_path = std::filesystem::path(cfg.output_dir) / "summary.txt";

  // normalization constant: the deterministic nominal QoI Q(u at y = 0)
  double q0;
  Reference ref;
  try {
    FemContext ctx(mesh, cfg.deformation(cfg.Ns_list.front()), problem, qoi);
    FemSolver solver(ctx);
    solver.assemble(ParamPoint::zeros(ctx.spec.dim()));
    q0 = eval_qoi(ctx, solver.solve_primal());
    ref = resolve_reference(cfg, mesh, problem, qoi);
  } catch (const ConfigError& err) {
    log << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    log << "numerical failure: " << err.what() << '\n';
    return 3;
  }
  const double scale = cfg.normalize ? 1.0 / q0 : 1.0;

  std::ofstream csv(csv_path, std::ios::binary);  // binary keeps LF endings
  if (!csv) {
    log << "config error: cannot write " << csv_path.string() << '\n';
    return 2;
  }
  csv << "method,N_s,N_f,w,knots,pde_solves,mean,variance,corr_mean,"
         "corr_var,err_mean,err_var,wall_ms\n";
  csv.flush();

  int exit_code = 0;
  std::string failure;
  long total_solves = 0;
  for (const auto& meth : cfg.methods) {
    for (int Ns : cfg.Ns_list) {
      const DeformationSpec spec = cfg.deformation(Ns);
      try {
        if (meth == "mc") {
          McConfig mc;
          mc.samples = cfg.mc_samples;
          mc.seed = cfg.mc_seed;
          mc.threads = cfg.threads;
          mc.precond = cfg.precond;
          const McResult res =
              monte_carlo(mesh, cfg.deformation(cfg.N), problem, qoi, mc);
          write_row(csv, "monte-carlo", cfg.N, 0, 0, res.samples,
                    res.samples + 1, res.mean, res.variance, 0.0, 0.0, ref,
                    scale, 0.0);
          total_solves += res.samples + 1;
          continue;
        }
        for (int w : cfg.levels) {
          EstimatorOptions opts;
          opts.w_corr = std::min(cfg.w_corr, w);
          opts.threads = cfg.threads;
          opts.precond = cfg.precond;
          const EstimatorReport rep =
              (meth == "hybrid")
                  ? run_hybrid(mesh, spec, problem, qoi, w, opts)
                  : run_collocation(mesh, spec, problem, qoi, w, Ns, opts);
          write_row(csv, rep.method, rep.Ns, rep.Nf, rep.w, rep.knots,
                    rep.pde_solves, rep.mean, rep.variance,
                    rep.correction_mean, rep.correction_var, ref, scale,
                    cfg.timings ? rep.wall_ms : 0.0);
          total_solves += rep.pde_solves;
        }
      } catch (const std::exception& err) {
        failure = err.what();
        exit_code = 3;
        break;
      }
    }
    if (exit_code != 0) break;
  }

  std::ofstream sum(sum_path, std::ios::binary);
  sum << "mesh m = " << cfg.m << " (" << mesh.nodes.size() << " nodes)\n";
  sum << "model: c=" << fmt(cfg.c) << " k=" << fmt(cfg.k)
      << " L=" << fmt(cfg.L) << " Lp=" << fmt(cfg.Lp) << " N=" << cfg.N
      << '\n';
  sum << "normalization constant Q0 = " << fmt(q0)
      << (cfg.normalize ? " (applied)\n" : " (not applied)\n");
  if (ref.present)
    sum << "reference: " << ref.describe << "; mean=" << fmt(ref.mean * scale)
        << " variance=" << fmt(ref.variance * scale * scale) << '\n';
  sum << "total PDE solves: " << total_solves << '\n';
  if (exit_code != 0) sum << "FAILED: " << failure << '\n';
  sum.flush();

  if (exit_code != 0) log << "numerical failure: " << failure << '\n';
  return exit_code;
}

int validate_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    log << "config error: " << err.what() << '\n';
    return 2;
  }
  const DeformationSpec spec = cfg.deformation(cfg.Ns_list.front());

  std::vector<ParamPoint> ys;
  ys.push_back(ParamPoint::zeros(spec.dim()));
  ys.push_back(ParamPoint(Eigen::VectorXd::Constant(spec.dim(),
                                                    kSupportHalfWidth)));
  ys.push_back(ParamPoint(Eigen::VectorXd::Constant(spec.dim(),
                                                    -kSupportHalfWidth)));
  {
    Eigen::VectorXd alt(spec.dim());
    for (int n = 0; n < spec.dim(); ++n)
      alt[n] = (n % 2 == 0 ? 1.0 : -1.0) * kSupportHalfWidth;
    ys.push_back(ParamPoint(alt));
  }
  const CounterRng rng(1);
  for (int s = 0; s < 8; ++s) {
    Eigen::VectorXd y(spec.dim());
    for (int n = 0; n < spec.dim(); ++n) y[n] = rng.uniform_support(s, n);
    ys.push_back(ParamPoint(y));
  }

  std::vector<std::pair<Eigen::Vector2d, ParamPoint>> samples;
  const int nl = 33;
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < nl; ++j) {
      const Eigen::Vector2d x(double(i) / (nl - 1), double(j) / (nl - 1));
      for (const auto& y : ys) samples.emplace_back(x, y);
    }

  const AssumptionReport rep = validate_assumptions(spec, samples);
  log << "singular values of dF over the sample lattice: F_min = "
      << fmt(rep.F_min) << ", F_max = " << fmt(rep.F_max) << '\n';
  log << "mode decay sum sup_x sum_l ||B_l(x)||_2 sqrt(mu_l) = "
      << fmt(rep.mode_sum) << '\n';
  if (rep.violated)
    log << "WARNING: assumptions violated; the map can fold or lose "
           "uniform invertibility for admissible parameters\n";
  else
    log << "assumptions hold on the sampled set\n";
  return 0;
}

}  // namespace uq
