#include "rmu/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "rmu/certificate.hpp"
#include "rmu/experiments.hpp"
#include "rmu/instance.hpp"
#include "rmu/rng.hpp"
#include "rmu/serialization.hpp"
#include "rmu/solver.hpp"

namespace rmu {

namespace {

constexpr int kInternal = 70;

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) throw std::invalid_argument("'" + s + "' is not a number");
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

struct OperatorArgs {
  std::string kind = "rip";
  double delta = 0.2;
  Eigen::Index measurements = 0;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* measurements_opt = nullptr;

  void add_to(CLI::App* app) {
    app->add_option("--operator", kind, "Sensing operator: rip (calibrated, delta known) or gaussian")
        ->check(CLI::IsMember({"rip", "gaussian"}));
    delta_opt = app->add_option("--delta", delta, "RIP constant of the calibrated operator, in (0, 1)");
    measurements_opt = app->add_option("--measurements", measurements, "Rows of a gaussian operator (0: square)")
                           ->check(CLI::NonNegativeNumber);
  }

  OperatorSpec resolve() const {
    OperatorSpec spec;
    if (kind == "gaussian") {
      if (delta_opt->count() > 0) {
        throw std::invalid_argument("--delta claims an exact RIP constant, which a gaussian operator does not have");
      }
      spec.kind = OperatorSpec::Kind::Gaussian;
      spec.rows = measurements;
    } else {
      if (measurements_opt->count() > 0) throw std::invalid_argument("--measurements only applies to --operator gaussian");
      if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("--delta must lie in (0, 1)");
      spec.delta = delta;
    }
    return spec;
  }
};

Json operator_spec_json(const OperatorSpec& s) {
  if (s.kind == OperatorSpec::Kind::Rip) return {{"kind", "rip"}, {"delta", s.delta}};
  return {{"kind", "gaussian"}, {"measurements", s.rows}};
}

void add_solver_options(CLI::App* app, SolverConfig& cfg) {
  app->add_option("--tau0", cfg.tau0, "Initial trust-region weight (>= 1)");
  app->add_option("--max-iters", cfg.max_iters, "Iteration cap");
  app->add_option("--max-backtracks", cfg.max_backtracks, "Rejected steps tolerated per iteration");
  app->add_option("--tol-obj", cfg.tol_obj, "Relative objective-decrease tolerance");
  app->add_option("--tol-step", cfg.tol_step, "Scaled step-length tolerance");
}

std::vector<RegKind> parse_regs(const std::vector<std::string>& names) {
  std::vector<RegKind> out;
  for (const auto& n : names) out.push_back(reg_kind_from_string(n));
  return out;
}

OutputFormat resolve_format(const std::string& format, const std::string& path) {
  if (format == "csv") return OutputFormat::Csv;
  if (format == "json") return OutputFormat::Json;
  return output_format_from_path(path);
}

void write_json(const std::string& path, const Json& doc, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    write_text_file(path, doc.dump(2) + "\n");
  }
}

std::string write_instance(const Instance& inst, const Json& config) {
  Json doc = instance_to_json(inst);
  doc["config"] = config;
  return doc.dump() + "\n";
}

}  // namespace

std::vector<double> parse_axis(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string tok = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (tok.empty()) throw std::invalid_argument("empty entry in list '" + std::string(text) + "'");
    const std::size_t dots = tok.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_number(tok));
    } else {
      const std::string rest = tok.substr(dots + 2);
      const std::size_t colon = rest.find(':');
      const double lo = parse_number(trim(tok.substr(0, dots)));
      const double hi = parse_number(trim(rest.substr(0, colon)));
      const double step = colon == std::string::npos ? 1.0 : parse_number(trim(rest.substr(colon + 1)));
      if (!(step > 0.0)) throw std::invalid_argument("range step must be positive in '" + tok + "'");
      if (hi < lo) throw std::invalid_argument("range '" + tok + "' is decreasing");
      const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
      if (count > 1000000) throw std::invalid_argument("range '" + tok + "' is too long");
      for (long k = 0; k <= count; ++k) out.push_back(lo + step * static_cast<double>(k));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse and low-rank recovery with the r_mu regularizer: instance generation, solving, "
               "optimality certificates and experiment grids.",
               "rmu"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "Print progress to stderr");

  std::function<int()> action;

  // gen ----------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate an instance file");
  gen->require_subcommand(1);

  struct {
    Eigen::Index n = 200;
    int card = 10;
    double sigma = 0.0;
    std::uint64_t seed = 1;
    OperatorArgs op;
    std::string output;
  } gs;
  auto* gen_sparse = gen->add_subcommand("sparse", "Sparse vector recovery instance");
  gen_sparse->add_option("--n", gs.n, "Dimension")->check(CLI::PositiveNumber);
  gen_sparse->add_option("--card", gs.card, "Non-zeros of the ground truth")->check(CLI::NonNegativeNumber);
  gen_sparse->add_option("--sigma", gs.sigma, "Measurement noise standard deviation")->check(CLI::NonNegativeNumber);
  gen_sparse->add_option("--seed", gs.seed, "Random seed");
  gs.op.add_to(gen_sparse);
  gen_sparse->add_option("-o,--output", gs.output, "Instance file to write")->required();
  gen_sparse->callback([&] {
    action = [&] {
      const OperatorSpec spec = gs.op.resolve();
      if (gs.card > gs.n) throw std::invalid_argument("--card exceeds --n");
      auto op = make_vector_operator(spec, gs.n, derive_seed(gs.seed, {1}));
      Instance inst = make_sparse_instance(gs.n, gs.card, gs.sigma, op, derive_seed(gs.seed, {2}));
      attach_rip(inst, spec);
      inst.provenance.seed = gs.seed;
      const Json config{{"command", "gen sparse"}, {"n", gs.n},         {"card", gs.card},
                        {"sigma", gs.sigma},       {"seed", gs.seed},   {"operator", operator_spec_json(spec)}};
      write_text_file(gs.output, write_instance(inst, config));
      return exit_code::kOk;
    };
  });

  struct {
    Eigen::Index m = 20;
    Eigen::Index n = 20;
    int rank = 5;
    double sigma = 0.0;
    std::uint64_t seed = 1;
    OperatorArgs op;
    std::string output;
  } gl;
  auto* gen_lowrank = gen->add_subcommand("lowrank", "Low-rank matrix recovery instance");
  gen_lowrank->add_option("--m", gl.m, "Rows")->check(CLI::PositiveNumber);
  gen_lowrank->add_option("--n", gl.n, "Columns")->check(CLI::PositiveNumber);
  gen_lowrank->add_option("--rank", gl.rank, "Rank of the ground truth")->check(CLI::NonNegativeNumber);
  gen_lowrank->add_option("--sigma", gl.sigma, "Measurement noise standard deviation")->check(CLI::NonNegativeNumber);
  gen_lowrank->add_option("--seed", gl.seed, "Random seed");
  gl.op.add_to(gen_lowrank);
  gen_lowrank->add_option("-o,--output", gl.output, "Instance file to write")->required();
  gen_lowrank->callback([&] {
    action = [&] {
      const OperatorSpec spec = gl.op.resolve();
      if (gl.rank > std::min(gl.m, gl.n)) throw std::invalid_argument("--rank exceeds min(--m, --n)");
      auto op = make_matrix_operator(spec, gl.m, gl.n, derive_seed(gl.seed, {1}));
      Instance inst = make_lowrank_instance(gl.m, gl.n, gl.rank, gl.sigma, op, derive_seed(gl.seed, {2}));
      attach_rip(inst, spec);
      inst.provenance.seed = gl.seed;
      const Json config{{"command", "gen lowrank"}, {"m", gl.m},       {"n", gl.n},
                        {"rank", gl.rank},          {"sigma", gl.sigma}, {"seed", gl.seed},
                        {"operator", operator_spec_json(spec)}};
      write_text_file(gl.output, write_instance(inst, config));
      return exit_code::kOk;
    };
  });

  struct {
    double a = 1.0;
    double b = 0.0;
    std::string output;
  } gsc;
  auto* gen_scalar = gen->add_subcommand("scalar", "One-dimensional instance r_mu(x) + (a x - b)^2");
  gen_scalar->add_option("--a", gsc.a, "Operator coefficient")->required();
  gen_scalar->add_option("--b", gsc.b, "Measurement")->required();
  gen_scalar->add_option("-o,--output", gsc.output, "Instance file to write")->required();
  gen_scalar->callback([&] {
    action = [&] {
      const Instance inst = make_scalar_instance(gsc.a, gsc.b);
      write_text_file(gsc.output, write_instance(inst, {{"command", "gen scalar"}, {"a", gsc.a}, {"b", gsc.b}}));
      return exit_code::kOk;
    };
  });

  struct {
    int frames = 50;
    int points = 30;
    int basis = 4;
    double sigma = 0.0;
    double perturbation = 0.0;
    bool derivative = false;
    std::uint64_t seed = 1;
    std::string output;
  } gn;
  auto* gen_nrsfm = gen->add_subcommand("nrsfm", "Synthetic non-rigid structure-from-motion instance");
  gen_nrsfm->add_option("--F", gn.frames, "Frames")->check(CLI::Range(2, 100000));
  gen_nrsfm->add_option("--n", gn.points, "Points per frame")->check(CLI::PositiveNumber);
  gen_nrsfm->add_option("--K", gn.basis, "Shape-basis size")->check(CLI::PositiveNumber);
  gen_nrsfm->add_option("--sigma", gn.sigma, "Measurement noise")->check(CLI::NonNegativeNumber);
  gen_nrsfm->add_option("--perturbation", gn.perturbation, "Full-rank perturbation of the ground truth")
      ->check(CLI::NonNegativeNumber);
  gen_nrsfm->add_flag("--derivative", gn.derivative, "Include the trajectory-derivative penalty");
  gen_nrsfm->add_option("--seed", gn.seed, "Random seed");
  gen_nrsfm->add_option("-o,--output", gn.output, "Instance file to write")->required();
  gen_nrsfm->callback([&] {
    action = [&] {
      const NrsfmInstance nr = make_nrsfm_instance(gn.frames, gn.points, gn.basis, gn.sigma, gn.seed, gn.perturbation);
      const Json config{{"command", "gen nrsfm"},   {"F", gn.frames},
                        {"n", gn.points},           {"K", gn.basis},
                        {"sigma", gn.sigma},        {"perturbation", gn.perturbation},
                        {"derivative", gn.derivative}, {"seed", gn.seed}};
      write_text_file(gn.output, write_instance(with_derivative_penalty(nr, gn.derivative), config));
      return exit_code::kOk;
    };
  });

  // solve --------------------------------------------------------------------
  struct {
    std::string instance;
    std::string reg = "rmu";
    double mu = 0.0;
    std::string x0;
    std::string output;
    std::string trace;
    SolverConfig cfg;
    CLI::Option* mu_opt = nullptr;
  } sv;
  auto* solve_cmd = app.add_subcommand("solve", "Minimize reg(x) + |A x - b|^2 with the GIST iteration");
  solve_cmd->add_option("-i,--instance", sv.instance, "Instance file")->required();
  solve_cmd->add_option("--reg", sv.reg, "Regularizer: rmu, l1, nuclear, card, rank or none")
      ->check(CLI::IsMember({"rmu", "l1", "nuclear", "card", "rank", "none"}));
  sv.mu_opt = solve_cmd->add_option("--mu", sv.mu, "Strength; convex baselines use mu' = 2 sqrt(mu)");
  solve_cmd->add_option("--x0", sv.x0, "Start from the solution stored in a solve result file");
  add_solver_options(solve_cmd, sv.cfg);
  solve_cmd->add_option("-o,--output", sv.output, "Result file (stdout when omitted)");
  solve_cmd->add_option("--trace", sv.trace, "Write the iteration trace as JSON lines");
  solve_cmd->callback([&] {
    action = [&] {
      const RegKind kind = reg_kind_from_string(sv.reg);
      if (kind != RegKind::None && sv.mu_opt->count() == 0) throw std::invalid_argument("--mu is required");
      const RegParams reg = RegParams::make(kind, sv.mu);
      sv.cfg.validate();
      const Instance inst = instance_from_json(read_json_file(sv.instance));
      check_compatible(inst, reg);
      std::optional<Eigen::MatrixXd> x0;
      if (!sv.x0.empty()) {
        x0 = solution_from_json(read_json_file(sv.x0));
        if (x0->rows() != inst.shape().rows || x0->cols() != inst.shape().cols) {
          throw InputError("--x0 solution does not match the instance shape");
        }
      }
      SolverConfig cfg = sv.cfg;
      cfg.record_history = !sv.trace.empty();
      const SolveResult res = solve(inst, reg, cfg, x0);

      Json doc = solve_result_to_json(res, reg);
      doc["config"] = {{"command", "solve"},
                       {"instance", sv.instance},
                       {"instance_seed", inst.provenance.seed},
                       {"reg", reg_to_json(reg)},
                       {"x0", sv.x0.empty() ? Json(nullptr) : Json(sv.x0)},
                       {"solver", solver_config_to_json(sv.cfg)}};
      if (!sv.trace.empty()) {
        std::ostringstream lines;
        write_trace_jsonl(lines, res.history);
        write_text_file(sv.trace, lines.str());
      }
      write_json(sv.output, doc, out);
      if (verbosity > 0) {
        err << "rmu: " << to_string(res.status) << " after " << res.iterations << " iterations, objective "
            << res.objective << "\n";
      }
      return converged(res.status) ? exit_code::kOk : exit_code::kNotConverged;
    };
  });

  // certify ------------------------------------------------------------------
  struct {
    std::string instance;
    std::string solution;
    double mu = 0.0;
    double delta = 0.0;
    int order = 0;
    double margin = 0.0;
    std::string output;
    CLI::Option* mu_opt = nullptr;
    CLI::Option* delta_opt = nullptr;
    CLI::Option* order_opt = nullptr;
  } ct;
  auto* certify_cmd = app.add_subcommand("certify", "Check the optimality certificate of a stationary point");
  certify_cmd->add_option("-i,--instance", ct.instance, "Instance file")->required();
  certify_cmd->add_option("-s,--solution", ct.solution, "Solve result holding the point to certify")->required();
  ct.mu_opt = certify_cmd->add_option("--mu", ct.mu, "Strength (default: the one recorded in the solve result)");
  ct.delta_opt = certify_cmd->add_option("--delta", ct.delta, "RIP constant when the instance does not record one");
  ct.order_opt = certify_cmd->add_option("--order", ct.order, "Cardinality / rank the RIP constant holds for")
                     ->check(CLI::PositiveNumber);
  certify_cmd->add_option("--margin", ct.margin, "Distance demanded from the forbidden interval")
      ->check(CLI::NonNegativeNumber);
  certify_cmd->add_option("-o,--output", ct.output, "Report file (stdout when omitted)");
  certify_cmd->callback([&] {
    action = [&] {
      const Instance inst = instance_from_json(read_json_file(ct.instance));
      const Json sol = read_json_file(ct.solution);
      const Eigen::MatrixXd x = solution_from_json(sol);
      if (x.rows() != inst.shape().rows || x.cols() != inst.shape().cols) {
        throw InputError("solution does not match the instance shape");
      }
      double mu = ct.mu;
      if (ct.mu_opt->count() == 0) {
        if (!sol.contains("reg")) throw std::invalid_argument("--mu is required (the solution records none)");
        mu = sol["reg"].value("mu", 0.0);
      }
      if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
      const auto [delta, source] =
          resolve_delta(inst, ct.delta_opt->count() ? std::optional<double>(ct.delta) : std::nullopt);
      int order = 0;
      if (ct.order_opt->count()) {
        order = ct.order;
      } else if (inst.rip_order) {
        order = *inst.rip_order;
      } else {
        throw MissingDelta("no RIP order: the instance does not record one, pass --order");
      }
      const CertificateReport rep = check_certificate(x, inst, mu, delta, order, ct.margin, source);
      Json doc = certificate_to_json(rep);
      doc["config"] = {{"command", "certify"}, {"instance", ct.instance}, {"solution", ct.solution},
                       {"mu", mu},             {"delta", delta},        {"order", order},
                       {"margin", ct.margin}};
      write_json(ct.output, doc, out);
      if (verbosity > 0) err << "rmu: certificate " << (rep.passed ? "passed" : "failed") << "\n";
      return rep.passed ? exit_code::kOk : exit_code::kCertificateFailed;
    };
  });

  // grid ---------------------------------------------------------------------
  struct {
    std::string problem;
    bool fast = false;
    std::string sigma;
    std::string mu;
    int trials = 0;
    std::vector<std::string> regs;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    int card = -1;
    int rank = -1;
    OperatorArgs op;
    std::uint64_t seed = 1;
    int threads = 0;
    SolverConfig cfg;
    std::string output;
    std::string format;
  } gr;
  auto* grid_cmd = app.add_subcommand("grid", "Run a (sigma, mu) phase grid");
  grid_cmd->add_option("problem", gr.problem, "sparse or lowrank")
      ->required()
      ->check(CLI::IsMember({"sparse", "lowrank"}));
  grid_cmd->add_flag("--fast", gr.fast, "Reduced profile: 10 trials, coarse axes");
  grid_cmd->add_option("--sigma", gr.sigma, "Noise axis, e.g. 0..0.5:0.05");
  grid_cmd->add_option("--mu", gr.mu, "Strength axis, e.g. 0..3:0.1");
  grid_cmd->add_option("--trials", gr.trials, "Trials per cell")->check(CLI::PositiveNumber);
  grid_cmd->add_option("--regs", gr.regs, "Regularizers to compare")->delimiter(',');
  grid_cmd->add_option("--n", gr.n, "Sparse: dimension (200). Low-rank: columns (20)")->check(CLI::PositiveNumber);
  grid_cmd->add_option("--m", gr.m, "Low-rank: rows (20)")->check(CLI::PositiveNumber);
  grid_cmd->add_option("--card", gr.card, "Sparse: ground-truth cardinality (10)")->check(CLI::NonNegativeNumber);
  grid_cmd->add_option("--rank", gr.rank, "Low-rank: ground-truth rank (5)")->check(CLI::NonNegativeNumber);
  gr.op.add_to(grid_cmd);
  grid_cmd->add_option("--seed", gr.seed, "Base seed");
  grid_cmd->add_option("--threads", gr.threads, "Worker threads (default: RMU_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  add_solver_options(grid_cmd, gr.cfg);
  grid_cmd->add_option("-o,--output", gr.output, "Result file (.csv or .json)")->required();
  grid_cmd->add_option("--format", gr.format, "csv or json (default: from the file extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  grid_cmd->callback([&] {
    action = [&] {
      const Problem problem = problem_from_string(gr.problem);
      GridSpec spec = GridSpec::defaults(problem, gr.fast);
      if (!gr.sigma.empty()) spec.sigma_axis = parse_axis(gr.sigma);
      if (!gr.mu.empty()) spec.mu_axis = parse_axis(gr.mu);
      if (gr.trials > 0) spec.trials = gr.trials;
      if (!gr.regs.empty()) spec.regs = parse_regs(gr.regs);
      if (problem == Problem::Sparse) {
        if (gr.m > 0 || gr.rank >= 0) throw std::invalid_argument("--m and --rank apply to lowrank grids");
        if (gr.n > 0) spec.n = gr.n;
        if (gr.card >= 0) spec.cardinality = gr.card;
      } else {
        if (gr.card >= 0) throw std::invalid_argument("--card applies to sparse grids");
        if (gr.m > 0) spec.rows = gr.m;
        if (gr.n > 0) spec.cols = gr.n;
        if (gr.rank >= 0) spec.rank = gr.rank;
      }
      spec.op = gr.op.resolve();
      spec.base_seed = gr.seed;
      spec.threads = gr.threads;
      spec.solver = gr.cfg;
      const OutputFormat format = resolve_format(gr.format, gr.output);
      spec.validate();

      if (verbosity > 0) {
        err << "rmu: grid " << gr.problem << " " << spec.sigma_axis.size() << "x" << spec.mu_axis.size() << ", "
            << spec.trials << " trials, " << resolve_threads(spec.threads) << " threads\n";
      }
      const GridResult grid = run_phase_grid(spec);
      Json config = grid_spec_to_json(spec);
      config["command"] = "grid";
      emit_results(grid, gr.output, format, config);

      int completed = 0, flagged = 0;
      for (const auto& cell : grid.cells) {
        flagged += cell.flagged;
        for (const auto& r : cell.records) completed += r.error.empty() ? 1 : 0;
      }
      if (verbosity > 0 || flagged > 0) err << "rmu: " << flagged << " flagged trial solves\n";
      return completed > 0 ? exit_code::kOk : exit_code::kNotConverged;
    };
  });

  // nrsfm --------------------------------------------------------------------
  struct {
    NrsfmSpec spec;
    std::string mu = "1..50";
    bool derivative = false;
    bool compare = false;
    std::vector<std::string> regs{"rmu", "nuclear"};
    std::string output;
    std::string format;
  } nr;
  auto* nrsfm_cmd = app.add_subcommand("nrsfm", "Fit-versus-rank study on a synthetic NRSfM instance");
  nrsfm_cmd->add_option("--F", nr.spec.frames, "Frames")->check(CLI::Range(2, 100000));
  nrsfm_cmd->add_option("--n", nr.spec.points, "Points per frame")->check(CLI::PositiveNumber);
  nrsfm_cmd->add_option("--K", nr.spec.basis, "Shape-basis size")->check(CLI::PositiveNumber);
  nrsfm_cmd->add_option("--sigma", nr.spec.noise, "Measurement noise")->check(CLI::NonNegativeNumber);
  nrsfm_cmd->add_option("--perturbation", nr.spec.perturbation, "Full-rank perturbation of the ground truth")
      ->check(CLI::NonNegativeNumber);
  nrsfm_cmd->add_option("--mu", nr.mu, "Strength sweep");
  auto* deriv_opt = nrsfm_cmd->add_flag("--derivative", nr.derivative, "Add the |D X#|^2 trajectory prior");
  nrsfm_cmd->add_flag("--compare-derivative", nr.compare, "Run both with and without the prior")->excludes(deriv_opt);
  nrsfm_cmd->add_option("--regs", nr.regs, "Regularizers on X#")->delimiter(',');
  nrsfm_cmd->add_option("--seed", nr.spec.seed, "Random seed");
  nrsfm_cmd->add_option("--threads", nr.spec.threads, "Worker threads (default: RMU_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  add_solver_options(nrsfm_cmd, nr.spec.solver);
  nrsfm_cmd->add_option("-o,--output", nr.output, "Result file (.csv or .json)")->required();
  nrsfm_cmd->add_option("--format", nr.format, "csv or json (default: from the file extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  nrsfm_cmd->callback([&] {
    action = [&] {
      NrsfmSpec spec = nr.spec;
      spec.mu_list = parse_axis(nr.mu);
      spec.regs = parse_regs(nr.regs);
      spec.derivative = nr.compare ? std::vector<bool>{false, true} : std::vector<bool>{nr.derivative};
      const OutputFormat format = resolve_format(nr.format, nr.output);
      spec.validate();
      const auto curves = run_nrsfm_study(spec);
      Json config = nrsfm_spec_to_json(spec);
      config["command"] = "nrsfm";
      emit_results(curves, nr.output, format, config);
      return exit_code::kOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    if (dynamic_cast<const CLI::FileError*>(&e)) {
      err << "rmu: " << e.what() << "\n";
      return exit_code::kIoError;
    }
    err << "rmu: " << e.what() << "\nRun with --help for usage.\n";
    return exit_code::kUsage;
  }
  if (!action) {
    err << "rmu: no command given\n";
    return exit_code::kUsage;
  }

  try {
    return action();
  } catch (const MissingDelta& e) {
    err << "rmu: missing input: " << e.what() << "\n";
    return exit_code::kMissingDelta;
  } catch (const CertificateRefused& e) {
    err << "rmu: certificate refused: " << e.what() << "\n";
    return exit_code::kCertificateRefused;
  } catch (const InputError& e) {
    err << "rmu: invalid input: " << e.what() << "\n";
    return exit_code::kDataError;
  } catch (const IoError& e) {
    err << "rmu: " << e.what() << "\n";
    return exit_code::kIoError;
  } catch (const std::invalid_argument& e) {
    err << "rmu: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const std::exception& e) {
    err << "rmu: error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace rmu
