#include "rmu/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rmu/certificate.hpp"
#include "rmu/rng.hpp"

namespace rmu {

namespace {

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// written to its own slot by the caller, so the result is independent of
// scheduling.
template <class Body>
void parallel_for(int count, int threads, Body body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<double> linear_axis(double lo, double hi, double step) {
  std::vector<double> out;
  const int n = static_cast<int>(std::lround((hi - lo) / step));
  for (int k = 0; k <= n; ++k) out.push_back(lo + step * k);
  return out;
}

void check_axis(const std::vector<double>& axis, const char* name, bool allow_zero) {
  if (axis.empty()) throw std::invalid_argument(std::string(name) + " axis is empty");
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i]) || axis[i] < 0.0 || (!allow_zero && axis[i] == 0.0)) {
      throw std::invalid_argument(std::string(name) + " axis values must be finite and non-negative");
    }
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      throw std::invalid_argument(std::string(name) + " axis must be strictly increasing");
    }
  }
}

RegParams params_for(RegKind kind, double mu) {
  return mu == 0.0 ? RegParams::make(RegKind::None, 0.0) : RegParams::make(kind, mu);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string csv_preamble(const char* schema, const Json& config) {
  return std::string("# schema: ") + schema + "\n# config: " + config.dump() + "\n";
}

Json solver_json_or_null(const SolverConfig& c) { return solver_config_to_json(c); }

}  // namespace

std::string_view to_string(Problem p) { return p == Problem::Sparse ? "sparse" : "lowrank"; }

Problem problem_from_string(std::string_view s) {
  if (s == "sparse") return Problem::Sparse;
  if (s == "lowrank") return Problem::LowRank;
  throw std::invalid_argument("unknown problem '" + std::string(s) + "' (expected sparse or lowrank)");
}

GridSpec GridSpec::defaults(Problem problem, bool fast) {
  GridSpec g;
  g.problem = problem;
  g.trials = fast ? 10 : 50;
  if (problem == Problem::Sparse) {
    g.regs = {RegKind::RMu, RegKind::L1};
    g.sigma_axis = fast ? std::vector<double>{0.0, 0.1, 0.25, 0.5} : linear_axis(0.0, 0.5, 0.05);
    g.mu_axis = fast ? std::vector<double>{0.0, 0.5, 1.0, 2.0, 3.0} : linear_axis(0.0, 3.0, 0.1);
  } else {
    g.regs = {RegKind::RMu, RegKind::Nuclear};
    g.sigma_axis = fast ? std::vector<double>{0.0, 0.1, 0.25, 0.5} : linear_axis(0.0, 0.5, 0.05);
    g.mu_axis = fast ? std::vector<double>{0.0, 2.0, 4.0, 8.0, 12.0} : linear_axis(0.0, 12.0, 0.5);
  }
  return g;
}

void GridSpec::validate() const {
  check_axis(sigma_axis, "sigma", true);
  check_axis(mu_axis, "mu", true);
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (regs.empty()) throw std::invalid_argument("no regularizers to compare");
  if (op.kind == OperatorSpec::Kind::Rip && !(op.delta > 0.0 && op.delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  for (RegKind k : regs) {
    if (k == RegKind::None) throw std::invalid_argument("'none' is not a comparable regularizer");
    if (problem == Problem::Sparse && is_spectral(k)) {
      throw std::invalid_argument("regularizer '" + std::string(to_string(k)) + "' needs a low-rank problem");
    }
    if (problem == Problem::LowRank && is_entrywise(k)) {
      throw std::invalid_argument("regularizer '" + std::string(to_string(k)) + "' needs a sparse problem");
    }
  }
  if (problem == Problem::Sparse) {
    if (n < 1 || cardinality < 0 || cardinality > n) throw std::invalid_argument("need 0 <= card <= n");
  } else {
    if (rows < 1 || cols < 1 || rank < 0 || rank > std::min(rows, cols)) {
      throw std::invalid_argument("need 0 <= rank <= min(rows, cols)");
    }
  }
  solver.validate();
}

const CellResult& GridResult::at(int sigma_index, int mu_index, RegKind reg) const {
  const auto it = std::find(spec.regs.begin(), spec.regs.end(), reg);
  if (it == spec.regs.end()) throw std::out_of_range("regularizer not in grid");
  const auto n_mu = spec.mu_axis.size();
  const auto n_reg = spec.regs.size();
  const std::size_t idx = (static_cast<std::size_t>(sigma_index) * n_mu + static_cast<std::size_t>(mu_index)) * n_reg +
                          static_cast<std::size_t>(it - spec.regs.begin());
  return cells.at(idx);
}

std::uint64_t trial_seed(const GridSpec& spec, int sigma_index, int trial) {
  return derive_seed(spec.base_seed, {static_cast<std::uint64_t>(spec.problem == Problem::Sparse ? 1 : 2),
                                      static_cast<std::uint64_t>(sigma_index), static_cast<std::uint64_t>(trial)});
}

Instance make_grid_instance(const GridSpec& spec, int sigma_index, int trial) {
  const std::uint64_t seed = trial_seed(spec, sigma_index, trial);
  const double sigma = spec.sigma_axis.at(static_cast<std::size_t>(sigma_index));
  Instance inst;
  if (spec.problem == Problem::Sparse) {
    auto op = make_vector_operator(spec.op, spec.n, derive_seed(seed, {1}));
    inst = make_sparse_instance(spec.n, spec.cardinality, sigma, op, derive_seed(seed, {2}));
  } else {
    auto op = make_matrix_operator(spec.op, spec.rows, spec.cols, derive_seed(seed, {1}));
    inst = make_lowrank_instance(spec.rows, spec.cols, spec.rank, sigma, op, derive_seed(seed, {2}));
  }
  attach_rip(inst, spec.op);
  inst.provenance.seed = seed;
  return inst;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RMU_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min<long>(v, 1024));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

GridResult run_phase_grid(const GridSpec& spec) {
  spec.validate();
  const int n_sigma = static_cast<int>(spec.sigma_axis.size());
  const int n_mu = static_cast<int>(spec.mu_axis.size());
  const int n_reg = static_cast<int>(spec.regs.size());
  const int trials = spec.trials;

  auto slot = [&](int si, int mj, int r, int t) {
    return static_cast<std::size_t>(((si * n_mu + mj) * n_reg + r) * trials + t);
  };
  std::vector<TrialRecord> records(static_cast<std::size_t>(n_sigma) * n_mu * n_reg * trials);

  parallel_for(n_sigma * trials, resolve_threads(spec.threads), [&](int item) {
    const int si = item / trials;
    const int t = item % trials;
    const std::uint64_t seed = trial_seed(spec, si, t);

    std::optional<Instance> inst;
    std::string gen_error;
    try {
      inst = make_grid_instance(spec, si, t);
    } catch (const std::exception& e) {
      gen_error = std::string("generation failed: ") + e.what();
    }

    for (int mj = 0; mj < n_mu; ++mj) {
      for (int r = 0; r < n_reg; ++r) {
        TrialRecord& rec = records[slot(si, mj, r, t)];
        rec.sigma_index = si;
        rec.mu_index = mj;
        rec.trial = t;
        rec.seed = seed;
        rec.sigma = spec.sigma_axis[static_cast<std::size_t>(si)];
        rec.mu = spec.mu_axis[static_cast<std::size_t>(mj)];
        rec.reg = spec.regs[static_cast<std::size_t>(r)];
        const RegParams params = params_for(rec.reg, rec.mu);
        rec.solved_as = params.kind;
        rec.threshold = std::sqrt(rec.mu);
        if (!inst) {
          rec.error = gen_error;
          rec.distance = rec.residual = rec.objective = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        try {
          SolverConfig cfg = spec.solver;
          cfg.record_history = false;
          const SolveResult res = solve(*inst, params, cfg);
          rec.distance = (res.solution - *inst->ground_truth).norm();
          rec.residual = res.residual;
          rec.objective = res.objective;
          rec.support = res.support;
          rec.hit_target = res.support == spec.target();
          rec.status = res.status;
          rec.iterations = res.iterations;
          if (rec.reg == RegKind::RMu && rec.mu > 0.0 && inst->delta && inst->rip_order) {
            rec.certified = true;
            try {
              const CertificateReport rep = check_certificate(res.solution, *inst, rec.mu, *inst->delta,
                                                              *inst->rip_order, 0.0, DeltaSource::Instance);
              rec.cert_passed = rep.passed;
              rec.cert_margin = rep.margin;
            } catch (const CertificateRefused& e) {
              rec.cert_refused = true;
              rec.cert_margin = std::numeric_limits<double>::quiet_NaN();
            }
          }
        } catch (const std::exception& e) {
          rec.error = e.what();
          rec.distance = rec.residual = rec.objective = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
  });

  GridResult out;
  out.spec = spec;
  out.cells.reserve(static_cast<std::size_t>(n_sigma) * n_mu * n_reg);
  for (int si = 0; si < n_sigma; ++si) {
    for (int mj = 0; mj < n_mu; ++mj) {
      for (int r = 0; r < n_reg; ++r) {
        CellResult cell;
        cell.sigma_index = si;
        cell.mu_index = mj;
        cell.sigma = spec.sigma_axis[static_cast<std::size_t>(si)];
        cell.mu = spec.mu_axis[static_cast<std::size_t>(mj)];
        cell.reg = spec.regs[static_cast<std::size_t>(r)];
        double dist = 0.0, resid = 0.0;
        int hits = 0, verified = 0;
        for (int t = 0; t < trials; ++t) {
          const TrialRecord& rec = records[slot(si, mj, r, t)];
          dist += rec.distance;
          resid += rec.residual;
          hits += rec.hit_target ? 1 : 0;
          verified += rec.cert_passed ? 1 : 0;
          if (!rec.error.empty() || !converged(rec.status)) ++cell.flagged;
          cell.records.push_back(rec);
        }
        cell.mean_distance = dist / trials;
        cell.mean_residual = resid / trials;
        cell.target_fraction = static_cast<double>(hits) / trials;
        if (cell.records.front().certified) cell.verified_fraction = static_cast<double>(verified) / trials;
        out.cells.push_back(std::move(cell));
      }
    }
  }
  return out;
}

BiasComparison compare_at_target(const GridResult& grid, int sigma_index, RegKind a, RegKind b) {
  const int n_mu = static_cast<int>(grid.spec.mu_axis.size());
  auto first_hit = [&](RegKind reg, int t) -> std::optional<double> {
    for (int mj = 0; mj < n_mu; ++mj) {
      const TrialRecord& rec = grid.at(sigma_index, mj, reg).records.at(static_cast<std::size_t>(t));
      if (rec.hit_target && rec.error.empty()) return rec.distance;
    }
    return std::nullopt;
  };
  BiasComparison out;
  double sum_a = 0.0, sum_b = 0.0;
  for (int t = 0; t < grid.spec.trials; ++t) {
    const auto da = first_hit(a, t);
    const auto db = first_hit(b, t);
    out.trials_a += da ? 1 : 0;
    out.trials_b += db ? 1 : 0;
    if (da && db) {
      sum_a += *da;
      sum_b += *db;
      ++out.trials_compared;
    }
  }
  if (out.trials_compared > 0) {
    out.mean_a = sum_a / out.trials_compared;
    out.mean_b = sum_b / out.trials_compared;
  } else {
    out.mean_a = out.mean_b = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---------------------------------------------------------------------------

void NrsfmSpec::validate() const {
  if (frames < 2 || points < 1 || basis < 1 || basis > std::min(frames, 3 * points)) {
    throw std::invalid_argument("need frames >= 2, points >= 1 and 1 <= basis <= min(frames, 3 points)");
  }
  if (!(noise >= 0.0) || !(perturbation >= 0.0)) throw std::invalid_argument("noise levels must be >= 0");
  check_axis(mu_list, "mu", true);
  if (derivative.empty()) throw std::invalid_argument("no derivative setting selected");
  if (regs.empty()) throw std::invalid_argument("no regularizers to compare");
  for (RegKind k : regs) {
    if (!(k == RegKind::RMu || is_spectral(k))) {
      throw std::invalid_argument("regularizer '" + std::string(to_string(k)) + "' does not act on X#");
    }
  }
  solver.validate();
}

bool accepted_objectives_decrease(const std::vector<TraceEntry>& history) {
  double last = std::numeric_limits<double>::infinity();
  for (const auto& e : history) {
    if (!e.accepted) continue;
    if (!(e.objective < last)) return false;
    last = e.objective;
  }
  return true;
}

std::vector<NrsfmCurve> run_nrsfm_study(const NrsfmSpec& spec) {
  spec.validate();
  const NrsfmInstance base =
      make_nrsfm_instance(spec.frames, spec.points, spec.basis, spec.noise, spec.seed, spec.perturbation);
  std::vector<Instance> variants;
  for (bool d : spec.derivative) variants.push_back(with_derivative_penalty(base, d));

  const int n_d = static_cast<int>(spec.derivative.size());
  const int n_r = static_cast<int>(spec.regs.size());
  const int n_mu = static_cast<int>(spec.mu_list.size());

  std::vector<NrsfmCurve> curves(static_cast<std::size_t>(n_d * n_r));
  for (int d = 0; d < n_d; ++d) {
    for (int r = 0; r < n_r; ++r) {
      NrsfmCurve& c = curves[static_cast<std::size_t>(d * n_r + r)];
      c.reg = spec.regs[static_cast<std::size_t>(r)];
      c.derivative = spec.derivative[static_cast<std::size_t>(d)];
      c.records.resize(static_cast<std::size_t>(n_mu));
    }
  }

  parallel_for(n_d * n_r * n_mu, resolve_threads(spec.threads), [&](int item) {
    const int mj = item % n_mu;
    const int cr = item / n_mu;
    const int d = cr / n_r;
    NrsfmCurve& curve = curves[static_cast<std::size_t>(cr)];
    NrsfmRecord& rec = curve.records[static_cast<std::size_t>(mj)];
    const Instance& inst = variants[static_cast<std::size_t>(d)];
    rec.mu = spec.mu_list[static_cast<std::size_t>(mj)];

    SolverConfig cfg = spec.solver;
    cfg.record_history = true;
    const SolveResult res = solve(inst, params_for(curve.reg, rec.mu), cfg);
    rec.rank = numerical_rank(res.solution);
    rec.data_fit = res.residual;
    rec.gt_distance = (res.solution - *inst.ground_truth).norm();
    rec.objective = res.objective;
    rec.status = res.status;
    rec.iterations = res.iterations;
    rec.monotone = accepted_objectives_decrease(res.history);
  });
  return curves;
}

bool fit_nonincreasing_in_rank(const NrsfmCurve& curve, double slack) {
  for (const auto& lo : curve.records) {
    if (!converged(lo.status)) continue;
    for (const auto& hi : curve.records) {
      if (!converged(hi.status)) continue;
      if (hi.rank > lo.rank && hi.data_fit > lo.data_fit + slack) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

OutputFormat output_format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return OutputFormat::Csv;
  if (ext == ".json") return OutputFormat::Json;
  throw std::invalid_argument("cannot infer output format from '" + path.string() + "' (use .csv or .json)");
}

Json grid_spec_to_json(const GridSpec& spec) {
  Json regs = Json::array();
  for (RegKind k : spec.regs) regs.push_back(to_string(k));
  Json j{{"problem", to_string(spec.problem)},
         {"sigma_axis", spec.sigma_axis},
         {"mu_axis", spec.mu_axis},
         {"trials", spec.trials},
         {"regs", std::move(regs)},
         {"base_seed", spec.base_seed},
         {"operator", spec.op.kind == OperatorSpec::Kind::Rip ? "rip" : "gaussian"},
         {"solver", solver_json_or_null(spec.solver)}};
  if (spec.op.kind == OperatorSpec::Kind::Rip) {
    j["delta"] = spec.op.delta;
  } else {
    j["measurements"] = spec.op.rows;
  }
  if (spec.problem == Problem::Sparse) {
    j["n"] = spec.n;
    j["card"] = spec.cardinality;
  } else {
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    j["rank"] = spec.rank;
  }
  return j;
}

Json nrsfm_spec_to_json(const NrsfmSpec& spec) {
  Json regs = Json::array();
  for (RegKind k : spec.regs) regs.push_back(to_string(k));
  Json deriv = Json::array();
  for (bool d : spec.derivative) deriv.push_back(d);
  return {{"frames", spec.frames},
          {"points", spec.points},
          {"basis", spec.basis},
          {"noise", spec.noise},
          {"perturbation", spec.perturbation},
          {"mu_list", spec.mu_list},
          {"derivative", std::move(deriv)},
          {"regs", std::move(regs)},
          {"seed", spec.seed},
          {"solver", solver_json_or_null(spec.solver)}};
}

std::string grid_to_csv(const GridResult& grid, const Json& config) {
  std::ostringstream out;
  out << csv_preamble(kGridSchema, config);
  out << "sigma_index,mu_index,trial,seed,sigma,mu,reg,solved_as,threshold,distance,residual,objective,support,"
         "hit_target,status,iterations,certified,cert_refused,cert_passed,cert_margin,error\n";
  for (const auto& cell : grid.cells) {
    for (const auto& r : cell.records) {
      out << r.sigma_index << ',' << r.mu_index << ',' << r.trial << ',' << r.seed << ',' << fmt(r.sigma) << ','
          << fmt(r.mu) << ',' << to_string(r.reg) << ',' << to_string(r.solved_as) << ',' << fmt(r.threshold) << ','
          << fmt(r.distance) << ',' << fmt(r.residual) << ',' << fmt(r.objective) << ',' << r.support << ','
          << (r.hit_target ? 1 : 0) << ',' << to_string(r.status) << ',' << r.iterations << ','
          << (r.certified ? 1 : 0) << ',' << (r.cert_refused ? 1 : 0) << ',' << (r.cert_passed ? 1 : 0) << ','
          << fmt(r.cert_margin) << ',' << csv_quote(r.error) << '\n';
    }
  }
  return out.str();
}

Json grid_to_json(const GridResult& grid, const Json& config) {
  Json cells = Json::array();
  for (const auto& cell : grid.cells) {
    Json recs = Json::array();
    for (const auto& r : cell.records) {
      recs.push_back({{"trial", r.trial},
                      {"seed", r.seed},
                      {"solved_as", to_string(r.solved_as)},
                      {"threshold", r.threshold},
                      {"distance", r.distance},
                      {"residual", r.residual},
                      {"objective", r.objective},
                      {"support", r.support},
                      {"hit_target", r.hit_target},
                      {"status", to_string(r.status)},
                      {"iterations", r.iterations},
                      {"certified", r.certified},
                      {"cert_refused", r.cert_refused},
                      {"cert_passed", r.cert_passed},
                      {"cert_margin", r.cert_margin},
                      {"error", r.error}});
    }
    cells.push_back({{"sigma_index", cell.sigma_index},
                     {"mu_index", cell.mu_index},
                     {"sigma", cell.sigma},
                     {"mu", cell.mu},
                     {"reg", to_string(cell.reg)},
                     {"mean_distance", cell.mean_distance},
                     {"mean_residual", cell.mean_residual},
                     {"target_fraction", cell.target_fraction},
                     {"verified_fraction", cell.verified_fraction ? Json(*cell.verified_fraction) : Json(nullptr)},
                     {"flagged", cell.flagged},
                     {"records", std::move(recs)}});
  }
  return {{"schema", kGridSchema}, {"config", config}, {"cells", std::move(cells)}};
}

std::string nrsfm_to_csv(const std::vector<NrsfmCurve>& curves, const Json& config) {
  std::ostringstream out;
  out << csv_preamble(kNrsfmSchema, config);
  out << "reg,derivative,mu,rank,data_fit,gt_distance,objective,status,iterations,monotone\n";
  for (const auto& c : curves) {
    for (const auto& r : c.records) {
      out << to_string(c.reg) << ',' << (c.derivative ? 1 : 0) << ',' << fmt(r.mu) << ',' << r.rank << ','
          << fmt(r.data_fit) << ',' << fmt(r.gt_distance) << ',' << fmt(r.objective) << ',' << to_string(r.status)
          << ',' << r.iterations << ',' << (r.monotone ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

Json nrsfm_to_json(const std::vector<NrsfmCurve>& curves, const Json& config) {
  Json arr = Json::array();
  for (const auto& c : curves) {
    Json recs = Json::array();
    for (const auto& r : c.records) {
      recs.push_back({{"mu", r.mu},
                      {"rank", r.rank},
                      {"data_fit", r.data_fit},
                      {"gt_distance", r.gt_distance},
                      {"objective", r.objective},
                      {"status", to_string(r.status)},
                      {"iterations", r.iterations},
                      {"monotone", r.monotone}});
    }
    arr.push_back({{"reg", to_string(c.reg)}, {"derivative", c.derivative}, {"records", std::move(recs)}});
  }
  return {{"schema", kNrsfmSchema}, {"config", config}, {"curves", std::move(arr)}};
}

void emit_results(const GridResult& grid, const std::filesystem::path& path, OutputFormat format,
                  const Json& config) {
  write_text_file(path, format == OutputFormat::Csv ? grid_to_csv(grid, config) : grid_to_json(grid, config).dump(1) + "\n");
}

void emit_results(const std::vector<NrsfmCurve>& curves, const std::filesystem::path& path, OutputFormat format,
                  const Json& config) {
  write_text_file(path,
                  format == OutputFormat::Csv ? nrsfm_to_csv(curves, config) : nrsfm_to_json(curves, config).dump(1) + "\n");
}

}  // namespace rmu
