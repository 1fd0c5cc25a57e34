#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rmu/instance.hpp"
#include "rmu/regularizers.hpp"
#include "rmu/serialization.hpp"
#include "rmu/solver.hpp"

namespace rmu {

enum class Problem { Sparse, LowRank };
std::string_view to_string(Problem p);
Problem problem_from_string(std::string_view s);

/// A (sigma, mu) phase grid comparing regularizers on generated instances.
struct GridSpec {
  Problem problem = Problem::Sparse;
  std::vector<double> sigma_axis;
  std::vector<double> mu_axis;
  int trials = 50;
  /// Sparse template: n-dimensional, `cardinality` non-zeros.
  Eigen::Index n = 200;
  int cardinality = 10;
  /// Low-rank template: rows x cols of rank `rank`.
  Eigen::Index rows = 20;
  Eigen::Index cols = 20;
  int rank = 5;
  OperatorSpec op;
  /// Compared regularizers; each is evaluated at every mu of the axis.
  std::vector<RegKind> regs;
  std::uint64_t base_seed = 1;
  SolverConfig solver;
  /// 0 picks RMU_THREADS or the hardware concurrency.
  int threads = 0;

  /// Full-size defaults (50 trials) or the reduced CI profile (10 trials,
  /// coarser axes).
  static GridSpec defaults(Problem problem, bool fast);
  /// Throws std::invalid_argument: axes must be non-empty and strictly
  /// increasing, trials >= 1, regularizers must fit the problem.
  void validate() const;
  int target() const { return problem == Problem::Sparse ? cardinality : rank; }
};

/// Per-trial outcome of one regularizer in one cell.
struct TrialRecord {
  int sigma_index = 0;
  int mu_index = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  double mu = 0.0;
  RegKind reg = RegKind::RMu;
  /// Regularizer actually solved: None on the mu = 0 row.
  RegKind solved_as = RegKind::RMu;
  /// Threshold used by the prox: sqrt(mu) for every kind.
  double threshold = 0.0;
  double distance = 0.0;  // |x - x_gt|
  double residual = 0.0;  // |A x - b|
  double objective = 0.0;
  int support = 0;  // card(x) or rank(x)
  bool hit_target = false;
  SolveStatus status = SolveStatus::Running;
  int iterations = 0;
  bool certified = false;  // certificate evaluated
  bool cert_refused = false;
  bool cert_passed = false;
  double cert_margin = 0.0;
  std::string error;
};

struct CellResult {
  int sigma_index = 0;
  int mu_index = 0;
  double sigma = 0.0;
  double mu = 0.0;
  RegKind reg = RegKind::RMu;
  double mean_distance = 0.0;
  double mean_residual = 0.0;
  double target_fraction = 0.0;
  /// Fraction of trials with a passing certificate; only for r_mu with a
  /// known delta and mu > 0.
  std::optional<double> verified_fraction;
  /// Trials that stalled, hit the iteration cap or raised.
  int flagged = 0;
  /// Exactly `trials` records, ordered by trial index.
  std::vector<TrialRecord> records;
};

struct GridResult {
  GridSpec spec;
  /// Ordered by sigma index, then mu index, then position in spec.regs.
  std::vector<CellResult> cells;

  const CellResult& at(int sigma_index, int mu_index, RegKind reg) const;
};

/// Seed of trial `trial` in row `sigma_index`. The same instance is reused
/// along the mu axis and across regularizers.
std::uint64_t trial_seed(const GridSpec& spec, int sigma_index, int trial);
/// Regenerates the instance solved by a grid trial.
Instance make_grid_instance(const GridSpec& spec, int sigma_index, int trial);

/// Thread count honouring an explicit request, then RMU_THREADS, then the
/// hardware.
int resolve_threads(int requested);

GridResult run_phase_grid(const GridSpec& spec);

/// Per-trial smallest-mu comparison of two regularizers at one noise level.
struct BiasComparison {
  double mean_a = 0.0;
  double mean_b = 0.0;
  /// Trials where both regularizers reach the target somewhere on the axis.
  int trials_compared = 0;
  int trials_a = 0;
  int trials_b = 0;
};

/// For every trial, takes the smallest mu at which each regularizer attains
/// the target card/rank, and averages the ground-truth distances over the
/// trials where both do.
BiasComparison compare_at_target(const GridResult& grid, int sigma_index, RegKind a, RegKind b);

// ---------------------------------------------------------------------------

struct NrsfmSpec {
  int frames = 50;
  int points = 30;
  int basis = 4;
  double noise = 0.0;
  double perturbation = 0.0;
  std::vector<double> mu_list;
  /// Derivative-prior settings to run; {false, true} runs both.
  std::vector<bool> derivative{false};
  std::vector<RegKind> regs{RegKind::RMu, RegKind::Nuclear};
  std::uint64_t seed = 1;
  SolverConfig solver;
  int threads = 0;

  void validate() const;
};

struct NrsfmRecord {
  double mu = 0.0;
  int rank = 0;
  double data_fit = 0.0;     // |R X - M|_F
  double gt_distance = 0.0;  // |X - X_gt|_F
  double objective = 0.0;
  SolveStatus status = SolveStatus::Running;
  int iterations = 0;
  /// Accepted objectives strictly decreased throughout the solve.
  bool monotone = true;
};

struct NrsfmCurve {
  RegKind reg = RegKind::RMu;
  bool derivative = false;
  /// One record per mu, in mu_list order.
  std::vector<NrsfmRecord> records;
};

std::vector<NrsfmCurve> run_nrsfm_study(const NrsfmSpec& spec);

/// Data fit is non-increasing as the achieved rank grows. Only converged
/// records take part; `slack` absorbs solver tolerance.
bool fit_nonincreasing_in_rank(const NrsfmCurve& curve, double slack);

/// Accepted objectives of a trace are strictly decreasing.
bool accepted_objectives_decrease(const std::vector<TraceEntry>& history);

// ---------------------------------------------------------------------------

enum class OutputFormat { Csv, Json };
OutputFormat output_format_from_path(const std::filesystem::path& path);

inline constexpr const char* kGridSchema = "rmu.grid/1";
inline constexpr const char* kNrsfmSchema = "rmu.nrsfm/1";

Json grid_spec_to_json(const GridSpec& spec);
Json nrsfm_spec_to_json(const NrsfmSpec& spec);

/// Flat per-trial records. CSV output starts with "# " comment lines holding
/// the schema and configuration, followed by a header row.
std::string grid_to_csv(const GridResult& grid, const Json& config);
Json grid_to_json(const GridResult& grid, const Json& config);
std::string nrsfm_to_csv(const std::vector<NrsfmCurve>& curves, const Json& config);
Json nrsfm_to_json(const std::vector<NrsfmCurve>& curves, const Json& config);

/// Writes atomically; I/O failures raise IoError naming the path.
void emit_results(const GridResult& grid, const std::filesystem::path& path, OutputFormat format,
                  const Json& config);
void emit_results(const std::vector<NrsfmCurve>& curves, const std::filesystem::path& path, OutputFormat format,
                  const Json& config);

}  // namespace rmu
