#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rmu/instance.hpp"
#include "rmu/regularizers.hpp"

namespace rmu {

struct SolverConfig {
  double tau0 = 5.0;
  int max_iters = 5000;
  /// Failure-rule applications allowed within one outer iteration.
  int max_backtracks = 60;
  /// Stop once an accepted step decreases the objective by at most
  /// tol_obj * |objective|. Near a minimizer the decrease is quadratic in
  /// the distance to it, so this bounds that distance by ~sqrt(tol_obj).
  double tol_obj = 1e-14;
  /// Stop once tau * |x_{k+1} - x_k| <= tol_step.
  double tol_step = 1e-9;
  /// A step is accepted iff it decreases the objective by more than
  /// decrease_eps * |objective|.
  double decrease_eps = 1e-15;
  bool record_history = true;

  void validate() const;
};

enum class SolveStatus { Running, ConvergedObjTol, ConvergedStepTol, MaxIters, Stalled };

std::string_view to_string(SolveStatus s);
bool converged(SolveStatus s);

struct TraceEntry {
  int iteration;
  double objective;  // objective of the trial point
  double tau;        // tau used to produce it
  double step_norm;  // |x_trial - x_k|
  bool accepted;
};

struct SolveResult {
  Eigen::MatrixXd solution;
  double objective = 0.0;
  double residual = 0.0;   // |op x - b|
  double reg_value = 0.0;
  double penalty_value = 0.0;  // |penalty x|^2, zero without a penalty
  int support = 0;         // cardinality or numerical rank
  int iterations = 0;      // outer iterations
  int accepted_steps = 0;
  double tau = 0.0;        // tau at termination
  SolveStatus status = SolveStatus::Running;
  std::vector<TraceEntry> history;
};

/// Whether the regularizer acts on singular values for this instance.
bool uses_spectral_prox(const Instance& inst, const RegParams& reg);

/// Checks that the regularizer kind fits the instance flavor (L1/Card need
/// vector instances, Nuclear/Rank matrix instances).
void check_compatible(const Instance& inst, const RegParams& reg);

/// reg(x) + |op x - b|^2 + |penalty x|^2.
double objective(const Eigen::MatrixXd& x, const Instance& inst, const RegParams& reg);

/// op^*(op x - b) + penalty^* penalty x, half the gradient of the smooth part.
Eigen::MatrixXd half_gradient(const Eigen::MatrixXd& x, const Instance& inst);

/// One proximal-linearization step from x with weight tau: forms
/// m = x - (1/tau) half_gradient(x) and returns the minimizer of
/// reg(y) + tau |y - m|^2 (hard thresholds use the tau = 1 level sqrt(mu)).
Eigen::MatrixXd gist_step(const Eigen::MatrixXd& x, double tau, const Instance& inst, const RegParams& reg);

/// success: (tau - 1) / 1.1 + 1, failure: 1.5 (tau - 1) + 1.
double tau_update(double tau, bool success);

Eigen::MatrixXd zero_start(const Instance& inst);

SolveResult solve(const Instance& inst, const RegParams& reg, const SolverConfig& config = {},
                  const std::optional<Eigen::MatrixXd>& x0 = std::nullopt);

/// Stationary points of r_mu(x) + (a x - b)^2. Intervals are closed and
/// sorted; isolated points have lower == upper. Plateaus appear only in the
/// degenerate cases a == 0 and a^2 == 1 with |a b| == sqrt(mu).
struct StationaryInterval {
  double lower;
  double upper;
  bool is_point() const { return lower == upper; }
};

std::vector<StationaryInterval> enumerate_stationary_1d(double a, double b, double mu);

}  // namespace rmu
