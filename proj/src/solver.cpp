#include "rmu/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rmu {

namespace {

void require_shape(const Eigen::MatrixXd& x, const Instance& inst, const char* what) {
  const Shape s = inst.shape();
  if (x.rows() != s.rows || x.cols() != s.cols) {
    throw std::invalid_argument(std::string(what) + ": iterate is " + std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()) + ", instance expects " + std::to_string(s.rows) + "x" +
                                std::to_string(s.cols));
  }
}

double squared_residual(const Eigen::MatrixXd& x, const Instance& inst) {
  return (inst.op->apply_matrix(x) - inst.b).squaredNorm();
}

double penalty_term(const Eigen::MatrixXd& x, const Instance& inst) {
  return inst.penalty ? inst.penalty->apply_matrix(x).squaredNorm() : 0.0;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tau0 >= 1.0)) throw std::invalid_argument("tau0 must be >= 1");
  if (max_iters < 1 || max_backtracks < 1) throw std::invalid_argument("iteration budgets must be positive");
  if (!(tol_obj > 0.0) || !(tol_step > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (!(decrease_eps >= 0.0)) throw std::invalid_argument("decrease_eps must be >= 0");
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Running: return "running";
    case SolveStatus::ConvergedObjTol: return "converged_obj_tol";
    case SolveStatus::ConvergedStepTol: return "converged_step_tol";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::Stalled: return "stalled";
  }
  return "unknown";
}

bool converged(SolveStatus s) { return s == SolveStatus::ConvergedObjTol || s == SolveStatus::ConvergedStepTol; }

bool uses_spectral_prox(const Instance& inst, const RegParams& reg) {
  return inst.flavor() == Flavor::Matrix && (reg.kind == RegKind::RMu || is_spectral(reg.kind));
}

void check_compatible(const Instance& inst, const RegParams& reg) {
  if (is_spectral(reg.kind) && inst.flavor() != Flavor::Matrix) {
    throw std::invalid_argument("regularizer '" + std::string(to_string(reg.kind)) + "' needs a matrix instance");
  }
  if (is_entrywise(reg.kind) && inst.flavor() != Flavor::Vector) {
    throw std::invalid_argument("regularizer '" + std::string(to_string(reg.kind)) + "' needs a vector instance");
  }
}

double objective(const Eigen::MatrixXd& x, const Instance& inst, const RegParams& reg) {
  require_shape(x, inst, "objective");
  return reg_value(reg, x, uses_spectral_prox(inst, reg)) + squared_residual(x, inst) + penalty_term(x, inst);
}

Eigen::MatrixXd half_gradient(const Eigen::MatrixXd& x, const Instance& inst) {
  require_shape(x, inst, "half_gradient");
  const Eigen::VectorXd flat = x.reshaped();
  Eigen::VectorXd g = inst.op->adjoint(inst.op->apply(flat) - inst.b);
  if (inst.penalty) g += inst.penalty->adjoint(inst.penalty->apply(flat));
  return g.reshaped(x.rows(), x.cols());
}

namespace {

// One proximal step. When `reg_out` is given it receives the regularizer
// value of the result, read off the prox's own spectrum for spectral kinds.
Eigen::MatrixXd prox_step(const Eigen::MatrixXd& x, double tau, const Instance& inst, const RegParams& reg,
                          double* reg_out) {
  if (!(tau >= 1.0)) throw std::invalid_argument("gist_step: tau must be >= 1");
  const Eigen::MatrixXd m = x - half_gradient(x, inst) / tau;
  const bool spectral = uses_spectral_prox(inst, reg);
  Eigen::VectorXd sv;
  Eigen::VectorXd* sv_out = reg_out ? &sv : nullptr;

  Eigen::MatrixXd out;
  switch (reg.kind) {
    case RegKind::None:
      out = m;
      break;
    case RegKind::RMu:
      if (spectral) {
        out = prox_r_mu_spectral(m, tau, reg.mu, sv_out);
      } else {
        out = prox_r_mu_vector(m.reshaped(), tau, reg.mu).reshaped(m.rows(), m.cols());
      }
      break;
    case RegKind::L1:
      // argmin mu' |y|_1 + tau |y - m|^2 soft-thresholds at mu' / (2 tau).
      out = prox_soft_threshold(m.reshaped(), reg.threshold() / tau).reshaped(m.rows(), m.cols());
      break;
    case RegKind::Nuclear:
      out = prox_soft_threshold_spectral(m, reg.threshold() / tau, sv_out);
      break;
    case RegKind::Card:
      out = prox_hard_threshold(m.reshaped(), reg.threshold()).reshaped(m.rows(), m.cols());
      break;
    case RegKind::Rank:
      out = prox_hard_threshold_spectral(m, reg.threshold(), sv_out);
      break;
  }
  if (reg_out) *reg_out = spectral ? reg_value_from_spectrum(reg, sv) : reg_value(reg, out, false);
  return out;
}

}  // namespace

Eigen::MatrixXd gist_step(const Eigen::MatrixXd& x, double tau, const Instance& inst, const RegParams& reg) {
  return prox_step(x, tau, inst, reg, nullptr);
}

double tau_update(double tau, bool success) {
  const double next = success ? (tau - 1.0) / 1.1 + 1.0 : 1.5 * (tau - 1.0) + 1.0;
  return std::max(next, 1.0);
}

Eigen::MatrixXd zero_start(const Instance& inst) {
  const Shape s = inst.shape();
  return Eigen::MatrixXd::Zero(s.rows, s.cols);
}

SolveResult solve(const Instance& inst, const RegParams& reg, const SolverConfig& config,
                  const std::optional<Eigen::MatrixXd>& x0) {
  config.validate();
  inst.validate();
  check_compatible(inst, reg);

  Eigen::MatrixXd x = x0 ? *x0 : zero_start(inst);
  require_shape(x, inst, "solve");

  double obj = objective(x, inst, reg);
  if (!std::isfinite(obj)) throw std::runtime_error("solve: objective at the starting point is not finite");

  SolveResult result;
  double tau = config.tau0;
  SolveStatus status = SolveStatus::Running;
  int iter = 0;

  for (; iter < config.max_iters && status == SolveStatus::Running; ++iter) {
    int failures = 0;
    while (true) {
      double cand_reg = 0.0;
      const Eigen::MatrixXd candidate = prox_step(x, tau, inst, reg, &cand_reg);
      if (!candidate.allFinite()) {
        throw std::runtime_error("solve: non-finite iterate at iteration " + std::to_string(iter));
      }
      const double step = (candidate - x).norm();
      if (tau * step <= config.tol_step) {
        status = SolveStatus::ConvergedStepTol;
        break;
      }
      const double cand_obj = cand_reg + squared_residual(candidate, inst) + penalty_term(candidate, inst);
      if (!std::isfinite(cand_obj)) {
        throw std::runtime_error("solve: non-finite objective at iteration " + std::to_string(iter));
      }
      const bool accepted = cand_obj < obj - config.decrease_eps * std::abs(obj);
      if (config.record_history) result.history.push_back({iter, cand_obj, tau, step, accepted});

      if (accepted) {
        const double decrease = obj - cand_obj;
        const double previous = obj;
        x = candidate;
        obj = cand_obj;
        ++result.accepted_steps;
        tau = tau_update(tau, true);
        if (decrease <= config.tol_obj * std::abs(previous)) status = SolveStatus::ConvergedObjTol;
        break;
      }
      tau = tau_update(tau, false);
      if (++failures >= config.max_backtracks) {
        status = SolveStatus::Stalled;
        break;
      }
    }
  }
  if (status == SolveStatus::Running) status = SolveStatus::MaxIters;

  const bool spectral = uses_spectral_prox(inst, reg);
  result.solution = x;
  result.objective = obj;
  result.residual = std::sqrt(squared_residual(x, inst));
  result.reg_value = reg_value(reg, x, spectral);
  result.penalty_value = penalty_term(x, inst);
  result.support = inst.flavor() == Flavor::Matrix ? numerical_rank(x) : cardinality(x.reshaped());
  result.iterations = iter;
  result.tau = tau;
  result.status = status;
  return result;
}

// ---------------------------------------------------------------------------

std::vector<StationaryInterval> enumerate_stationary_1d(double a, double b, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("enumerate_stationary_1d: mu must be positive");
  if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("enumerate_stationary_1d: non-finite input");

  // Stationarity: 2 z in dg(x) with z = (1 - a^2) x + a b.
  const double s = std::sqrt(mu);
  const double ab = a * b;
  const double a2 = a * a;
  const double tol = 1e-12 * std::max({1.0, s, std::abs(ab)});
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<StationaryInterval> found;

  // x = 0: 2ab in [-2 sqrt(mu), 2 sqrt(mu)].
  if (std::abs(ab) <= s + tol) found.push_back({0.0, 0.0});

  // |x| >= sqrt(mu): z = x, i.e. a^2 x = a b.
  if (a == 0.0) {
    found.push_back({-inf, -s});
    found.push_back({s, inf});
  } else {
    const double x = b / a;
    if (std::abs(x) >= s - tol) found.push_back({x, x});
  }

  // 0 < |x| < sqrt(mu): z = sqrt(mu) sign(x).
  for (double sign : {1.0, -1.0}) {
    const double rhs = sign * s - ab;
    if (std::abs(1.0 - a2) <= tol) {
      if (std::abs(rhs) <= tol) {
        found.push_back(sign > 0.0 ? StationaryInterval{0.0, s} : StationaryInterval{-s, 0.0});
      }
      continue;
    }
    const double x = rhs / (1.0 - a2);
    if (sign * x > tol && std::abs(x) < s - tol) found.push_back({x, x});
  }

  std::sort(found.begin(), found.end(), [](const auto& l, const auto& r) {
    return l.lower < r.lower || (l.lower == r.lower && l.upper < r.upper);
  });
  std::vector<StationaryInterval> merged;
  for (const auto& iv : found) {
    if (!merged.empty() && iv.lower <= merged.back().upper + tol) {
      merged.back().upper = std::max(merged.back().upper, iv.upper);
      // Two floating-point renderings of the same point collapse to one.
      if (merged.back().upper - merged.back().lower <= tol) merged.back().upper = merged.back().lower;
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

}  // namespace rmu
