#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace rmu {

/// Regularizer families understood by the solver.
///
/// RMu is the non-convex relaxation sum_i (mu - max(sqrt(mu) - |x_i|, 0)^2),
/// applied to entries (vectors) or singular values (matrices). L1 and Nuclear
/// are the convex baselines with weight mu' = 2 sqrt(mu), so that their
/// proximal operators soft-threshold at sqrt(mu). Card and Rank are the
/// original discontinuous penalties mu * card(x) and mu * rank(X). None is
/// plain least squares.
enum class RegKind { RMu, L1, Nuclear, Card, Rank, None };

std::string_view to_string(RegKind kind);
RegKind reg_kind_from_string(std::string_view name);

/// True for kinds that act on singular values (and therefore need a matrix
/// shaped unknown).
bool is_spectral(RegKind kind);
/// True for kinds that act entry-wise on a vector unknown.
bool is_entrywise(RegKind kind);

struct RegParams {
  RegKind kind = RegKind::RMu;
  double mu = 1.0;

  /// Validates mu > 0 (mu is ignored for None).
  static RegParams make(RegKind kind, double mu);

  /// Threshold level shared by every kind: sqrt(mu).
  double threshold() const;
  /// Weight of the convex baselines, 2 sqrt(mu).
  double mu_prime() const;
};

/// The sub-differential of g(x) = r_mu(x) + x^2 as a closed interval.
struct ScalarSubgradient {
  double lower;
  double upper;

  bool contains(double v, double tol = 0.0) const {
    return v >= lower - tol && v <= upper + tol;
  }
  bool is_singleton() const { return lower == upper; }
};

double eval_r_mu(double x, double mu);
double eval_r_mu(const Eigen::Ref<const Eigen::VectorXd>& x, double mu);

/// g(x) = mu + x^2 for |x| >= sqrt(mu), 2 sqrt(mu) |x| otherwise.
double eval_g(double x, double mu);
ScalarSubgradient subgrad_g(double x, double mu);

/// Objective minimized by the scalar r_mu prox:
/// -max(sqrt(mu) - |x|, 0)^2 + tau (x - m)^2.
double prox_r_mu_objective(double x, double m, double tau, double mu);

/// Global minimizer of prox_r_mu_objective over x, tau >= 1.
///
/// Candidates are m, (tau m + sqrt(mu)) / (tau - 1), (tau m - sqrt(mu)) /
/// (tau - 1) and 0; each is kept only inside the branch that produced it.
/// Exact ties go to the candidate of smaller magnitude, so |m| == sqrt(mu)
/// with tau == 1 returns 0.
double prox_r_mu_scalar(double m, double tau, double mu);
Eigen::VectorXd prox_r_mu_vector(const Eigen::Ref<const Eigen::VectorXd>& m, double tau, double mu);
// The spectral proxes optionally report the singular values of their output
// (unsorted).
Eigen::MatrixXd prox_r_mu_spectral(const Eigen::Ref<const Eigen::MatrixXd>& m, double tau, double mu,
                                   Eigen::VectorXd* out_singular_values = nullptr);

/// sign(m_i) max(|m_i| - level, 0).
Eigen::VectorXd prox_soft_threshold(const Eigen::Ref<const Eigen::VectorXd>& m, double level);
/// Soft-thresholds singular values at level.
Eigen::MatrixXd prox_soft_threshold_spectral(const Eigen::Ref<const Eigen::MatrixXd>& m, double level,
                                             Eigen::VectorXd* out_singular_values = nullptr);

/// Keeps entries with |m_i| > level, zeroes the rest.
Eigen::VectorXd prox_hard_threshold(const Eigen::Ref<const Eigen::VectorXd>& m, double level);
Eigen::MatrixXd prox_hard_threshold_spectral(const Eigen::Ref<const Eigen::MatrixXd>& m, double level,
                                             Eigen::VectorXd* out_singular_values = nullptr);

/// Singular values, non-negative and sorted non-increasing.
Eigen::VectorXd singular_values(const Eigen::Ref<const Eigen::MatrixXd>& m);

// Numerical support measures shared by the solver, certificate and
// experiment drivers.
inline constexpr double kCardinalityTolerance = 1e-8;
inline constexpr double kRelativeRankTolerance = 1e-6;

/// Number of entries with |x_i| > kCardinalityTolerance.
int cardinality(const Eigen::Ref<const Eigen::VectorXd>& x);
/// Number of singular values above kRelativeRankTolerance * sigma_max.
int numerical_rank(const Eigen::Ref<const Eigen::MatrixXd>& x);

/// Regularizer value of x. Entry-wise kinds read x as a flat vector,
/// spectral kinds as a matrix. RMu is entry-wise when `spectral` is false.
double reg_value(const RegParams& reg, const Eigen::Ref<const Eigen::MatrixXd>& x, bool spectral);
/// Spectral regularizer value from the singular values of x, in any order.
double reg_value_from_spectrum(const RegParams& reg, const Eigen::Ref<const Eigen::VectorXd>& s);

}  // namespace rmu
