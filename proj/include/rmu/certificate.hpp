#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rmu/instance.hpp"

namespace rmu {

/// Where the RIP constant used by a certificate came from.
enum class DeltaSource { Instance, User };
std::string_view to_string(DeltaSource s);

/// Raised when the point handed to the certificate is not stationary. The
/// interval test is never evaluated in that case.
class CertificateRefused : public std::runtime_error {
 public:
  CertificateRefused(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Raised when no RIP constant is available for the instance.
class MissingDelta : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CertificateReport {
  Flavor flavor = Flavor::Vector;
  /// |z_i| for vectors, sigma_i(Z) for matrices.
  Eigen::VectorXd z_values;
  double mu = 0.0;
  double delta = 0.0;
  DeltaSource delta_source = DeltaSource::User;
  /// Closed forbidden interval [(1 - delta) sqrt(mu), sqrt(mu) / (1 - delta)].
  double interval_lower = 0.0;
  double interval_upper = 0.0;
  /// Signed distance of the closest z-value to the interval; negative when
  /// some value lies inside it.
  double margin = 0.0;
  /// Extra distance demanded from the interval (>= 0).
  double required_margin = 0.0;
  /// Per-value outcome, aligned with z_values.
  std::vector<bool> value_passed;
  bool passed = false;
  /// Fixed-point residual of the stationarity test.
  double stationarity_residual = 0.0;
  /// c (resp. r): every other stationary point x' has card(x' - x_s) > c
  /// (resp. rank(X' - X_s) > r) when the certificate passes.
  int separation = 0;
  /// card(x_s) or rank(X_s).
  int support = 0;
  /// passed and support < separation / 2: x_s is then the sparsest (lowest
  /// rank) stationary point.
  bool sparsest_implication = false;
};

/// Tolerance of the stationarity gate.
inline constexpr double kStationarityTolerance = 1e-6;

/// z = (I - A^T A) x_s + A^T b, or Z = (I - A^* A) X_s + A^* b.
Eigen::MatrixXd compute_z(const Eigen::MatrixXd& x_s, const Instance& inst);

/// Distance from x_s to argmin_x r_mu(x) + |x - z|^2 (entries for vectors,
/// singular values for matrices). Zero exactly at stationary points.
double stationarity_residual(const Eigen::MatrixXd& x_s, const Eigen::MatrixXd& z, double mu, Flavor flavor);

/// Picks delta from the instance (exact, by construction) or from the user.
/// Both present and different is rejected; neither present throws
/// MissingDelta.
std::pair<double, DeltaSource> resolve_delta(const Instance& inst, std::optional<double> user_delta);

/// Runs the interval-exclusion test on a stationary point.
///
/// Throws CertificateRefused when the stationarity residual exceeds
/// kStationarityTolerance, and std::invalid_argument for instances carrying a
/// penalty term (the test only covers r_mu + |A x - b|^2).
CertificateReport check_certificate(const Eigen::MatrixXd& x_s, const Instance& inst, double mu, double delta,
                                    int separation, double required_margin = 0.0,
                                    DeltaSource source = DeltaSource::User);

/// Fraction of passed reports. Throws on an empty list.
double verified_fraction(const std::vector<CertificateReport>& reports);
double verified_fraction(const std::vector<bool>& passed);

}  // namespace rmu
