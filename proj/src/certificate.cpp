#include "rmu/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rmu/regularizers.hpp"

namespace rmu {

std::string_view to_string(DeltaSource s) { return s == DeltaSource::Instance ? "instance" : "user"; }

Eigen::MatrixXd compute_z(const Eigen::MatrixXd& x_s, const Instance& inst) {
  inst.validate();
  const Shape s = inst.shape();
  if (x_s.rows() != s.rows || x_s.cols() != s.cols) throw std::invalid_argument("compute_z: shape mismatch");
  const Eigen::VectorXd flat = x_s.reshaped();
  const Eigen::VectorXd z = flat - inst.op->adjoint(inst.op->apply(flat) - inst.b);
  return z.reshaped(s.rows, s.cols);
}

double stationarity_residual(const Eigen::MatrixXd& x_s, const Eigen::MatrixXd& z, double mu, Flavor flavor) {
  if (flavor == Flavor::Matrix) return (x_s - prox_r_mu_spectral(z, 1.0, mu)).norm();

  // The argmin set per entry is {z_i} above the threshold, {0} below it and
  // the segment [0, z_i] exactly at it.
  const double s = std::sqrt(mu);
  double sq = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z(i);
    const double xi = x_s(i);
    double d;
    if (std::abs(zi) > s) {
      d = xi - zi;
    } else if (std::abs(zi) < s) {
      d = xi;
    } else {
      const double lo = std::min(0.0, zi);
      const double hi = std::max(0.0, zi);
      d = xi < lo ? lo - xi : (xi > hi ? xi - hi : 0.0);
    }
    sq += d * d;
  }
  return std::sqrt(sq);
}

std::pair<double, DeltaSource> resolve_delta(const Instance& inst, std::optional<double> user_delta) {
  if (inst.delta && user_delta && *inst.delta != *user_delta) {
    throw std::invalid_argument("delta " + std::to_string(*user_delta) + " conflicts with the instance's exact delta " +
                                std::to_string(*inst.delta));
  }
  if (inst.delta) return {*inst.delta, DeltaSource::Instance};
  if (user_delta) return {*user_delta, DeltaSource::User};
  throw MissingDelta("no RIP constant: the instance does not record delta and none was supplied");
}

CertificateReport check_certificate(const Eigen::MatrixXd& x_s, const Instance& inst, double mu, double delta,
                                    int separation, double required_margin, DeltaSource source) {
  if (!(mu > 0.0)) throw std::invalid_argument("check_certificate: mu must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("check_certificate: delta must lie in (0, 1)");
  if (separation < 1) throw std::invalid_argument("check_certificate: separation order must be positive");
  if (!(required_margin >= 0.0)) throw std::invalid_argument("check_certificate: margin must be >= 0");
  if (inst.penalty) throw std::invalid_argument("check_certificate: instances with a penalty term are not covered");

  const Eigen::MatrixXd z = compute_z(x_s, inst);
  const double residual = stationarity_residual(x_s, z, mu, inst.flavor());
  if (!(residual <= kStationarityTolerance)) {
    throw CertificateRefused("point is not stationary (fixed-point residual " + std::to_string(residual) + ")",
                             residual);
  }

  CertificateReport rep;
  rep.flavor = inst.flavor();
  rep.mu = mu;
  rep.delta = delta;
  rep.delta_source = source;
  rep.required_margin = required_margin;
  rep.stationarity_residual = residual;
  rep.separation = separation;

  const double s = std::sqrt(mu);
  rep.interval_lower = (1.0 - delta) * s;
  rep.interval_upper = s / (1.0 - delta);

  if (inst.flavor() == Flavor::Matrix) {
    rep.z_values = singular_values(z);
    rep.support = numerical_rank(x_s);
  } else {
    rep.z_values = z.reshaped().cwiseAbs();
    rep.support = cardinality(x_s.reshaped());
  }

  rep.margin = std::numeric_limits<double>::infinity();
  rep.value_passed.resize(static_cast<std::size_t>(rep.z_values.size()));
  bool all = true;
  for (Eigen::Index i = 0; i < rep.z_values.size(); ++i) {
    const double v = rep.z_values[i];
    // Positive outside the closed interval, <= 0 inside it.
    const double dist = v < rep.interval_lower   ? rep.interval_lower - v
                        : v > rep.interval_upper ? v - rep.interval_upper
                                                 : -std::min(v - rep.interval_lower, rep.interval_upper - v);
    const bool ok = dist > required_margin;
    rep.value_passed[static_cast<std::size_t>(i)] = ok;
    all = all && ok;
    rep.margin = std::min(rep.margin, dist);
  }
  rep.passed = all;
  rep.sparsest_implication = rep.passed && 2 * rep.support < separation;
  return rep;
}

double verified_fraction(const std::vector<bool>& passed) {
  if (passed.empty()) throw std::invalid_argument("verified_fraction: no reports");
  const auto n = std::count(passed.begin(), passed.end(), true);
  return static_cast<double>(n) / static_cast<double>(passed.size());
}

double verified_fraction(const std::vector<CertificateReport>& reports) {
  std::vector<bool> passed;
  passed.reserve(reports.size());
  for (const auto& r : reports) passed.push_back(r.passed);
  return verified_fraction(passed);
}

}  // namespace rmu
