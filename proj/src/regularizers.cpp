#include "rmu/regularizers.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace rmu {

namespace {

void require_positive_mu(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("regularization strength mu must be positive, got " + std::to_string(mu));
  }
}

void require_tau(double tau) {
  if (!(tau >= 1.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("prox weight tau must be >= 1, got " + std::to_string(tau));
  }
}

void require_level(double level) {
  if (!(level > 0.0) || !std::isfinite(level)) {
    throw std::invalid_argument("threshold level must be positive, got " + std::to_string(level));
  }
}

// BDCSVD occasionally returns non-finite factors when many singular values
// are tiny but non-zero; JacobiSVD is the fallback.
bool bdc_usable(const Eigen::BDCSVD<Eigen::MatrixXd>& svd) {
  return svd.info() == Eigen::Success && svd.singularValues().allFinite() &&
         (!svd.computeU() || svd.matrixU().allFinite()) && (!svd.computeV() || svd.matrixV().allFinite());
}

// Applies a scalar map to the singular values of m and recomposes.
template <class Fn>
Eigen::MatrixXd spectral_map(const Eigen::Ref<const Eigen::MatrixXd>& m, Eigen::VectorXd* out, Fn&& fn) {
  if (m.size() == 0) {
    if (out) out->resize(0);
    return m;
  }
  auto apply = [&](const auto& svd) -> Eigen::MatrixXd {
    Eigen::VectorXd s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = fn(s[i]);
    if (out) *out = s;
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  };
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (bdc_usable(svd)) return apply(svd);
  return apply(Eigen::JacobiSVD<Eigen::MatrixXd>(m, Eigen::ComputeThinU | Eigen::ComputeThinV));
}

}  // namespace

std::string_view to_string(RegKind kind) {
  switch (kind) {
    case RegKind::RMu: return "rmu";
    case RegKind::L1: return "l1";
    case RegKind::Nuclear: return "nuclear";
    case RegKind::Card: return "card";
    case RegKind::Rank: return "rank";
    case RegKind::None: return "none";
  }
  return "unknown";
}

RegKind reg_kind_from_string(std::string_view name) {
  for (RegKind k : {RegKind::RMu, RegKind::L1, RegKind::Nuclear, RegKind::Card, RegKind::Rank, RegKind::None}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown regularizer '" + std::string(name) + "'");
}

bool is_spectral(RegKind kind) { return kind == RegKind::Nuclear || kind == RegKind::Rank; }
bool is_entrywise(RegKind kind) { return kind == RegKind::L1 || kind == RegKind::Card; }

RegParams RegParams::make(RegKind kind, double mu) {
  if (kind != RegKind::None) require_positive_mu(mu);
  return RegParams{kind, kind == RegKind::None ? 0.0 : mu};
}

double RegParams::threshold() const { return std::sqrt(mu); }
double RegParams::mu_prime() const { return 2.0 * std::sqrt(mu); }

double eval_r_mu(double x, double mu) {
  require_positive_mu(mu);
  const double s = std::sqrt(mu);
  const double a = std::abs(x);
  // Equal to mu - (s - a)^2 below the threshold; exact 0 at x = 0.
  return a >= s ? mu : a * (2.0 * s - a);
}

double eval_r_mu(const Eigen::Ref<const Eigen::VectorXd>& x, double mu) {
  require_positive_mu(mu);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += eval_r_mu(x[i], mu);
  return total;
}

double eval_g(double x, double mu) {
  require_positive_mu(mu);
  const double s = std::sqrt(mu);
  const double a = std::abs(x);
  return a >= s ? mu + x * x : 2.0 * s * a;
}

ScalarSubgradient subgrad_g(double x, double mu) {
  require_positive_mu(mu);
  const double s = std::sqrt(mu);
  if (x == 0.0) return {-2.0 * s, 2.0 * s};
  if (std::abs(x) >= s) return {2.0 * x, 2.0 * x};
  const double v = x > 0.0 ? 2.0 * s : -2.0 * s;
  return {v, v};
}

double prox_r_mu_objective(double x, double m, double tau, double mu) {
  const double gap = std::max(std::sqrt(mu) - std::abs(x), 0.0);
  const double d = x - m;
  return -gap * gap + tau * d * d;
}

double prox_r_mu_scalar(double m, double tau, double mu) {
  require_tau(tau);
  require_positive_mu(mu);
  const double s = std::sqrt(mu);

  std::array<double, 4> candidates{};
  std::size_t count = 0;
  candidates[count++] = 0.0;
  if (std::abs(m) >= s) candidates[count++] = m;
  if (tau > 1.0) {
    // Interior branches |x| <= sqrt(mu): positive side solves
    // (tau - 1) x = tau m - sqrt(mu), negative side (tau - 1) x = tau m + sqrt(mu).
    const double pos = (tau * m - s) / (tau - 1.0);
    if (pos > 0.0 && pos <= s) candidates[count++] = pos;
    const double neg = (tau * m + s) / (tau - 1.0);
    if (neg < 0.0 && neg >= -s) candidates[count++] = neg;
  }

  double best = candidates[0];
  double best_val = prox_r_mu_objective(best, m, tau, mu);
  for (std::size_t i = 1; i < count; ++i) {
    const double c = candidates[i];
    const double v = prox_r_mu_objective(c, m, tau, mu);
    if (v < best_val || (v == best_val && std::abs(c) < std::abs(best))) {
      best = c;
      best_val = v;
    }
  }
  return best;
}

Eigen::VectorXd prox_r_mu_vector(const Eigen::Ref<const Eigen::VectorXd>& m, double tau, double mu) {
  require_tau(tau);
  require_positive_mu(mu);
  Eigen::VectorXd out(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) out[i] = prox_r_mu_scalar(m[i], tau, mu);
  return out;
}

Eigen::MatrixXd prox_r_mu_spectral(const Eigen::Ref<const Eigen::MatrixXd>& m, double tau, double mu,
                                   Eigen::VectorXd* out_singular_values) {
  require_tau(tau);
  require_positive_mu(mu);
  // For sigma >= 0 the negative-side candidate is never valid, so the scalar
  // prox already reduces to the three spectral candidates.
  return spectral_map(m, out_singular_values, [&](double sigma) { return prox_r_mu_scalar(sigma, tau, mu); });
}

Eigen::VectorXd prox_soft_threshold(const Eigen::Ref<const Eigen::VectorXd>& m, double level) {
  require_level(level);
  Eigen::VectorXd out(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double a = std::abs(m[i]) - level;
    out[i] = a > 0.0 ? std::copysign(a, m[i]) : 0.0;
  }
  return out;
}

Eigen::MatrixXd prox_soft_threshold_spectral(const Eigen::Ref<const Eigen::MatrixXd>& m, double level,
                                             Eigen::VectorXd* out_singular_values) {
  require_level(level);
  return spectral_map(m, out_singular_values, [&](double sigma) { return std::max(sigma - level, 0.0); });
}

Eigen::VectorXd prox_hard_threshold(const Eigen::Ref<const Eigen::VectorXd>& m, double level) {
  require_level(level);
  Eigen::VectorXd out(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) out[i] = std::abs(m[i]) > level ? m[i] : 0.0;
  return out;
}

Eigen::MatrixXd prox_hard_threshold_spectral(const Eigen::Ref<const Eigen::MatrixXd>& m, double level,
                                             Eigen::VectorXd* out_singular_values) {
  require_level(level);
  return spectral_map(m, out_singular_values, [&](double sigma) { return sigma > level ? sigma : 0.0; });
}

Eigen::VectorXd singular_values(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  if (bdc_usable(svd)) return svd.singularValues();
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
}

int cardinality(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return static_cast<int>((x.array().abs() > kCardinalityTolerance).count());
}

int numerical_rank(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::VectorXd s = singular_values(x);
  if (s.size() == 0 || s[0] == 0.0) return 0;
  return static_cast<int>((s.array() > kRelativeRankTolerance * s[0]).count());
}

double reg_value(const RegParams& reg, const Eigen::Ref<const Eigen::MatrixXd>& x, bool spectral) {
  const Eigen::VectorXd flat = x.reshaped();
  switch (reg.kind) {
    case RegKind::None:
      return 0.0;
    case RegKind::L1:
      return reg.mu_prime() * flat.lpNorm<1>();
    case RegKind::Card:
      return reg.mu * cardinality(flat);
    case RegKind::Nuclear:
    case RegKind::Rank:
      return reg_value_from_spectrum(reg, singular_values(x));
    case RegKind::RMu:
      return spectral ? reg_value_from_spectrum(reg, singular_values(x)) : eval_r_mu(flat, reg.mu);
  }
  return 0.0;
}

double reg_value_from_spectrum(const RegParams& reg, const Eigen::Ref<const Eigen::VectorXd>& s) {
  switch (reg.kind) {
    case RegKind::None:
      return 0.0;
    case RegKind::Nuclear:
      return reg.mu_prime() * s.sum();
    case RegKind::Rank: {
      if (s.size() == 0) return 0.0;
      const double top = s.maxCoeff();
      if (top == 0.0) return 0.0;
      return reg.mu * static_cast<double>((s.array() > kRelativeRankTolerance * top).count());
    }
    case RegKind::RMu:
      return eval_r_mu(s, reg.mu);
    case RegKind::L1:
    case RegKind::Card:
      break;
  }
  throw std::invalid_argument("reg_value_from_spectrum: '" + std::string(to_string(reg.kind)) + "' is entry-wise");
}

}  // namespace rmu
