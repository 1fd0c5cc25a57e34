#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rmu/certificate.hpp"
#include "rmu/solver.hpp"

using namespace rmu;

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

}  // namespace

TEST(ComputeZ, Examples) {
  const Instance one_d = make_scalar_instance(kInvSqrt2, 1.3);
  EXPECT_NEAR(compute_z(scalar(0.0), one_d)(0, 0), 1.3 * kInvSqrt2, 1e-15);

  Instance ident;
  ident.op = std::make_shared<DenseOperator>(Eigen::MatrixXd::Identity(4, 4));
  ident.b = Eigen::Vector4d(1.0, -2.0, 0.0, 5.0);
  EXPECT_EQ(compute_z(Eigen::Vector4d(9.0, 9.0, -1.0, 0.5), ident), Eigen::MatrixXd(ident.b));

  OperatorSpec spec;
  const Instance lr = make_lowrank_instance(6, 6, 2, 0.0, make_matrix_operator(spec, 6, 6, 3), 4);
  EXPECT_LE((compute_z(*lr.ground_truth, lr) - *lr.ground_truth).norm(), 1e-12);

  EXPECT_THROW(compute_z(Eigen::MatrixXd::Zero(2, 1), one_d), std::invalid_argument);
}

TEST(CheckCertificate, OneDimensionalCases) {
  const double mu = 1.0, delta = 0.5;

  const auto below = check_certificate(scalar(0.0), make_scalar_instance(kInvSqrt2, 0.5), mu, delta, 1);
  EXPECT_NEAR(below.z_values[0], 0.5 * kInvSqrt2, 1e-15);
  EXPECT_DOUBLE_EQ(below.interval_lower, 0.5);
  EXPECT_DOUBLE_EQ(below.interval_upper, 2.0);
  EXPECT_TRUE(below.passed);

  const auto inside = check_certificate(scalar(0.0), make_scalar_instance(kInvSqrt2, 1.0), mu, delta, 1);
  EXPECT_NEAR(inside.z_values[0], kInvSqrt2, 1e-15);
  EXPECT_FALSE(inside.passed);
  EXPECT_LT(inside.margin, 0.0);

  const double b = 1.5;
  const auto above =
      check_certificate(scalar(std::sqrt(2.0) * b), make_scalar_instance(kInvSqrt2, b), mu, delta, 1);
  EXPECT_NEAR(above.z_values[0], std::sqrt(2.0) * b, 1e-12);
  EXPECT_TRUE(above.passed);
  EXPECT_NEAR(above.margin, std::sqrt(2.0) * b - 2.0, 1e-12);
}

TEST(CheckCertificate, ClosedIntervalEndpointsFail) {
  // z = b / sqrt(2) equal to the lower endpoint 0.5.
  Instance inst;
  inst.op = std::make_shared<DenseOperator>(Eigen::MatrixXd::Constant(1, 1, 0.5));
  inst.b = Eigen::VectorXd::Constant(1, 1.0);
  const auto rep = check_certificate(scalar(0.0), inst, 1.0, 0.5, 1);
  EXPECT_EQ(rep.z_values[0], 0.5);
  EXPECT_FALSE(rep.passed);
}

TEST(CheckCertificate, MarginPolicy) {
  const Instance inst = make_scalar_instance(kInvSqrt2, 0.5);
  const double dist = 0.5 - 0.5 * kInvSqrt2;
  EXPECT_TRUE(check_certificate(scalar(0.0), inst, 1.0, 0.5, 1, dist - 1e-6).passed);
  EXPECT_FALSE(check_certificate(scalar(0.0), inst, 1.0, 0.5, 1, dist + 1e-6).passed);
  EXPECT_THROW(check_certificate(scalar(0.0), inst, 1.0, 0.5, 1, -1.0), std::invalid_argument);
}

TEST(CheckCertificate, RefusesNonStationaryPoints) {
  const Instance inst = make_scalar_instance(kInvSqrt2, 1.5);
  // x = 0 is not stationary for b = 1.5 (|z| = 1.06 > 1).
  try {
    check_certificate(scalar(0.0), inst, 1.0, 0.5, 1);
    FAIL() << "expected refusal";
  } catch (const CertificateRefused& e) {
    EXPECT_GT(e.residual(), kStationarityTolerance);
  }
  EXPECT_THROW(check_certificate(scalar(1.0), inst, 1.0, 0.5, 1), CertificateRefused);
}

TEST(CheckCertificate, RejectsBadArguments) {
  const Instance inst = make_scalar_instance(kInvSqrt2, 0.5);
  EXPECT_THROW(check_certificate(scalar(0.0), inst, 0.0, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(check_certificate(scalar(0.0), inst, 1.0, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(check_certificate(scalar(0.0), inst, 1.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(check_certificate(scalar(0.0), inst, 1.0, 0.5, 0), std::invalid_argument);
}

TEST(CheckCertificate, TightnessSweep) {
  const double mu = 1.0, delta = 0.5, res = 1e-3;
  const double lo = kInvSqrt2, hi = std::sqrt(2.0);
  int zero_checked = 0, large_checked = 0;
  for (int k = 0; k <= 3000; ++k) {
    const double b = k * res;
    const Instance inst = make_scalar_instance(kInvSqrt2, b);
    // x_s = 0 is stationary for b <= sqrt(2).
    if (b <= hi && std::abs(b - lo) > res) {
      EXPECT_EQ(check_certificate(scalar(0.0), inst, mu, delta, 1).passed, b < lo) << b;
      ++zero_checked;
    }
    // x_s = sqrt(2) b is stationary for b >= 1/sqrt(2).
    if (b >= lo && std::abs(b - hi) > res) {
      EXPECT_EQ(check_certificate(scalar(std::sqrt(2.0) * b), inst, mu, delta, 1).passed, b > hi) << b;
      ++large_checked;
    }
  }
  EXPECT_GT(zero_checked, 1400);
  EXPECT_GT(large_checked, 2200);
}

TEST(CheckCertificate, PassImpliesUniqueStationaryPointIn1d) {
  // In one dimension separation 1 means no other stationary point at all.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ub(0.0, 3.0), umu(0.3, 2.0);
  const double a = 0.9;  // a^2 = 1 - delta with delta = 0.19
  const double delta = 1.0 - a * a + 1e-9;
  int passes = 0;
  for (int t = 0; t < 300; ++t) {
    const double b = ub(rng), mu = umu(rng);
    const auto scan = oracle::stationary_scan(a, b, mu, 10.0, 1e-3);
    const Instance inst = make_scalar_instance(a, b);
    for (double x : scan) {
      // Polish the scanned point onto the exact stationary value.
      const double z = (1 - a * a) * x + a * b;
      const double xs = std::abs(z) > std::sqrt(mu) ? a * b / (a * a) : 0.0;
      if (std::abs(xs - x) > 1e-5) continue;
      try {
        if (check_certificate(scalar(xs), inst, mu, delta, 1).passed) {
          ++passes;
          EXPECT_EQ(scan.size(), 1u) << "b=" << b << " mu=" << mu;
        }
      } catch (const CertificateRefused&) {
      }
    }
  }
  EXPECT_GT(passes, 50);
}

TEST(CheckCertificate, NoiseFreeSelfConsistency) {
  OperatorSpec spec;
  spec.delta = 0.2;
  for (std::uint64_t seed : {1u, 2u}) {
    Instance inst = make_sparse_instance(200, 10, 0.0, make_vector_operator(spec, 200, seed), seed + 10);
    attach_rip(inst, spec);
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < inst.ground_truth->size(); ++i) {
      const double v = std::abs((*inst.ground_truth)(i));
      if (v > 0) smallest = std::min(smallest, v);
    }
    const double s = 0.5 * (1.0 - *inst.delta) * smallest;
    const double mu = s * s;
    const SolveResult r = solve(inst, RegParams::make(RegKind::RMu, mu));
    const Eigen::MatrixXd z = compute_z(r.solution, inst);
    EXPECT_LE((z - *inst.ground_truth).norm(), 1e-6);
    const auto rep = check_certificate(r.solution, inst, mu, *inst.delta, *inst.rip_order);
    EXPECT_TRUE(rep.passed);
    EXPECT_EQ(rep.support, 10);
    EXPECT_EQ(rep.separation, 200);
    EXPECT_TRUE(rep.sparsest_implication);
  }

  Instance lr = make_lowrank_instance(10, 10, 2, 0.0, make_matrix_operator(spec, 10, 10, 5), 6);
  attach_rip(lr, spec);
  const double s = 0.5 * (1.0 - *lr.delta) * singular_values(*lr.ground_truth)(1);
  const SolveResult r = solve(lr, RegParams::make(RegKind::RMu, s * s));
  EXPECT_LE((compute_z(r.solution, lr) - *lr.ground_truth).norm(), 1e-6);
  const auto rep = check_certificate(r.solution, lr, s * s, *lr.delta, *lr.rip_order);
  EXPECT_EQ(rep.flavor, Flavor::Matrix);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.support, 2);
}

TEST(CheckCertificate, IntervalMonotoneInDelta) {
  const Instance inst = make_scalar_instance(kInvSqrt2, 0.3);
  double prev_lo = 0, prev_hi = 0;
  bool first = true;
  for (double d = 0.05; d < 0.96; d += 0.05) {
    const auto rep = check_certificate(scalar(0.0), inst, 2.0, d, 1);
    EXPECT_LE(rep.interval_lower, std::sqrt(2.0));
    EXPECT_GE(rep.interval_upper, std::sqrt(2.0));
    EXPECT_EQ(rep.delta, d);
    if (!first) {
      EXPECT_LT(rep.interval_lower, prev_lo);
      EXPECT_GT(rep.interval_upper, prev_hi);
    }
    first = false;
    prev_lo = rep.interval_lower;
    prev_hi = rep.interval_upper;
  }
}

TEST(CheckCertificate, SparsestImplicationNeedsHalfSeparation) {
  Instance inst;
  inst.op = std::make_shared<DenseOperator>(Eigen::MatrixXd::Identity(4, 4));
  inst.b = Eigen::Vector4d(3.0, 0.0, 0.0, 0.0);
  const Eigen::MatrixXd x = inst.b;
  EXPECT_TRUE(check_certificate(x, inst, 1.0, 0.1, 4).sparsest_implication);
  EXPECT_FALSE(check_certificate(x, inst, 1.0, 0.1, 2).sparsest_implication);
}

TEST(CheckCertificate, RejectsPenaltyInstances) {
  const NrsfmInstance nr = make_nrsfm_instance(4, 3, 1, 0.0, 2);
  const Instance inst = with_derivative_penalty(nr, true);
  EXPECT_THROW(check_certificate(Eigen::MatrixXd::Zero(4, 9), inst, 1.0, 0.5, 1), std::invalid_argument);
}

TEST(ResolveDelta, Sources) {
  EXPECT_DOUBLE_EQ(*make_scalar_instance(kInvSqrt2, 0.5).delta, 0.5);
  Instance inst = make_scalar_instance(1.0, 0.5);
  EXPECT_THROW(resolve_delta(inst, std::nullopt), MissingDelta);
  EXPECT_EQ(resolve_delta(inst, 0.3), std::make_pair(0.3, DeltaSource::User));
  inst.delta = 0.2;
  EXPECT_EQ(resolve_delta(inst, std::nullopt), std::make_pair(0.2, DeltaSource::Instance));
  EXPECT_EQ(resolve_delta(inst, 0.2), std::make_pair(0.2, DeltaSource::Instance));
  EXPECT_THROW(resolve_delta(inst, 0.3), std::invalid_argument);
}

TEST(VerifiedFraction, Counting) {
  EXPECT_EQ(verified_fraction(std::vector<bool>{true, true}), 1.0);
  EXPECT_EQ(verified_fraction(std::vector<bool>{false, false, false}), 0.0);
  EXPECT_EQ(verified_fraction(std::vector<bool>{true, false, true, true}), 0.75);
  std::vector<CertificateReport> reports(4);
  reports[1].passed = true;
  EXPECT_EQ(verified_fraction(reports), 0.25);
  EXPECT_THROW(verified_fraction(std::vector<bool>{}), std::invalid_argument);
  EXPECT_THROW(verified_fraction(std::vector<CertificateReport>{}), std::invalid_argument);
}
