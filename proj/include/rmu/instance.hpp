#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "rmu/linear_ops.hpp"

namespace rmu {

/// How an instance was produced, kept for replay and provenance records.
struct Provenance {
  std::string generator;  // "sparse", "lowrank", "nrsfm", "scalar", "manual"
  std::string op_kind;    // "rip", "gaussian", "nrsfm", "scalar"
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
};

/// A recovery problem: minimize reg(x) + |op x - b|^2 (+ |penalty x|^2).
struct Instance {
  OperatorPtr op;
  Eigen::VectorXd b;
  /// Same shape as op->input_shape().
  std::optional<Eigen::MatrixXd> ground_truth;
  /// Exact RIP constant of op, when it is known by construction.
  std::optional<double> delta;
  /// Cardinality / rank for which `delta` holds (c or r).
  std::optional<int> rip_order;
  /// Cardinality / rank of the ground truth.
  std::optional<int> target;
  /// Optional smooth quadratic term |penalty x|^2 added to the objective
  /// (the trajectory-derivative prior of the NRSfM problem).
  OperatorPtr penalty;
  Provenance provenance;

  Flavor flavor() const { return op->flavor(); }
  Shape shape() const { return op->input_shape(); }

  /// Throws std::invalid_argument when sizes or fields are inconsistent.
  void validate() const;
};

/// Ground truth with `cardinality` standard normal non-zeros on a uniformly
/// random support; b = op x + N(0, noise_sigma^2) noise.
Instance make_sparse_instance(Eigen::Index n, int cardinality, double noise_sigma, OperatorPtr op,
                              std::uint64_t seed);

/// Ground truth U V^T with standard normal U (m x rank), V (n x rank).
Instance make_lowrank_instance(Eigen::Index m, Eigen::Index n, int rank, double noise_sigma, OperatorPtr op,
                               std::uint64_t seed);

/// Operator family for generated instances: RIP-calibrated square
/// operators with a known delta, or Gaussian N(0, 1 / rows) operators whose
/// delta is unknown.
struct OperatorSpec {
  enum class Kind { Rip, Gaussian } kind = Kind::Rip;
  double delta = 0.2;
  Eigen::Index rows = 0;  // Gaussian only; 0 means square.
};

/// Builds a vector-flavor dense operator on R^n.
OperatorPtr make_vector_operator(const OperatorSpec& spec, Eigen::Index n, std::uint64_t seed);
/// Builds a matrix-flavor dense operator on R^{m x n} via column stacking.
OperatorPtr make_matrix_operator(const OperatorSpec& spec, Eigen::Index m, Eigen::Index n, std::uint64_t seed);

/// Fills in delta / rip_order for calibrated operators.
void attach_rip(Instance& inst, const OperatorSpec& spec);

/// The one-dimensional problem r_mu(x) + (a x - b)^2. delta = |1 - a^2| is
/// recorded when it lies in (0, 1).
Instance make_scalar_instance(double a, double b);

/// Synthetic non-rigid structure-from-motion problem.
struct NrsfmInstance {
  Instance instance;  // op = NrsfmProjection on X#, b = vec(M), ground_truth = X#
  std::shared_ptr<const NrsfmProjection> projection;
  std::shared_ptr<const DifferenceOperator> difference;
  Eigen::MatrixXd measurements;  // M, 2F x n
  Eigen::MatrixXd coefficients;  // C, F x K
};

/// X_f = sum_k c_fk B_k with B_k (3 x n) and c_fk standard normal, R_f the
/// first two rows of a random rotation, M = R X + noise. `perturbation`
/// adds i.i.d. N(0, perturbation^2) to the ground truth so it is no longer
/// exactly low rank.
NrsfmInstance make_nrsfm_instance(int frames, int points, int basis, double noise_sigma, std::uint64_t seed,
                                  double perturbation = 0.0);

/// Adds (or removes) the |D X#|^2 penalty on an NRSfM instance.
Instance with_derivative_penalty(const NrsfmInstance& nrsfm, bool enabled);

}  // namespace rmu
