#include "rmu/instance.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rmu/rng.hpp"

namespace rmu {

namespace {

Eigen::VectorXd gaussian_noise(Rng& rng, Eigen::Index size, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0.0) return Eigen::VectorXd::Zero(size);
  return gaussian_matrix(rng, size, 1, sigma);
}

}  // namespace

void Instance::validate() const {
  if (!op) throw std::invalid_argument("instance has no operator");
  if (b.size() != op->output_size()) {
    throw std::invalid_argument("observation length " + std::to_string(b.size()) + " does not match operator output " +
                                std::to_string(op->output_size()));
  }
  const Shape s = op->input_shape();
  if (ground_truth && (ground_truth->rows() != s.rows || ground_truth->cols() != s.cols)) {
    throw std::invalid_argument("ground truth shape does not match operator input shape");
  }
  if (delta && !(*delta > 0.0 && *delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (rip_order && *rip_order < 1) throw std::invalid_argument("rip_order must be positive");
  if (penalty && !(penalty->input_shape() == s)) throw std::invalid_argument("penalty operator shape mismatch");
}

Instance make_sparse_instance(Eigen::Index n, int cardinality, double noise_sigma, OperatorPtr op,
                              std::uint64_t seed) {
  if (!op || op->flavor() != Flavor::Vector || op->input_shape().rows != n) {
    throw std::invalid_argument("make_sparse_instance: operator must act on vectors of length " + std::to_string(n));
  }
  if (cardinality < 0 || cardinality > n) {
    throw std::invalid_argument("make_sparse_instance: cardinality " + std::to_string(cardinality) +
                                " outside [0, " + std::to_string(n) + "]");
  }
  Rng rng(derive_seed(seed, {0x5a}));

  // Partial Fisher-Yates for the support.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (int i = 0; i < cardinality; ++i) {
    const auto remaining = static_cast<std::uint64_t>(n - i);
    const auto j = static_cast<std::size_t>(i + static_cast<Eigen::Index>(rng() % remaining));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  std::normal_distribution<double> normal;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < cardinality; ++i) x[idx[static_cast<std::size_t>(i)]] = normal(rng);

  Instance inst;
  inst.op = op;
  inst.b = op->apply(x) + gaussian_noise(rng, op->output_size(), noise_sigma);
  inst.ground_truth = Eigen::MatrixXd(x);
  inst.target = cardinality;
  inst.provenance = {"sparse", "", seed, noise_sigma};
  return inst;
}

Instance make_lowrank_instance(Eigen::Index m, Eigen::Index n, int rank, double noise_sigma, OperatorPtr op,
                               std::uint64_t seed) {
  if (!op || op->flavor() != Flavor::Matrix || !(op->input_shape() == Shape{m, n})) {
    throw std::invalid_argument("make_lowrank_instance: operator must act on " + std::to_string(m) + "x" +
                                std::to_string(n) + " matrices");
  }
  if (rank < 0 || rank > std::min(m, n)) {
    throw std::invalid_argument("make_lowrank_instance: rank " + std::to_string(rank) + " exceeds min(m, n)");
  }
  Rng rng(derive_seed(seed, {0x1a}));
  const Eigen::MatrixXd u = gaussian_matrix(rng, m, rank);
  const Eigen::MatrixXd v = gaussian_matrix(rng, n, rank);
  const Eigen::MatrixXd x = rank == 0 ? Eigen::MatrixXd::Zero(m, n) : Eigen::MatrixXd(u * v.transpose());

  Instance inst;
  inst.op = op;
  inst.b = op->apply_matrix(x) + gaussian_noise(rng, op->output_size(), noise_sigma);
  inst.ground_truth = x;
  inst.target = rank;
  inst.provenance = {"lowrank", "", seed, noise_sigma};
  return inst;
}

OperatorPtr make_vector_operator(const OperatorSpec& spec, Eigen::Index n, std::uint64_t seed) {
  if (spec.kind == OperatorSpec::Kind::Rip) {
    return std::make_shared<DenseOperator>(gen_rip_dense(n, n, spec.delta, seed));
  }
  const Eigen::Index rows = spec.rows > 0 ? spec.rows : n;
  return std::make_shared<DenseOperator>(gen_gaussian_dense(rows, n, 1.0 / static_cast<double>(rows), seed));
}

OperatorPtr make_matrix_operator(const OperatorSpec& spec, Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  const Eigen::Index cols = m * n;
  Eigen::MatrixXd a;
  if (spec.kind == OperatorSpec::Kind::Rip) {
    a = gen_rip_dense(cols, cols, spec.delta, seed);
  } else {
    const Eigen::Index rows = spec.rows > 0 ? spec.rows : cols;
    a = gen_gaussian_dense(rows, cols, 1.0 / static_cast<double>(rows), seed);
  }
  return std::make_shared<DenseOperator>(std::move(a), Flavor::Matrix, Shape{m, n});
}

void attach_rip(Instance& inst, const OperatorSpec& spec) {
  inst.provenance.op_kind = spec.kind == OperatorSpec::Kind::Rip ? "rip" : "gaussian";
  if (spec.kind != OperatorSpec::Kind::Rip) {
    inst.delta.reset();
    inst.rip_order.reset();
    return;
  }
  const Shape s = inst.shape();
  inst.delta = spec.delta;
  inst.rip_order = static_cast<int>(inst.flavor() == Flavor::Vector ? s.rows : std::min(s.rows, s.cols));
}

Instance make_scalar_instance(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("scalar instance needs finite a and b");
  Instance inst;
  inst.op = std::make_shared<DenseOperator>(Eigen::MatrixXd::Constant(1, 1, a));
  inst.b = Eigen::VectorXd::Constant(1, b);
  const double d = std::abs(1.0 - a * a);
  if (d > 0.0 && d < 1.0) {
    inst.delta = d;
    inst.rip_order = 1;
  }
  inst.provenance = {"scalar", "scalar", 0, 0.0};
  return inst;
}

NrsfmInstance make_nrsfm_instance(int frames, int points, int basis, double noise_sigma, std::uint64_t seed,
                                  double perturbation) {
  if (frames < 2 || points < 1 || basis < 0 || basis > frames || basis > points) {
    throw std::invalid_argument("make_nrsfm_instance: need F >= 2, n >= 1 and 0 <= K <= min(F, n)");
  }
  if (!(perturbation >= 0.0)) throw std::invalid_argument("make_nrsfm_instance: perturbation must be >= 0");

  Rng rng(derive_seed(seed, {0xf5}));
  const Eigen::MatrixXd coeffs = gaussian_matrix(rng, frames, basis);
  // Row k of basis_sharp is B_k reshaped the same way as X#.
  const Eigen::MatrixXd basis_sharp = gaussian_matrix(rng, basis, 3 * points);
  Eigen::MatrixXd sharp = basis == 0 ? Eigen::MatrixXd::Zero(frames, 3 * points)
                                     : Eigen::MatrixXd(coeffs * basis_sharp);
  if (perturbation > 0.0) sharp += gaussian_matrix(rng, frames, 3 * points, perturbation);

  std::vector<Eigen::Matrix<double, 2, 3>> blocks;
  blocks.reserve(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    blocks.push_back(random_rotation(derive_seed(seed, {0x707, static_cast<std::uint64_t>(f)})).topRows<2>());
  }
  auto projection = std::make_shared<const NrsfmProjection>(std::move(blocks), points);
  auto difference = std::make_shared<const DifferenceOperator>(frames, 3 * points);

  NrsfmInstance out;
  out.projection = projection;
  out.difference = difference;
  out.coefficients = coeffs;
  out.measurements = projection->project(from_sharp(sharp));
  if (noise_sigma > 0.0) out.measurements += gaussian_matrix(rng, 2 * frames, points, noise_sigma);
  else if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");

  Instance& inst = out.instance;
  inst.op = projection;
  inst.b = out.measurements.reshaped();
  inst.ground_truth = sharp;
  inst.target = basis;
  inst.provenance = {"nrsfm", "nrsfm", seed, noise_sigma};
  return out;
}

Instance with_derivative_penalty(const NrsfmInstance& nrsfm, bool enabled) {
  Instance inst = nrsfm.instance;
  inst.penalty = enabled ? OperatorPtr(nrsfm.difference) : OperatorPtr();
  return inst;
}

}  // namespace rmu
