#include "rmu/linear_ops.hpp"

#include <cmath>
#include <stdexcept>

#include "rmu/rng.hpp"

namespace rmu {

namespace {

void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                                std::to_string(got));
  }
}

}  // namespace

std::string to_string(Flavor f) { return f == Flavor::Vector ? "vector" : "matrix"; }

Eigen::MatrixXd LinearOperator::to_dense() const {
  const Eigen::Index n = input_shape().size();
  Eigen::MatrixXd out(output_size(), n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    out.col(j) = apply(e);
    e[j] = 0.0;
  }
  return out;
}

Eigen::VectorXd LinearOperator::apply_matrix(const Eigen::MatrixXd& x) const {
  const Shape s = input_shape();
  if (x.rows() != s.rows || x.cols() != s.cols) throw std::invalid_argument("apply_matrix: shape mismatch");
  return apply(x.reshaped());
}

Eigen::MatrixXd LinearOperator::adjoint_matrix(const Eigen::VectorXd& y) const {
  const Shape s = input_shape();
  return adjoint(y).reshaped(s.rows, s.cols);
}

// ---------------------------------------------------------------------------

DenseOperator::DenseOperator(Eigen::MatrixXd matrix, Flavor flavor, Shape shape)
    : matrix_(std::move(matrix)), flavor_(flavor), shape_(shape) {
  if (shape_.size() != matrix_.cols()) {
    throw std::invalid_argument("DenseOperator: shape " + std::to_string(shape_.rows) + "x" +
                                std::to_string(shape_.cols) + " does not match " + std::to_string(matrix_.cols()) +
                                " columns");
  }
  if (flavor_ == Flavor::Vector && shape_.cols != 1) {
    throw std::invalid_argument("DenseOperator: vector flavor needs a single-column shape");
  }
}

DenseOperator::DenseOperator(Eigen::MatrixXd matrix)
    : DenseOperator(matrix, Flavor::Vector, Shape{matrix.cols(), 1}) {}

Eigen::VectorXd DenseOperator::apply(const Eigen::VectorXd& x) const {
  require_size(x.size(), matrix_.cols(), "DenseOperator::apply");
  return matrix_ * x;
}

Eigen::VectorXd DenseOperator::adjoint(const Eigen::VectorXd& y) const {
  require_size(y.size(), matrix_.rows(), "DenseOperator::adjoint");
  return matrix_.transpose() * y;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd to_sharp(const Eigen::MatrixXd& stacked) {
  if (stacked.rows() % 3 != 0) throw std::invalid_argument("to_sharp: row count must be a multiple of 3");
  const Eigen::Index frames = stacked.rows() / 3;
  const Eigen::Index n = stacked.cols();
  Eigen::MatrixXd sharp(frames, 3 * n);
  for (Eigen::Index f = 0; f < frames; ++f)
    for (Eigen::Index r = 0; r < 3; ++r) sharp.block(f, r * n, 1, n) = stacked.row(3 * f + r);
  return sharp;
}

Eigen::MatrixXd from_sharp(const Eigen::MatrixXd& sharp) {
  if (sharp.cols() % 3 != 0) throw std::invalid_argument("from_sharp: column count must be a multiple of 3");
  const Eigen::Index frames = sharp.rows();
  const Eigen::Index n = sharp.cols() / 3;
  Eigen::MatrixXd stacked(3 * frames, n);
  for (Eigen::Index f = 0; f < frames; ++f)
    for (Eigen::Index r = 0; r < 3; ++r) stacked.row(3 * f + r) = sharp.block(f, r * n, 1, n);
  return stacked;
}

NrsfmProjection::NrsfmProjection(std::vector<Eigen::Matrix<double, 2, 3>> blocks, Eigen::Index points)
    : blocks_(std::move(blocks)), points_(points) {
  if (blocks_.empty() || points_ <= 0) throw std::invalid_argument("NrsfmProjection: need frames and points");
}

Shape NrsfmProjection::input_shape() const { return {frames(), 3 * points_}; }
Eigen::Index NrsfmProjection::output_size() const { return 2 * frames() * points_; }

Eigen::MatrixXd NrsfmProjection::project(const Eigen::MatrixXd& stacked) const {
  if (stacked.rows() != 3 * frames() || stacked.cols() != points_) {
    throw std::invalid_argument("NrsfmProjection::project: shape mismatch");
  }
  Eigen::MatrixXd out(2 * frames(), points_);
  for (Eigen::Index f = 0; f < frames(); ++f) out.middleRows(2 * f, 2) = blocks_[f] * stacked.middleRows(3 * f, 3);
  return out;
}

Eigen::MatrixXd NrsfmProjection::block_matrix() const {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2 * frames(), 3 * frames());
  for (Eigen::Index f = 0; f < frames(); ++f) r.block(2 * f, 3 * f, 2, 3) = blocks_[f];
  return r;
}

Eigen::VectorXd NrsfmProjection::apply(const Eigen::VectorXd& x) const {
  require_size(x.size(), input_shape().size(), "NrsfmProjection::apply");
  const Eigen::MatrixXd sharp = x.reshaped(frames(), 3 * points_);
  return project(from_sharp(sharp)).reshaped();
}

Eigen::VectorXd NrsfmProjection::adjoint(const Eigen::VectorXd& y) const {
  require_size(y.size(), output_size(), "NrsfmProjection::adjoint");
  const Eigen::MatrixXd m = y.reshaped(2 * frames(), points_);
  Eigen::MatrixXd stacked(3 * frames(), points_);
  for (Eigen::Index f = 0; f < frames(); ++f) {
    stacked.middleRows(3 * f, 3) = blocks_[f].transpose() * m.middleRows(2 * f, 2);
  }
  return to_sharp(stacked).reshaped();
}

// ---------------------------------------------------------------------------

DifferenceOperator::DifferenceOperator(Eigen::Index frames, Eigen::Index cols) : frames_(frames), cols_(cols) {
  if (frames_ < 2 || cols_ < 1) throw std::invalid_argument("DifferenceOperator: need at least two frames");
}

Eigen::VectorXd DifferenceOperator::apply(const Eigen::VectorXd& x) const {
  require_size(x.size(), frames_ * cols_, "DifferenceOperator::apply");
  const auto y = x.reshaped(frames_, cols_);
  Eigen::MatrixXd d = y.bottomRows(frames_ - 1) - y.topRows(frames_ - 1);
  return d.reshaped();
}

Eigen::VectorXd DifferenceOperator::adjoint(const Eigen::VectorXd& y) const {
  require_size(y.size(), output_size(), "DifferenceOperator::adjoint");
  const auto d = y.reshaped(frames_ - 1, cols_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(frames_, cols_);
  out.bottomRows(frames_ - 1) += d;
  out.topRows(frames_ - 1) -= d;
  return out.reshaped();
}

// ---------------------------------------------------------------------------

StackedOperator::StackedOperator(std::vector<OperatorPtr> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw std::invalid_argument("StackedOperator: no parts");
  for (const auto& p : parts_) {
    if (!p) throw std::invalid_argument("StackedOperator: null part");
    if (!(p->input_shape() == parts_.front()->input_shape())) {
      throw std::invalid_argument("StackedOperator: parts disagree on input shape");
    }
  }
}

Eigen::Index StackedOperator::output_size() const {
  Eigen::Index total = 0;
  for (const auto& p : parts_) total += p->output_size();
  return total;
}

Eigen::VectorXd StackedOperator::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(output_size());
  Eigen::Index offset = 0;
  for (const auto& p : parts_) {
    const Eigen::Index k = p->output_size();
    out.segment(offset, k) = p->apply(x);
    offset += k;
  }
  return out;
}

Eigen::VectorXd StackedOperator::adjoint(const Eigen::VectorXd& y) const {
  require_size(y.size(), output_size(), "StackedOperator::adjoint");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(input_shape().size());
  Eigen::Index offset = 0;
  for (const auto& p : parts_) {
    const Eigen::Index k = p->output_size();
    out += p->adjoint(y.segment(offset, k));
    offset += k;
  }
  return out;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd gen_rip_dense(Eigen::Index rows, Eigen::Index cols, double delta, std::uint64_t seed) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("gen_rip_dense: delta must lie in (0, 1)");
  if (rows < cols || cols < 1) throw std::invalid_argument("gen_rip_dense: need rows >= cols >= 1");

  Rng rng(derive_seed(seed, {0x51d}));
  const Eigen::MatrixXd g = gaussian_matrix(rng, rows, cols);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);

  const double hi = std::sqrt(1.0 + delta);
  const double lo = std::sqrt(1.0 - delta);
  Eigen::VectorXd s(cols);
  if (cols == 1) {
    s[0] = hi;
  } else {
    for (Eigen::Index i = 0; i < cols; ++i) {
      s[i] = hi + (lo - hi) * static_cast<double>(i) / static_cast<double>(cols - 1);
    }
    s[cols - 1] = lo;
  }
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Eigen::MatrixXd gen_gaussian_dense(Eigen::Index rows, Eigen::Index cols, double variance, std::uint64_t seed) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument("gen_gaussian_dense: variance must be positive");
  }
  if (rows < 1 || cols < 1) throw std::invalid_argument("gen_gaussian_dense: empty shape");
  Rng rng(derive_seed(seed, {0x6a0}));
  return gaussian_matrix(rng, rows, cols, std::sqrt(variance));
}

Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x707}));
  const Eigen::Matrix3d g = gaussian_matrix(rng, 3, 3);
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(g);
  Eigen::Matrix3d q = qr.householderQ();
  const Eigen::Matrix3d r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(2) *= -1.0;
  return q;
}

}  // namespace rmu
