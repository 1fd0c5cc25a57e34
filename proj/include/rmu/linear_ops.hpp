#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rmu {

/// Whether the unknown is a vector (entry-wise regularization) or a matrix
/// (spectral regularization).
enum class Flavor { Vector, Matrix };

std::string to_string(Flavor f);

/// Shape of the unknown. Vector unknowns use cols == 1.
struct Shape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 1;

  Eigen::Index size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

/// A linear map from R^{rows x cols} (column-stacked) to R^p.
///
/// Operators are immutable after construction; apply and adjoint may be
/// called concurrently.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Flavor flavor() const = 0;
  virtual Shape input_shape() const = 0;
  virtual Eigen::Index output_size() const = 0;

  /// x is the column-stacked unknown of length input_shape().size().
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd adjoint(const Eigen::VectorXd& y) const = 0;

  /// Dense p x (rows * cols) representation. The default probes the
  /// operator with unit vectors.
  virtual Eigen::MatrixXd to_dense() const;

  /// Stable identifier used by serialization.
  virtual std::string kind() const = 0;

  Eigen::VectorXd apply_matrix(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd adjoint_matrix(const Eigen::VectorXd& y) const;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

/// Explicit p x N matrix acting on the column-stacked unknown.
class DenseOperator final : public LinearOperator {
 public:
  DenseOperator(Eigen::MatrixXd matrix, Flavor flavor, Shape shape);
  /// Vector flavor with shape (matrix.cols(), 1).
  explicit DenseOperator(Eigen::MatrixXd matrix);

  Flavor flavor() const override { return flavor_; }
  Shape input_shape() const override { return shape_; }
  Eigen::Index output_size() const override { return matrix_.rows(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& y) const override;
  Eigen::MatrixXd to_dense() const override { return matrix_; }
  std::string kind() const override { return "dense"; }

  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  Eigen::MatrixXd matrix_;
  Flavor flavor_;
  Shape shape_;
};

/// Reshape between the stacked 3F x n shape matrix X (frame f occupies rows
/// 3f..3f+2) and the F x 3n matrix X# whose row f concatenates the three
/// rows of frame f.
Eigen::MatrixXd to_sharp(const Eigen::MatrixXd& stacked);
Eigen::MatrixXd from_sharp(const Eigen::MatrixXd& sharp);

/// Maps X# (F x 3n, column-stacked) to vec(R X), where R is block diagonal
/// with one 2 x 3 camera block per frame.
class NrsfmProjection final : public LinearOperator {
 public:
  /// Each block must be 2 x 3.
  NrsfmProjection(std::vector<Eigen::Matrix<double, 2, 3>> blocks, Eigen::Index points);

  Flavor flavor() const override { return Flavor::Matrix; }
  Shape input_shape() const override;
  Eigen::Index output_size() const override;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& y) const override;
  std::string kind() const override { return "nrsfm_projection"; }

  Eigen::Index frames() const { return static_cast<Eigen::Index>(blocks_.size()); }
  Eigen::Index points() const { return points_; }
  const std::vector<Eigen::Matrix<double, 2, 3>>& blocks() const { return blocks_; }

  /// R X for a stacked 3F x n shape matrix; result is 2F x n.
  Eigen::MatrixXd project(const Eigen::MatrixXd& stacked) const;
  /// The full 2F x 3F block-diagonal matrix.
  Eigen::MatrixXd block_matrix() const;

 private:
  std::vector<Eigen::Matrix<double, 2, 3>> blocks_;
  Eigen::Index points_;
};

/// First-order difference along the rows of an F x cols matrix:
/// (D Y)_f = Y_{f+1} - Y_f, output (F-1) x cols column-stacked.
class DifferenceOperator final : public LinearOperator {
 public:
  DifferenceOperator(Eigen::Index frames, Eigen::Index cols);

  Flavor flavor() const override { return Flavor::Matrix; }
  Shape input_shape() const override { return {frames_, cols_}; }
  Eigen::Index output_size() const override { return (frames_ - 1) * cols_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& y) const override;
  std::string kind() const override { return "difference"; }

 private:
  Eigen::Index frames_;
  Eigen::Index cols_;
};

/// Vertical concatenation [A_1; A_2; ...] of operators sharing an input shape.
class StackedOperator final : public LinearOperator {
 public:
  explicit StackedOperator(std::vector<OperatorPtr> parts);

  Flavor flavor() const override { return parts_.front()->flavor(); }
  Shape input_shape() const override { return parts_.front()->input_shape(); }
  Eigen::Index output_size() const override;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& y) const override;
  std::string kind() const override { return "stacked"; }

  const std::vector<OperatorPtr>& parts() const { return parts_; }

 private:
  std::vector<OperatorPtr> parts_;
};

/// Gaussian rows x cols matrix whose singular values are replaced by an
/// inclusive linear grid from sqrt(1 + delta) down to sqrt(1 - delta).
/// Requires rows >= cols, so (1 - delta)|x|^2 <= |Ax|^2 <= (1 + delta)|x|^2
/// holds for every x.
Eigen::MatrixXd gen_rip_dense(Eigen::Index rows, Eigen::Index cols, double delta, std::uint64_t seed);

/// I.i.d. N(0, variance) entries.
Eigen::MatrixXd gen_gaussian_dense(Eigen::Index rows, Eigen::Index cols, double variance, std::uint64_t seed);

/// Uniformly distributed rotation (QR of a Gaussian 3 x 3, signs fixed so
/// that R has a positive diagonal, determinant forced to +1).
Eigen::Matrix3d random_rotation(std::uint64_t seed);

}  // namespace rmu
