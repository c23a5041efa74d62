#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace sepdict {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised on contract violations (shape mismatch, degenerate input).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure cannot make progress.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

inline void require_shape(const Matrix& m, Index rows, Index cols,
                          const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(std::string(what) + ": shape mismatch (expected " +
                std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                ")");
  }
}

/// A stack of m equally sized rows x cols matrices stored side by side in
/// one contiguous rows x (cols*m) buffer. Slice j occupies columns
/// [j*cols, (j+1)*cols).
class MatrixStack {
 public:
  MatrixStack() = default;
  MatrixStack(Index rows, Index cols, Index count)
      : data_(Matrix::Zero(rows, cols * count)), cols_(cols), count_(count) {}
  MatrixStack(Matrix data, Index cols) : data_(std::move(data)), cols_(cols) {
    require(cols > 0 && data_.cols() % cols == 0,
            "MatrixStack: buffer width is not a multiple of slice width");
    count_ = data_.cols() / cols;
  }

  Index rows() const { return data_.rows(); }
  Index cols() const { return cols_; }
  Index count() const { return count_; }

  auto slice(Index j) { return data_.middleCols(j * cols_, cols_); }
  auto slice(Index j) const { return data_.middleCols(j * cols_, cols_); }

  Matrix& data() { return data_; }
  const Matrix& data() const { return data_; }

  bool same_shape(const MatrixStack& o) const {
    return rows() == o.rows() && cols_ == o.cols_ && count_ == o.count_;
  }

 private:
  Matrix data_;
  Index cols_ = 0;
  Index count_ = 0;
};

using CoefficientStack = MatrixStack;

}  // namespace sepdict
