#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "geocap/errors.hpp"

namespace geocap {

// 64-bit floats throughout: gradient checks against central finite
// differences need the precision, and nothing here is throughput-bound.
using Scalar = double;
using Index = Eigen::Index;
using ArrayX = Eigen::ArrayXd;
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

using Shape = std::vector<Index>;

std::string shape_str(const Shape& s);

// Dense n-dimensional array, row-major flat storage with explicit shape.
// Rank-1 tensors view as 1xN matrices; ops that need 2-D say so.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, ArrayX data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Scalar value);
  static Tensor scalar(Scalar value);
  static Tensor vec(std::initializer_list<Scalar> values);
  static Tensor matrix(Index rows, Index cols,
                       std::initializer_list<Scalar> values);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(Index i) const { return shape_[static_cast<size_t>(i)]; }
  bool empty() const { return data_.size() == 0; }

  // Matrix view of the flat storage; valid for rank 1 (1xN) and rank 2.
  Index rows() const;
  Index cols() const;
  ConstMatMap mat() const { return {data_.data(), rows(), cols()}; }
  MatMap mat() { return {data_.data(), rows(), cols()}; }

  ArrayX& array() { return data_; }
  const ArrayX& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(Index i) { return data_[i]; }
  Scalar operator()(Index i) const { return data_[i]; }
  Scalar& operator()(Index i, Index j) { return data_[i * cols() + j]; }
  Scalar operator()(Index i, Index j) const { return data_[i * cols() + j]; }
  // Rank-3 access.
  Scalar& at3(Index i, Index j, Index k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Scalar at3(Index i, Index j, Index k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  Scalar item() const;  // requires size() == 1
  bool all_finite() const { return data_.isFinite().all(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  // Autodiff bookkeeping. `grad` is empty until a backward pass touches this
  // tensor; when set it always has the same length as `data`.
  bool requires_grad = false;
  ArrayX grad;

  void zero_grad() { grad = ArrayX::Zero(data_.size()); }

 private:
  Shape shape_;
  ArrayX data_;
};

// Row-major boolean mask; true means the position participates.
class Mask {
 public:
  Mask() = default;
  Mask(Index rows, Index cols, bool init = true)
      : rows_(rows), cols_(cols),
        allow_(static_cast<size_t>(rows * cols), init ? 1 : 0) {}

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool at(Index i, Index j) const {
    return allow_[static_cast<size_t>(i * cols_ + j)] != 0;
  }
  void set(Index i, Index j, bool allowed) {
    allow_[static_cast<size_t>(i * cols_ + j)] = allowed ? 1 : 0;
  }

 private:
  Index rows_ = 0, cols_ = 0;
  std::vector<uint8_t> allow_;
};

void check_finite(const Tensor& t, const std::string& where);

// ---------------------------------------------------------------------------
// Eager kernels. These are the forward definitions of every operation; the
// autodiff layer in graph.hpp reuses them and adds backward rules.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // domain error on any entry <= 0
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar c);
Tensor add_scalar(const Tensor& a, Scalar c);

// Adds vector v (length = cols) to every row of m.
Tensor add_rowvec(const Tensor& m, const Tensor& v);

// Numerically stable row softmax. Masked entries are exactly zero; a fully
// masked row is a degenerate-row error.
Tensor softmax_rows(const Tensor& t, const Mask* mask = nullptr);
Tensor log_softmax_rows(const Tensor& t);

// Normalizes each length-d vector (last dimension) to mean 0 / population
// variance 1, then applies gain and bias.
Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias,
                  Scalar eps = 1e-5);

Tensor embed_rows(const Tensor& table, const std::vector<int>& ids);
// out[i] = a(i, ids[i]) as a rows x 1 tensor.
Tensor gather_cols(const Tensor& a, const std::vector<int>& ids);
Tensor concat_cols(const std::vector<Tensor>& parts);
// a[i] along axis 0; result drops the leading dimension.
Tensor slice0(const Tensor& a, Index i);
Tensor col(const Tensor& a, Index j);
Tensor reshape(const Tensor& a, Shape shape);
Scalar sum(const Tensor& a);
Scalar dot(const Tensor& a, const ArrayX& weights);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, Scalar c) { return scale(a, c); }
inline Tensor operator*(Scalar c, const Tensor& a) { return scale(a, c); }

}  // namespace geocap
