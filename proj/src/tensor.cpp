#include "geocap/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace geocap {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {

Index shape_product(const Shape& s) {
  Index n = 1;
  for (Index d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() < 1 || t.rank() > 2)
    throw ShapeError(std::string(op) + ": expected rank 1 or 2, got shape " +
                     shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_ = ArrayX::Zero(shape_product(shape_));
}

Tensor::Tensor(Shape shape, ArrayX data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size())
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(Shape shape, Scalar value) {
  Tensor t(std::move(shape));
  t.data_.setConstant(value);
  return t;
}

Tensor Tensor::scalar(Scalar value) { return full({1}, value); }

Tensor Tensor::vec(std::initializer_list<Scalar> values) {
  Tensor t({static_cast<Index>(values.size())});
  Index i = 0;
  for (Scalar v : values) t.data_[i++] = v;
  return t;
}

Tensor Tensor::matrix(Index rows, Index cols,
                      std::initializer_list<Scalar> values) {
  Tensor t({rows, cols});
  if (static_cast<Index>(values.size()) != rows * cols)
    throw ShapeError("matrix literal: " + std::to_string(values.size()) +
                     " values for shape " + shape_str({rows, cols}));
  Index i = 0;
  for (Scalar v : values) t.data_[i++] = v;
  return t;
}

Index Tensor::rows() const {
  require_rank2(*this, "rows");
  return rank() == 1 ? 1 : shape_[0];
}

Index Tensor::cols() const {
  require_rank2(*this, "cols");
  return rank() == 1 ? shape_[0] : shape_[1];
}

Scalar Tensor::item() const {
  if (size() != 1)
    throw ContractError("item(): tensor has " + std::to_string(size()) +
                        " elements, expected exactly 1");
  return data_[0];
}

void check_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite())
    throw NonFiniteError(where + ": non-finite value encountered");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor out({a.rows(), b.cols()});
  out.mat().noalias() = a.mat() * b.mat();
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  Tensor out({a.cols(), a.rows()});
  out.mat() = a.mat().transpose();
  return out;
}

Tensor relu(const Tensor& a) {
  return {a.shape(), a.array().max(0.0)};
}

Tensor exp(const Tensor& a) {
  return {a.shape(), a.array().exp()};
}

Tensor log(const Tensor& a) {
  if ((a.array() <= 0.0).any())
    throw DomainError("log: non-positive entry");
  return {a.shape(), a.array().log()};
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return {a.shape(), a.array() + b.array()};
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return {a.shape(), a.array() - b.array()};
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return {a.shape(), a.array() * b.array()};
}

Tensor scale(const Tensor& a, Scalar c) {
  return {a.shape(), a.array() * c};
}

Tensor add_scalar(const Tensor& a, Scalar c) {
  return {a.shape(), a.array() + c};
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_rank2(m, "add_rowvec");
  if (v.rank() != 1 || v.size() != m.cols())
    throw ShapeError("add_rowvec: vector " + shape_str(v.shape()) +
                     " vs matrix " + shape_str(m.shape()));
  Tensor out = m;
  out.mat().rowwise() += v.mat().row(0);
  return out;
}

Tensor softmax_rows(const Tensor& t, const Mask* mask) {
  require_rank2(t, "softmax_rows");
  const Index r = t.rows(), c = t.cols();
  if (mask && (mask->rows() != r || mask->cols() != c))
    throw ShapeError("softmax_rows: mask " +
                     shape_str({mask->rows(), mask->cols()}) + " vs tensor " +
                     shape_str(t.shape()));
  Tensor out({r, c});
  for (Index i = 0; i < r; ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < c; ++j)
      if (!mask || mask->at(i, j)) m = std::max(m, t(i, j));
    if (!std::isfinite(m))
      throw DegenerateRowError("softmax_rows: row " + std::to_string(i) +
                               " has no unmasked entries");
    Scalar s = 0;
    for (Index j = 0; j < c; ++j) {
      if (!mask || mask->at(i, j)) {
        out(i, j) = std::exp(t(i, j) - m);
        s += out(i, j);
      } else {
        out(i, j) = 0.0;
      }
    }
    for (Index j = 0; j < c; ++j) out(i, j) /= s;
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& t) {
  require_rank2(t, "log_softmax_rows");
  const Index r = t.rows(), c = t.cols();
  Tensor out({r, c});
  for (Index i = 0; i < r; ++i) {
    const Scalar m = t.mat().row(i).maxCoeff();
    Scalar s = 0;
    for (Index j = 0; j < c; ++j) s += std::exp(t(i, j) - m);
    const Scalar lse = m + std::log(s);
    for (Index j = 0; j < c; ++j) out(i, j) = t(i, j) - lse;
  }
  return out;
}

Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias,
                  Scalar eps) {
  if (t.rank() < 1) throw ShapeError("layer_norm: rank 0 input");
  const Index d = t.shape().back();
  if (d < 2) throw ShapeError("layer_norm: last dimension must be >= 2");
  if (gain.size() != d || bias.size() != d)
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " vs feature dim " +
                     std::to_string(d));
  if (eps <= 0) throw ConfigError("layer_norm: eps must be positive");
  const Index n = t.size() / d;
  Tensor out(t.shape());
  for (Index i = 0; i < n; ++i) {
    const Scalar* x = t.data() + i * d;
    Scalar* y = out.data() + i * d;
    Scalar mean = 0;
    for (Index k = 0; k < d; ++k) mean += x[k];
    mean /= static_cast<Scalar>(d);
    Scalar var = 0;
    for (Index k = 0; k < d; ++k) var += (x[k] - mean) * (x[k] - mean);
    var /= static_cast<Scalar>(d);  // population variance
    const Scalar inv = 1.0 / std::sqrt(var + eps);
    for (Index k = 0; k < d; ++k)
      y[k] = gain(k) * ((x[k] - mean) * inv) + bias(k);
  }
  return out;
}

Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
  require_rank2(table, "embed_rows");
  const Index v = table.rows(), d = table.cols();
  Tensor out({static_cast<Index>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= v)
      throw VocabError("embed_rows: id " + std::to_string(ids[i]) +
                       " out of range [0, " + std::to_string(v) + ")");
    out.mat().row(static_cast<Index>(i)) = table.mat().row(ids[i]);
  }
  return out;
}

Tensor gather_cols(const Tensor& a, const std::vector<int>& ids) {
  require_rank2(a, "gather_cols");
  if (static_cast<Index>(ids.size()) != a.rows())
    throw ShapeError("gather_cols: " + std::to_string(ids.size()) +
                     " indices for " + std::to_string(a.rows()) + " rows");
  Tensor out({a.rows(), 1});
  for (Index i = 0; i < a.rows(); ++i) {
    const int j = ids[static_cast<size_t>(i)];
    if (j < 0 || j >= a.cols())
      throw VocabError("gather_cols: index " + std::to_string(j) +
                       " out of range [0, " + std::to_string(a.cols()) + ")");
    out(i, 0) = a(i, j);
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index r = parts[0].rows();
  Index c = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != r)
      throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()));
    c += p.cols();
  }
  Tensor out({r, c});
  Index off = 0;
  for (const Tensor& p : parts) {
    out.mat().middleCols(off, p.cols()) = p.mat();
    off += p.cols();
  }
  return out;
}

Tensor slice0(const Tensor& a, Index i) {
  if (a.rank() < 2) throw ShapeError("slice0: rank must be >= 2");
  if (i < 0 || i >= a.dim(0))
    throw ShapeError("slice0: index " + std::to_string(i) + " out of range");
  Shape rest(a.shape().begin() + 1, a.shape().end());
  const Index chunk = a.size() / a.dim(0);
  return {std::move(rest), a.array().segment(i * chunk, chunk)};
}

Tensor col(const Tensor& a, Index j) {
  require_rank2(a, "col");
  if (j < 0 || j >= a.cols())
    throw ShapeError("col: index " + std::to_string(j) + " out of range");
  Tensor out({a.rows(), 1});
  out.mat().col(0) = a.mat().col(j);
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  Tensor out(std::move(shape), a.array());
  return out;
}

Scalar sum(const Tensor& a) { return a.array().sum(); }

Scalar dot(const Tensor& a, const ArrayX& weights) {
  if (a.size() != weights.size())
    throw ShapeError("dot: " + std::to_string(a.size()) + " vs " +
                     std::to_string(weights.size()) + " entries");
  return (a.array() * weights).sum();
}

}  // namespace geocap
