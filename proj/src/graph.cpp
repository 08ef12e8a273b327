#include "geocap/graph.hpp"

#include <cmath>
#include <utility>

namespace geocap {

const Tensor& Var::value() const { return graph->value(*this); }

int Graph::add_node(Node n) {
  if (backward_done_)
    throw ContractError("graph: cannot extend a graph after backward()");
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Graph::leaf(Tensor& t) {
  Node n;
  n.external = &t;
  n.needs_grad = t.requires_grad;
  return {add_node(std::move(n)), this};
}

Var Graph::constant(Tensor t) {
  Node n;
  n.owned = std::move(t);
  return {add_node(std::move(n)), this};
}

const Tensor& Graph::value(Var v) const { return val(v.id); }

ArrayX& Graph::grad_buf(int id) {
  Node& n = node(id);
  if (n.grad.size() == 0) n.grad = ArrayX::Zero(val(id).size());
  return n.grad;
}

ArrayX Graph::grad(Var v) const {
  const Node& n = node(v.id);
  if (n.grad.size() == 0) return ArrayX::Zero(val(v.id).size());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("backward: foreign var");
  if (val(loss.id).size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(val(loss.id).shape()));
  if (backward_done_) throw ContractError("backward: already ran");
  backward_done_ = true;

  grad_buf(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = node(i);
    if (n.back && n.grad.size() != 0) n.back(*this, i);
  }
  // Every requires_grad leaf gets a grad; zeros when unreachable.
  for (Node& n : nodes_) {
    if (n.external && n.needs_grad) {
      if (n.external->grad.size() == 0) n.external->zero_grad();
      if (n.grad.size() != 0) n.external->grad += n.grad;
    }
  }
}

namespace {

ConstMatMap as_mat(const ArrayX& flat, Index rows, Index cols) {
  return ConstMatMap(flat.data(), rows, cols);
}

MatMap as_mat(ArrayX& flat, Index rows, Index cols) {
  return MatMap(flat.data(), rows, cols);
}

}  // namespace

Var Graph::matmul(Var a, Var b) {
  Tensor out = geocap::matmul(val(a.id), val(b.id));
  Node n;
  n.owned = std::move(out);
  n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, int self) {
      const Tensor& A = g.val(ia);
      const Tensor& B = g.val(ib);
      auto dC = as_mat(g.node(self).grad, A.rows(), B.cols());
      if (g.node(ia).needs_grad)
        as_mat(g.grad_buf(ia), A.rows(), A.cols()).noalias() +=
            dC * B.mat().transpose();
      if (g.node(ib).needs_grad)
        as_mat(g.grad_buf(ib), B.rows(), B.cols()).noalias() +=
            A.mat().transpose() * dC;
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::transpose(Var a) {
  Node n;
  n.owned = geocap::transpose(val(a.id));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia](Graph& g, int self) {
      const Tensor& A = g.val(ia);
      auto dC = as_mat(g.node(self).grad, A.cols(), A.rows());
      as_mat(g.grad_buf(ia), A.rows(), A.cols()) += dC.transpose();
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::add(Var a, Var b) {
  Node n;
  n.owned = geocap::add(val(a.id), val(b.id));
  n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, int self) {
      const ArrayX& dC = g.node(self).grad;
      if (g.node(ia).needs_grad) g.grad_buf(ia) += dC;
      if (g.node(ib).needs_grad) g.grad_buf(ib) += dC;
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::sub(Var a, Var b) {
  Node n;
  n.owned = geocap::sub(val(a.id), val(b.id));
  n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, int self) {
      const ArrayX& dC = g.node(self).grad;
      if (g.node(ia).needs_grad) g.grad_buf(ia) += dC;
      if (g.node(ib).needs_grad) g.grad_buf(ib) -= dC;
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::mul(Var a, Var b) {
  Node n;
  n.owned = geocap::mul(val(a.id), val(b.id));
  n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id, ib = b.id;
    n.back = [ia, ib](Graph& g, int self) {
      const ArrayX& dC = g.node(self).grad;
      if (g.node(ia).needs_grad) g.grad_buf(ia) += dC * g.val(ib).array();
      if (g.node(ib).needs_grad) g.grad_buf(ib) += dC * g.val(ia).array();
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::scale(Var a, Scalar c) {
  Node n;
  n.owned = geocap::scale(val(a.id), c);
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia, c](Graph& g, int self) {
      g.grad_buf(ia) += c * g.node(self).grad;
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::add_scalar(Var a, Scalar c) {
  Node n;
  n.owned = geocap::add_scalar(val(a.id), c);
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia](Graph& g, int self) { g.grad_buf(ia) += g.node(self).grad; };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::relu(Var a) {
  Node n;
  n.owned = geocap::relu(val(a.id));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    // Subgradient at exactly 0 is 0.
    n.back = [ia](Graph& g, int self) {
      g.grad_buf(ia) +=
          g.node(self).grad * (g.val(ia).array() > 0.0).cast<Scalar>();
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::exp(Var a) {
  Node n;
  n.owned = geocap::exp(val(a.id));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia](Graph& g, int self) {
      g.grad_buf(ia) += g.node(self).grad * g.val(self).array();
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::log(Var a) {
  Node n;
  n.owned = geocap::log(val(a.id));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia](Graph& g, int self) {
      g.grad_buf(ia) += g.node(self).grad / g.val(ia).array();
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::add_rowvec(Var m, Var v) {
  Node n;
  n.owned = geocap::add_rowvec(val(m.id), val(v.id));
  n.needs_grad = node(m.id).needs_grad || node(v.id).needs_grad;
  if (n.needs_grad) {
    const int im = m.id, iv = v.id;
    n.back = [im, iv](Graph& g, int self) {
      const Tensor& M = g.val(im);
      auto dC = as_mat(g.node(self).grad, M.rows(), M.cols());
      if (g.node(im).needs_grad) g.grad_buf(im) += g.node(self).grad;
      if (g.node(iv).needs_grad)
        as_mat(g.grad_buf(iv), 1, M.cols()) += dC.colwise().sum();
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::softmax_rows(Var a, const Mask* mask) {
  Node n;
  n.owned = geocap::softmax_rows(val(a.id), mask);
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    // dx_ij = y_ij * (dy_ij - sum_k dy_ik y_ik); masked entries have y = 0.
    n.back = [ia](Graph& g, int self) {
      const Tensor& Y = g.val(self);
      const Index r = Y.rows(), c = Y.cols();
      auto dY = as_mat(g.node(self).grad, r, c);
      auto dX = as_mat(g.grad_buf(ia), r, c);
      for (Index i = 0; i < r; ++i) {
        const Scalar s = dY.row(i).cwiseProduct(Y.mat().row(i)).sum();
        dX.row(i) += Y.mat().row(i).cwiseProduct(dY.row(i).array() - s);
      }
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::log_softmax_rows(Var a) {
  Node n;
  n.owned = geocap::log_softmax_rows(val(a.id));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    // dx_ij = dy_ij - exp(y_ij) * sum_k dy_ik
    n.back = [ia](Graph& g, int self) {
      const Tensor& Y = g.val(self);
      const Index r = Y.rows(), c = Y.cols();
      auto dY = as_mat(g.node(self).grad, r, c);
      auto dX = as_mat(g.grad_buf(ia), r, c);
      for (Index i = 0; i < r; ++i) {
        const Scalar s = dY.row(i).sum();
        dX.row(i) += dY.row(i) - s * Y.mat().row(i).array().exp().matrix();
      }
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::layer_norm(Var x, Var gain, Var bias, Scalar eps) {
  const Tensor& X = val(x.id);
  Node n;
  n.owned = geocap::layer_norm(X, val(gain.id), val(bias.id), eps);
  n.needs_grad =
      node(x.id).needs_grad || node(gain.id).needs_grad || node(bias.id).needs_grad;
  if (n.needs_grad) {
    const int ix = x.id, ig = gain.id, ib = bias.id;
    n.back = [ix, ig, ib, eps](Graph& g, int self) {
      const Tensor& X = g.val(ix);
      const Tensor& gain = g.val(ig);
      const Index d = X.shape().back();
      const Index rows = X.size() / d;
      const ArrayX& dY = g.node(self).grad;
      const bool need_x = g.node(ix).needs_grad;
      const bool need_g = g.node(ig).needs_grad;
      const bool need_b = g.node(ib).needs_grad;
      ArrayX* dX = need_x ? &g.grad_buf(ix) : nullptr;
      ArrayX* dG = need_g ? &g.grad_buf(ig) : nullptr;
      ArrayX* dB = need_b ? &g.grad_buf(ib) : nullptr;
      ArrayX xhat(d), gdy(d);
      for (Index i = 0; i < rows; ++i) {
        const Scalar* xp = X.data() + i * d;
        Scalar mean = 0;
        for (Index k = 0; k < d; ++k) mean += xp[k];
        mean /= static_cast<Scalar>(d);
        Scalar var = 0;
        for (Index k = 0; k < d; ++k) var += (xp[k] - mean) * (xp[k] - mean);
        var /= static_cast<Scalar>(d);
        const Scalar inv = 1.0 / std::sqrt(var + eps);
        for (Index k = 0; k < d; ++k) xhat[k] = (xp[k] - mean) * inv;
        for (Index k = 0; k < d; ++k) {
          const Scalar dy = dY[i * d + k];
          if (need_b) (*dB)[k] += dy;
          if (need_g) (*dG)[k] += dy * xhat[k];
          gdy[k] = dy * gain(k);
        }
        if (need_x) {
          const Scalar m1 = gdy.mean();
          const Scalar m2 = (gdy * xhat).mean();
          for (Index k = 0; k < d; ++k)
            (*dX)[i * d + k] += inv * (gdy[k] - m1 - xhat[k] * m2);
        }
      }
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::embed_rows(Var table, std::vector<int> ids) {
  Node n;
  n.owned = geocap::embed_rows(val(table.id), ids);
  n.needs_grad = node(table.id).needs_grad;
  if (n.needs_grad) {
    const int it = table.id;
    n.back = [it, ids = std::move(ids)](Graph& g, int self) {
      const Tensor& T = g.val(it);
      const Index d = T.cols();
      auto dOut = as_mat(g.node(self).grad, static_cast<Index>(ids.size()), d);
      auto dT = as_mat(g.grad_buf(it), T.rows(), d);
      for (size_t i = 0; i < ids.size(); ++i)
        dT.row(ids[i]) += dOut.row(static_cast<Index>(i));
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::gather_cols(Var a, std::vector<int> ids) {
  Node n;
  n.owned = geocap::gather_cols(val(a.id), ids);
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia, ids = std::move(ids)](Graph& g, int self) {
      const Tensor& A = g.val(ia);
      const ArrayX& dOut = g.node(self).grad;
      ArrayX& dA = g.grad_buf(ia);
      for (size_t i = 0; i < ids.size(); ++i)
        dA[static_cast<Index>(i) * A.cols() + ids[i]] +=
            dOut[static_cast<Index>(i)];
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  std::vector<Tensor> vals;
  vals.reserve(parts.size());
  bool needs_grad = false;
  std::vector<int> pids;
  for (Var p : parts) {
    vals.push_back(val(p.id));
    needs_grad = needs_grad || node(p.id).needs_grad;
    pids.push_back(p.id);
  }
  Node n;
  n.owned = geocap::concat_cols(vals);
  n.needs_grad = needs_grad;
  if (n.needs_grad) {
    n.back = [pids = std::move(pids)](Graph& g, int self) {
      const Tensor& C = g.val(self);
      auto dC = as_mat(g.node(self).grad, C.rows(), C.cols());
      Index off = 0;
      for (int pid : pids) {
        const Tensor& P = g.val(pid);
        if (g.node(pid).needs_grad)
          as_mat(g.grad_buf(pid), P.rows(), P.cols()) +=
              dC.middleCols(off, P.cols());
        off += P.cols();
      }
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::slice0(Var a, Index i) {
  Node n;
  n.owned = geocap::slice0(val(a.id), i);
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia, i](Graph& g, int self) {
      const Index chunk = g.val(self).size();
      g.grad_buf(ia).segment(i * chunk, chunk) += g.node(self).grad;
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::col(Var a, Index j) {
  Node n;
  n.owned = geocap::col(val(a.id), j);
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia, j](Graph& g, int self) {
      const Tensor& A = g.val(ia);
      as_mat(g.grad_buf(ia), A.rows(), A.cols()).col(j) +=
          as_mat(g.node(self).grad, A.rows(), 1);
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::reshape(Var a, Shape shape) {
  Node n;
  n.owned = geocap::reshape(val(a.id), std::move(shape));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia](Graph& g, int self) { g.grad_buf(ia) += g.node(self).grad; };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::sum(Var a) {
  Node n;
  n.owned = Tensor::scalar(geocap::sum(val(a.id)));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia](Graph& g, int self) {
      g.grad_buf(ia) += g.node(self).grad[0];
    };
  }
  return {add_node(std::move(n)), this};
}

Var Graph::dot(Var a, ArrayX weights) {
  Node n;
  n.owned = Tensor::scalar(geocap::dot(val(a.id), weights));
  n.needs_grad = node(a.id).needs_grad;
  if (n.needs_grad) {
    const int ia = a.id;
    n.back = [ia, w = std::move(weights)](Graph& g, int self) {
      g.grad_buf(ia) += g.node(self).grad[0] * w;
    };
  }
  return {add_node(std::move(n)), this};
}

}  // namespace geocap
