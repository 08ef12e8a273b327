#pragma once

#include <functional>
#include <vector>

#include "geocap/tensor.hpp"

namespace geocap {

class Graph;

// Handle to a node in a Graph; cheap to copy, valid while the graph lives.
struct Var {
  int id = -1;
  Graph* graph = nullptr;
  bool valid() const { return id >= 0 && graph != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in execution order, so the record is
// topologically sorted by construction; backward() walks it once in reverse.
// A Graph is confined to one thread of execution.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // External tensor (parameter or input). Must outlive the graph; backward()
  // accumulates into its `grad` when requires_grad is set.
  Var leaf(Tensor& t);
  // Graph-owned value that is never differentiated.
  Var constant(Tensor t);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return node(v.id).needs_grad; }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse, visiting each
  // operation exactly once. Every requires_grad leaf ends up with a grad
  // array (zeros when the loss does not reach it). May be called once.
  void backward(Var loss);

  // Node-level gradient after backward(); zeros if the node was unreachable.
  ArrayX grad(Var v) const;

  size_t size() const { return nodes_.size(); }

 private:
  friend Var wrap_unary(Var, Tensor, std::function<void(const ArrayX&, ArrayX&)>);
  friend class GraphOps;

  struct Node {
    Tensor owned;               // value for interior/constant nodes
    Tensor* external = nullptr; // leaf storage
    bool needs_grad = false;
    ArrayX grad;                // lazily allocated; empty means untouched
    std::function<void(Graph&, int)> back;  // pulls this->grad into parents
  };

  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  const Tensor& val(int id) const {
    const Node& n = node(id);
    return n.external ? *n.external : n.owned;
  }
  ArrayX& grad_buf(int id);

  int add_node(Node n);
  bool backward_done_ = false;
  std::vector<Node> nodes_;

 public:
  // Op builders. Forward values come from the eager kernels in tensor.hpp;
  // each builder registers the matching backward rule.
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, Scalar c);
  Var add_scalar(Var a, Scalar c);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var add_rowvec(Var m, Var v);
  Var softmax_rows(Var a, const Mask* mask = nullptr);
  Var log_softmax_rows(Var a);
  Var layer_norm(Var x, Var gain, Var bias, Scalar eps = 1e-5);
  Var embed_rows(Var table, std::vector<int> ids);
  Var gather_cols(Var a, std::vector<int> ids);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice0(Var a, Index i);
  Var col(Var a, Index j);
  Var reshape(Var a, Shape shape);
  Var sum(Var a);
  Var dot(Var a, ArrayX weights);
};

inline Var operator+(Var a, Var b) { return a.graph->add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
inline Var operator*(Var a, Scalar c) { return a.graph->scale(a, c); }
inline Var operator*(Scalar c, Var a) { return a.graph->scale(a, c); }

}  // namespace geocap
