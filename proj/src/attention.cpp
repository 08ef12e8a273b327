#include "geocap/attention.hpp"

#include <cmath>
#include <string>

namespace geocap {

Tensor scaled_logits(const Tensor& q, const Tensor& k) {
  if (q.cols() != k.cols())
    throw ShapeError("scaled_logits: d_k mismatch, Q " + shape_str(q.shape()) +
                     " vs K " + shape_str(k.shape()));
  const Scalar inv = 1.0 / std::sqrt(static_cast<Scalar>(q.cols()));
  return scale(matmul(q, transpose(k)), inv);
}

Tensor gated_attention_weights(const Tensor& theta_a, const Tensor& theta_g,
                               const Mask* mask, Scalar eps_g) {
  if (!theta_a.same_shape(theta_g))
    throw ShapeError("gated_attention_weights: theta_a " +
                     shape_str(theta_a.shape()) + " vs theta_g " +
                     shape_str(theta_g.shape()));
  if (!(eps_g > 0))
    throw ConfigError("gated_attention_weights: eps_g must be positive");
  const Index r = theta_a.rows(), c = theta_a.cols();
  if (mask && (mask->rows() != r || mask->cols() != c))
    throw ShapeError("gated_attention_weights: mask shape mismatch");
  Tensor out({r, c});
  for (Index i = 0; i < r; ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < c; ++j)
      if (!mask || mask->at(i, j)) m = std::max(m, theta_a(i, j));
    if (!std::isfinite(m))
      throw DegenerateRowError("gated_attention_weights: row " +
                               std::to_string(i) + " fully masked");
    Scalar s = 0;
    for (Index j = 0; j < c; ++j) {
      if (!mask || mask->at(i, j)) {
        out(i, j) = (theta_g(i, j) + eps_g) * std::exp(theta_a(i, j) - m);
        s += out(i, j);
      } else {
        out(i, j) = 0.0;
      }
    }
    for (Index j = 0; j < c; ++j) out(i, j) /= s;
  }
  return out;
}

Mask causal_mask(Index len) {
  if (len < 1) throw ConfigError("causal_mask: len must be >= 1");
  Mask m(len, len, false);
  for (Index i = 0; i < len; ++i)
    for (Index j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

Tensor DropoutCtx::mask(Index rows, Index cols) const {
  Tensor m = Tensor::full({rows, cols}, 1.0);
  if (!active()) return m;
  const Scalar keep = 1.0 - rate;
  for (Index i = 0; i < m.size(); ++i)
    m.array()[i] = rng->uniform() < rate ? 0.0 : 1.0 / keep;
  return m;
}

Var multi_head_attention(Graph& g, Var x_q, Var x_kv,
                         const std::vector<Var>* gate_heads, const Mask* mask,
                         const AttentionVars& params, Scalar eps_g,
                         const DropoutCtx* dropout) {
  const size_t heads = params.w_q.size();
  if (gate_heads && gate_heads->size() != heads)
    throw ShapeError("multi_head_attention: " +
                     std::to_string(gate_heads->size()) + " gates for " +
                     std::to_string(heads) + " heads");
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (size_t h = 0; h < heads; ++h) {
    Var q = g.matmul(x_q, params.w_q[h]);
    Var k = g.matmul(x_kv, params.w_k[h]);
    Var v = g.matmul(x_kv, params.w_v[h]);
    const Scalar inv = 1.0 / std::sqrt(static_cast<Scalar>(q.shape()[1]));
    Var logits = g.scale(g.matmul(q, g.transpose(k)), inv);
    if (gate_heads)
      logits = g.add(logits, g.log(g.add_scalar((*gate_heads)[h], eps_g)));
    Var w = g.softmax_rows(logits, mask);
    if (dropout && dropout->active()) {
      const Tensor& wv = w.value();
      w = g.mul(w, g.constant(dropout->mask(wv.rows(), wv.cols())));
    }
    outputs.push_back(g.matmul(w, v));
  }
  return g.matmul(g.concat_cols(outputs), params.w_o);
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv,
                            const Tensor* theta_g, const Mask* mask,
                            const HeadParams& params, Scalar eps_g) {
  Graph g;
  AttentionVars vars;
  for (size_t h = 0; h < params.w_q.size(); ++h) {
    vars.w_q.push_back(g.constant(params.w_q[h]));
    vars.w_k.push_back(g.constant(params.w_k[h]));
    vars.w_v.push_back(g.constant(params.w_v[h]));
  }
  vars.w_o = g.constant(params.w_o);
  Var q = g.constant(x_q);
  Var kv = g.constant(x_kv);
  std::vector<Var> gates;
  if (theta_g) {
    if (theta_g->rank() != 3 ||
        theta_g->dim(0) != static_cast<Index>(params.w_q.size()))
      throw ShapeError("multi_head_attention: theta_g " +
                       shape_str(theta_g->shape()) + " does not match " +
                       std::to_string(params.w_q.size()) + " heads");
    for (Index h = 0; h < theta_g->dim(0); ++h)
      gates.push_back(g.constant(slice0(*theta_g, h)));
  }
  Var out = multi_head_attention(g, q, kv, theta_g ? &gates : nullptr, mask,
                                 vars, eps_g, nullptr);
  return out.value();
}

}  // namespace geocap
