#pragma once

#include <vector>

#include "geocap/graph.hpp"
#include "geocap/rng.hpp"
#include "geocap/tensor.hpp"

namespace geocap {

// Per-head projections. W_q/W_k/W_v are d_model x d_k, one per head; W_o maps
// the concatenated heads (H*d_k) back to d_model.
struct HeadParams {
  std::vector<Tensor> w_q, w_k, w_v;
  Tensor w_o;
  Index num_heads() const { return static_cast<Index>(w_q.size()); }
};

// theta_A = Q K^T / sqrt(d_k)
Tensor scaled_logits(const Tensor& q, const Tensor& k);

// Gated attention weights for one head:
//   theta = (theta_g + eps_g) * exp(theta_a - rowmax) , row-normalized over
// unmasked positions. Equals theta_g*exp(theta_a)/sum(theta_g*exp(theta_a))
// whenever theta_g > 0 and nothing is masked; the eps_g floor keeps rows
// well-defined when ReLU zeroes an entire gate row. With a constant gate the
// gate cancels and the result is exactly softmax(theta_a).
Tensor gated_attention_weights(const Tensor& theta_a, const Tensor& theta_g,
                               const Mask* mask = nullptr, Scalar eps_g = 1e-6);

// Position (i, j) allowed iff j <= i.
Mask causal_mask(Index len);

// Inverted-dropout helper; masks are graph constants so decode paths stay
// deterministic when rate == 0 or no RNG is attached.
struct DropoutCtx {
  Scalar rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
  Tensor mask(Index rows, Index cols) const;
};

struct AttentionVars {
  std::vector<Var> w_q, w_k, w_v;
  Var w_o;
};

// Differentiable multi-head attention. `gate_heads`, when present, holds one
// N_q x N_k gate per head; gating is folded into the logits as
// log(theta_g + eps_g) so softmax_rows realizes the gated normalization.
Var multi_head_attention(Graph& g, Var x_q, Var x_kv,
                         const std::vector<Var>* gate_heads, const Mask* mask,
                         const AttentionVars& params, Scalar eps_g = 1e-6,
                         const DropoutCtx* dropout = nullptr);

// Forward-only wrapper over the graph route; theta_g is H x N x N or null.
Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv,
                            const Tensor* theta_g, const Mask* mask,
                            const HeadParams& params, Scalar eps_g = 1e-6);

}  // namespace geocap
