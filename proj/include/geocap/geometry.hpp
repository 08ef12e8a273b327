#pragma once

#include <vector>

#include "geocap/graph.hpp"
#include "geocap/tensor.hpp"

namespace geocap {

// Detected object box, normalized to the image extent.
struct Box {
  Scalar cx = 0, cy = 0, w = 0, h = 0;
  void validate() const;
};

// Pairwise log-scale relative displacement of N boxes, shape N x N x 4:
//   delta(n,p) = ( log(max(|cx_p-cx_n| / w_n, eps_center)),
//                  log(max(|cy_p-cy_n| / h_n, eps_center)),
//                  log(w_p / w_n),
//                  log(h_p / h_n) )
// Center offsets are normalized by the query box size before the floor is
// applied, so the whole feature is invariant under translating and uniformly
// scaling the scene. log base 10 by default, configurable to natural log.
Tensor relative_geometry(const std::vector<Box>& boxes,
                         Scalar eps_center = 1e-3, Scalar log_base = 10.0);

// Sinusoidal embedding of each delta component: d_g/2 sine then d_g/2 cosine
// channels at wavelengths 1000^(2i/d_g), concatenated over the 4 components.
// Input N x N x 4, output N x N x (4*d_g); every entry lies in [-1, 1].
Tensor sinusoid_embed(const Tensor& delta, Index d_g = 64);

// Per-head geometric gate: theta_g[h][n][p] = relu(sum_k emb[n][p][k] W_G[h][k]).
// emb is N x N x K, w_g is H x K, result H x N x N, all entries >= 0.
Tensor geometric_bias(const Tensor& emb, const Tensor& w_g);

// Differentiable route for the gate: returns one N x N slice per head so the
// attention builder can gate each head. `emb_flat` is the N^2 x K constant.
std::vector<Var> geometric_bias_heads(Graph& g, Var emb_flat, Var w_g, Index n);

// emb reshaped to N^2 x K for the graph route.
Tensor flatten_pairs(const Tensor& emb);

}  // namespace geocap
