#include "geocap/geometry.hpp"

#include <cmath>
#include <string>

namespace geocap {

void Box::validate() const {
  if (!(w > 0) || !(h > 0))
    throw InvalidBoxError("box has non-positive size w=" + std::to_string(w) +
                          " h=" + std::to_string(h));
  if (cx < 0 || cx > 1 || cy < 0 || cy > 1)
    throw InvalidBoxError("box center (" + std::to_string(cx) + ", " +
                          std::to_string(cy) + ") outside [0,1]");
}

Tensor relative_geometry(const std::vector<Box>& boxes, Scalar eps_center,
                         Scalar log_base) {
  if (boxes.empty()) throw EmptyDetectionsError("relative_geometry: no boxes");
  if (!(eps_center > 0))
    throw ConfigError("relative_geometry: eps_center must be positive");
  for (const Box& b : boxes) b.validate();

  const Index n = static_cast<Index>(boxes.size());
  const Scalar log_scale = 1.0 / std::log(log_base);
  Tensor delta({n, n, 4});
  for (Index i = 0; i < n; ++i) {
    const Box& a = boxes[static_cast<size_t>(i)];
    for (Index j = 0; j < n; ++j) {
      const Box& b = boxes[static_cast<size_t>(j)];
      const Scalar dx = std::max(std::abs(b.cx - a.cx) / a.w, eps_center);
      const Scalar dy = std::max(std::abs(b.cy - a.cy) / a.h, eps_center);
      delta.at3(i, j, 0) = std::log(dx) * log_scale;
      delta.at3(i, j, 1) = std::log(dy) * log_scale;
      delta.at3(i, j, 2) = std::log(b.w / a.w) * log_scale;
      delta.at3(i, j, 3) = std::log(b.h / a.h) * log_scale;
    }
  }
  return delta;
}

Tensor sinusoid_embed(const Tensor& delta, Index d_g) {
  if (d_g < 2 || d_g % 2 != 0)
    throw ConfigError("sinusoid_embed: d_g must be even and >= 2, got " +
                      std::to_string(d_g));
  if (delta.rank() != 3 || delta.dim(2) != 4)
    throw ShapeError("sinusoid_embed: expected N x N x 4, got " +
                     shape_str(delta.shape()));
  const Index n = delta.dim(0);
  const Index half = d_g / 2;

  ArrayX inv_wavelength(half);
  for (Index i = 0; i < half; ++i)
    inv_wavelength[i] =
        std::pow(1000.0, -2.0 * static_cast<Scalar>(i) / static_cast<Scalar>(d_g));

  Tensor out({n, n, 4 * d_g});
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      Scalar* row = out.data() + (i * n + j) * 4 * d_g;
      for (Index c = 0; c < 4; ++c) {
        const Scalar v = delta.at3(i, j, c);
        Scalar* enc = row + c * d_g;
        for (Index k = 0; k < half; ++k) {
          enc[k] = std::sin(v * inv_wavelength[k]);
          enc[half + k] = std::cos(v * inv_wavelength[k]);
        }
      }
    }
  }
  return out;
}

Tensor flatten_pairs(const Tensor& emb) {
  if (emb.rank() != 3)
    throw ShapeError("flatten_pairs: expected rank 3, got " +
                     shape_str(emb.shape()));
  return reshape(emb, {emb.dim(0) * emb.dim(1), emb.dim(2)});
}

Tensor geometric_bias(const Tensor& emb, const Tensor& w_g) {
  const Tensor flat = flatten_pairs(emb);  // N^2 x K
  if (w_g.rank() != 2 || w_g.cols() != flat.cols())
    throw ShapeError("geometric_bias: emb " + shape_str(emb.shape()) +
                     " vs W_G " + shape_str(w_g.shape()));
  const Index n = emb.dim(0);
  const Index heads = w_g.rows();
  const Tensor pre = matmul(flat, transpose(w_g));  // N^2 x H
  Tensor out({heads, n, n});
  for (Index h = 0; h < heads; ++h)
    for (Index p = 0; p < n * n; ++p)
      out.array()[h * n * n + p] = std::max(pre(p, h), 0.0);
  return out;
}

std::vector<Var> geometric_bias_heads(Graph& g, Var emb_flat, Var w_g,
                                      Index n) {
  const Index heads = w_g.value().rows();
  Var pre = g.relu(g.matmul(emb_flat, g.transpose(w_g)));  // N^2 x H
  std::vector<Var> out;
  out.reserve(static_cast<size_t>(heads));
  for (Index h = 0; h < heads; ++h)
    out.push_back(g.reshape(g.col(pre, h), {n, n}));
  return out;
}

}  // namespace geocap
