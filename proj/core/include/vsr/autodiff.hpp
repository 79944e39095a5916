#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vsr/tensor.hpp"

// Reverse-mode autodiff over dynamically built graphs. Vars are shared
// handles to graph nodes; a node keeps its parents alive, so dropping the
// root frees the whole tape. Parameters are leaf nodes that outlive tapes
// and accumulate gradients across backward() calls until zeroed.
namespace vsr::nn {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

  Tensor& g() {
    if (grad.numel() != val.numel()) grad = Tensor(val.h, val.w, val.c);
    return grad;
  }
};

Var constant(Tensor t);
Var leaf(Tensor t, bool requires_grad = true);

// Cuts the graph: returns a constant with a copy of v's value.
Var detach(const Var& v);

// Runs reverse accumulation from a scalar root (seed gradient 1).
void backward(const Var& root);

void zero_grad(const Var& v);

// ---- ops ----------------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// Convolutions; weight packing is (kh, kw, ci*co), see kernels.hpp.
Var conv2d(const Var& x, const Var& w, const Var& b, int ci, int co, int stride, int pad);
Var deconv2d_x2(const Var& x, const Var& w, const Var& b, int ci, int co);

Var prelu(const Var& x, const Var& alpha);     // alpha: (1,1,1) learnable slope
Var leaky_relu(const Var& x, double slope);
Var sigmoid(const Var& x);
Var softplus(const Var& x);  // numerically stable log(1 + e^x)

Var concat_channels(const std::vector<Var>& xs);
Var global_avg_pool(const Var& x);  // (h,w,c) -> (1,1,c)

Var warp(const Var& frame, const Var& flow);
Var resize_bilinear(const Var& x, int oh, int ow);
Var bicubic_upsample(const Var& x, int scale);

// Per-channel constant scaling (e.g. rescaling flow vectors after resize).
Var scale_channels(const Var& x, std::vector<double> factors);

Var mean_all(const Var& x);                  // scalar
Var mse(const Var& a, const Var& b);         // scalar mean squared difference
Var dot_all(const Var& a, const Var& b);     // scalar <a, b>

// Scalar cosine similarity of the flattened tensors with an epsilon guard in
// the denominator.
Var cosine_similarity(const Var& a, const Var& b, double eps = 1e-8);

// Numerical gradient of a scalar-valued function w.r.t. x.v[idx] by central
// differences; shared by the test suites.
double numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        std::size_t idx, double step = 1e-4);

}  // namespace vsr::nn
