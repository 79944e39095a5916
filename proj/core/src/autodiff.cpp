#include "vsr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "vsr/kernels.hpp"

namespace vsr::nn {

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->requires_grad = false;
  return n;
}

Var leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->requires_grad = requires_grad;
  return n;
}

Var detach(const Var& v) { return constant(v->val); }

namespace {

Var make_op(Tensor out, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->val = std::move(out);
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  n->requires_grad = any;
  if (any) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

void topo(Node* n, std::unordered_set<Node*>& seen, std::vector<Node*>& order) {
  if (!n->requires_grad || seen.count(n)) return;
  seen.insert(n);
  for (const auto& p : n->parents) topo(p.get(), seen, order);
  order.push_back(n);
}

}  // namespace

void backward(const Var& root) {
  if (root->val.numel() != 1)
    throw std::invalid_argument("backward: root must be a scalar");
  if (!root->requires_grad) return;
  std::unordered_set<Node*> seen;
  std::vector<Node*> order;
  topo(root.get(), seen, order);
  // Interior gradients are per-sweep scratch; only leaves accumulate across
  // backward() calls.
  for (Node* n : order)
    if (n->backprop && n->grad.numel()) n->grad.fill(0.0);
  root->g().v[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

void zero_grad(const Var& v) {
  if (v->grad.numel()) v->grad.fill(0.0);
}

Var add(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->val.v[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += n.grad.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += n.grad.v[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->val.v[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += n.grad.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] -= n.grad.v[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->val.v[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += n.grad.v[i] * b->val.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += n.grad.v[i] * a->val.v[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->val;
  for (double& x : out.v) x *= s;
  return make_op(std::move(out), {a}, [a, s](Node& n) {
    Tensor& ga = a->g();
    for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += s * n.grad.v[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->val;
  for (double& x : out.v) x += s;
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->g();
    for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += n.grad.v[i];
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int ci, int co, int stride, int pad) {
  Tensor out = kern::conv2d(x->val, w->val, b ? &b->val : nullptr, ci, co, stride, pad);
  std::vector<Var> parents = {x, w};
  if (b) parents.push_back(b);
  return make_op(std::move(out), std::move(parents), [x, w, b, ci, co, stride, pad](Node& n) {
    kern::conv2d_backward(x->val, w->val, ci, co, stride, pad, n.grad,
                          x->requires_grad ? &x->g() : nullptr,
                          w->requires_grad ? &w->g() : nullptr,
                          (b && b->requires_grad) ? &b->g() : nullptr);
  });
}

Var deconv2d_x2(const Var& x, const Var& w, const Var& b, int ci, int co) {
  Tensor out = kern::deconv2d(x->val, w->val, b ? &b->val : nullptr, ci, co);
  std::vector<Var> parents = {x, w};
  if (b) parents.push_back(b);
  return make_op(std::move(out), std::move(parents), [x, w, b, ci, co](Node& n) {
    kern::deconv2d_backward(x->val, w->val, ci, co, n.grad,
                            x->requires_grad ? &x->g() : nullptr,
                            w->requires_grad ? &w->g() : nullptr,
                            (b && b->requires_grad) ? &b->g() : nullptr);
  });
}

Var prelu(const Var& x, const Var& alpha) {
  const double a = alpha->val.item();
  Tensor out = x->val;
  for (double& v : out.v)
    if (v < 0.0) v *= a;
  return make_op(std::move(out), {x, alpha}, [x, alpha, a](Node& n) {
    if (x->requires_grad) {
      Tensor& gx = x->g();
      for (std::size_t i = 0; i < gx.v.size(); ++i)
        gx.v[i] += n.grad.v[i] * (x->val.v[i] >= 0.0 ? 1.0 : a);
    }
    if (alpha->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x->val.v.size(); ++i)
        if (x->val.v[i] < 0.0) acc += n.grad.v[i] * x->val.v[i];
      alpha->g().v[0] += acc;
    }
  });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out = x->val;
  for (double& v : out.v)
    if (v < 0.0) v *= slope;
  return make_op(std::move(out), {x}, [x, slope](Node& n) {
    Tensor& gx = x->g();
    for (std::size_t i = 0; i < gx.v.size(); ++i)
      gx.v[i] += n.grad.v[i] * (x->val.v[i] >= 0.0 ? 1.0 : slope);
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x->val;
  for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
  auto n = make_op(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* raw = n.get();
    n->backprop = [x, raw](Node& nn) {
      Tensor& gx = x->g();
      for (std::size_t i = 0; i < gx.v.size(); ++i) {
        const double s = raw->val.v[i];
        gx.v[i] += nn.grad.v[i] * s * (1.0 - s);
      }
    };
  }
  return n;
}

Var softplus(const Var& x) {
  Tensor out = x->val;
  for (double& v : out.v) v = std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
  return make_op(std::move(out), {x}, [x](Node& n) {
    Tensor& gx = x->g();
    for (std::size_t i = 0; i < gx.v.size(); ++i) {
      const double v = x->val.v[i];
      gx.v[i] += n.grad.v[i] / (1.0 + std::exp(-v));
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
  const int h = xs[0]->val.h, w = xs[0]->val.w;
  int ctot = 0;
  for (const auto& x : xs) {
    if (x->val.h != h || x->val.w != w)
      throw std::invalid_argument("concat_channels: spatial dims mismatch");
    ctot += x->val.c;
  }
  Tensor out(h, w, ctot);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double* op = out.px(y, x);
      int off = 0;
      for (const auto& t : xs) {
        const double* ip = t->val.px(y, x);
        for (int k = 0; k < t->val.c; ++k) op[off + k] = ip[k];
        off += t->val.c;
      }
    }
  return make_op(std::move(out), xs, [xs, h, w](Node& n) {
    int off = 0;
    for (const auto& t : xs) {
      if (t->requires_grad) {
        Tensor& gt = t->g();
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const double* gp = n.grad.px(y, x) + off;
            double* op = gt.px(y, x);
            for (int k = 0; k < t->val.c; ++k) op[k] += gp[k];
          }
      }
      off += t->val.c;
    }
  });
}

Var global_avg_pool(const Var& x) {
  const int h = x->val.h, w = x->val.w, c = x->val.c;
  Tensor out(1, 1, c);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      const double* p = x->val.px(y, xx);
      for (int k = 0; k < c; ++k) out.v[k] += p[k];
    }
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (double& v : out.v) v *= inv;
  return make_op(std::move(out), {x}, [x, h, w, c, inv](Node& n) {
    Tensor& gx = x->g();
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double* p = gx.px(y, xx);
        for (int k = 0; k < c; ++k) p[k] += n.grad.v[k] * inv;
      }
  });
}

Var warp(const Var& frame, const Var& flow) {
  if (flow->val.c != 2 || flow->val.h != frame->val.h || flow->val.w != frame->val.w)
    throw std::invalid_argument("warp: flow must be (h, w, 2) matching the frame");
  Tensor out = kern::warp(frame->val, flow->val);
  return make_op(std::move(out), {frame, flow}, [frame, flow](Node& n) {
    kern::warp_backward(frame->val, flow->val, n.grad,
                        frame->requires_grad ? &frame->g() : nullptr,
                        flow->requires_grad ? &flow->g() : nullptr);
  });
}

Var resize_bilinear(const Var& x, int oh, int ow) {
  Tensor out = kern::resize_bilinear(x->val, oh, ow);
  return make_op(std::move(out), {x}, [x, oh, ow](Node& n) {
    kern::resize_bilinear_backward(x->val, oh, ow, n.grad, &x->g());
  });
}

Var bicubic_upsample(const Var& x, int scale) {
  Tensor out = kern::bicubic_upsample(x->val, scale);
  return make_op(std::move(out), {x}, [x, scale](Node& n) {
    kern::bicubic_upsample_backward(x->val, scale, n.grad, &x->g());
  });
}

Var scale_channels(const Var& x, std::vector<double> factors) {
  if (static_cast<int>(factors.size()) != x->val.c)
    throw std::invalid_argument("scale_channels: factor count must equal channel count");
  Tensor out = x->val;
  const int c = out.c;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= factors[i % c];
  return make_op(std::move(out), {x}, [x, factors, c](Node& n) {
    Tensor& gx = x->g();
    for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += n.grad.v[i] * factors[i % c];
  });
}

Var mean_all(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x->val.numel());
  double s = 0.0;
  for (double v : x->val.v) s += v;
  return make_op(Tensor::scalar(s * inv), {x}, [x, inv](Node& n) {
    const double g = n.grad.v[0] * inv;
    Tensor& gx = x->g();
    for (double& v : gx.v) v += g;
  });
}

Var mse(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("mse: shape mismatch");
  const double inv = 1.0 / static_cast<double>(a->val.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < a->val.v.size(); ++i) {
    const double d = a->val.v[i] - b->val.v[i];
    s += d * d;
  }
  return make_op(Tensor::scalar(s * inv), {a, b}, [a, b, inv](Node& n) {
    const double g = 2.0 * n.grad.v[0] * inv;
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (std::size_t i = 0; i < ga.v.size(); ++i)
        ga.v[i] += g * (a->val.v[i] - b->val.v[i]);
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (std::size_t i = 0; i < gb.v.size(); ++i)
        gb.v[i] -= g * (a->val.v[i] - b->val.v[i]);
    }
  });
}

Var dot_all(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw std::invalid_argument("dot_all: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a->val.v.size(); ++i) s += a->val.v[i] * b->val.v[i];
  return make_op(Tensor::scalar(s), {a, b}, [a, b](Node& n) {
    const double g = n.grad.v[0];
    if (a->requires_grad) {
      Tensor& ga = a->g();
      for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g * b->val.v[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += g * a->val.v[i];
    }
  });
}

Var cosine_similarity(const Var& a, const Var& b, double eps) {
  if (!a->val.same_shape(b->val))
    throw std::invalid_argument("cosine_similarity: shape mismatch");
  double d = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < a->val.v.size(); ++i) {
    d += a->val.v[i] * b->val.v[i];
    na2 += a->val.v[i] * a->val.v[i];
    nb2 += b->val.v[i] * b->val.v[i];
  }
  const double na = std::sqrt(na2), nb = std::sqrt(nb2);
  const double den = na * nb + eps;
  const double cos = d / den;
  return make_op(Tensor::scalar(cos), {a, b}, [a, b, d, na, nb, den, cos](Node& n) {
    const double g = n.grad.v[0];
    if (a->requires_grad) {
      Tensor& ga = a->g();
      const double k = (na > 0.0) ? cos * nb / (den * na) : 0.0;
      for (std::size_t i = 0; i < ga.v.size(); ++i)
        ga.v[i] += g * (b->val.v[i] / den - k * a->val.v[i]);
    }
    if (b->requires_grad) {
      Tensor& gb = b->g();
      const double k = (nb > 0.0) ? cos * na / (den * nb) : 0.0;
      for (std::size_t i = 0; i < gb.v.size(); ++i)
        gb.v[i] += g * (a->val.v[i] / den - k * b->val.v[i]);
    }
  });
}

double numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        std::size_t idx, double step) {
  Tensor xp = x, xm = x;
  xp.v[idx] += step;
  xm.v[idx] -= step;
  return (f(xp) - f(xm)) / (2.0 * step);
}

}  // namespace vsr::nn
