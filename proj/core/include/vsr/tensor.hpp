#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace vsr {

// Dense row-major raster with interleaved channels, indexed (y, x, channel).
// Frames are Tensors with c == 3, flow fields with c == 2, feature maps with
// arbitrary c. Scalars are 1x1x1.
struct Tensor {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int h_, int w_, int c_)
      : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {
    assert(h_ >= 0 && w_ >= 0 && c_ >= 0);
  }

  static Tensor full(int h, int w, int c, double value) {
    Tensor t(h, w, c);
    t.v.assign(t.v.size(), value);
    return t;
  }
  static Tensor scalar(double value) { return full(1, 1, 1, value); }

  std::size_t numel() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }

  double& at(int y, int x, int ch) {
    return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch) const {
    return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  double* px(int y, int x) { return v.data() + (static_cast<std::size_t>(y) * w + x) * c; }
  const double* px(int y, int x) const {
    return v.data() + (static_cast<std::size_t>(y) * w + x) * c;
  }

  double item() const {
    assert(numel() == 1);
    return v[0];
  }

  void fill(double value) { v.assign(v.size(), value); }
};

double min_value(const Tensor& t);
double max_value(const Tensor& t);
double mean_value(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

// Elementwise clamp into [lo, hi].
Tensor clamped(const Tensor& t, double lo, double hi);

}  // namespace vsr
