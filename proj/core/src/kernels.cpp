#include "vsr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsr::kern {

namespace {

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Mirror an index into [0, n) with edge-including (symmetric) reflection.
int reflect_sym(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

double cubic_keys(double d) {
  // Keys cubic kernel with a = -0.5.
  const double a = -0.5;
  d = std::fabs(d);
  if (d < 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
  if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
  return 0.0;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& wt, const Tensor* bias, int ci, int co,
              int stride, int pad) {
  if (x.c != ci || wt.c != ci * co)
    throw std::invalid_argument("conv2d: channel/weight packing mismatch");
  const int kh = wt.h, kw = wt.w;
  const int oh = conv_out_dim(x.h, kh, stride, pad);
  const int ow = conv_out_dim(x.w, kw, stride, pad);
  Tensor out(oh, ow, co);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* orow = out.px(oy, ox);
      if (bias) {
        for (int o = 0; o < co; ++o) orow[o] = bias->v[o];
      }
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= x.h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= x.w) continue;
          const double* xp = x.px(iy, ix);
          const double* wp = wt.px(ky, kx);
          for (int i = 0; i < ci; ++i) {
            const double xv = xp[i];
            const double* wr = wp + static_cast<std::size_t>(i) * co;
            for (int o = 0; o < co; ++o) orow[o] += xv * wr[o];
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& wt, int ci, int co, int stride, int pad,
                     const Tensor& gout, Tensor* gx, Tensor* gw, Tensor* gb) {
  const int kh = wt.h, kw = wt.w;
  const int oh = gout.h, ow = gout.w;
  if (gb) {
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const double* gp = gout.px(oy, ox);
        for (int o = 0; o < co; ++o) gb->v[o] += gp[o];
      }
  }
  if (!gx && !gw) return;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* gp = gout.px(oy, ox);
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= x.h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= x.w) continue;
          const double* xp = x.px(iy, ix);
          const double* wp = wt.px(ky, kx);
          double* gxp = gx ? gx->px(iy, ix) : nullptr;
          double* gwp = gw ? gw->px(ky, kx) : nullptr;
          for (int i = 0; i < ci; ++i) {
            const double xv = xp[i];
            const double* wr = wp + static_cast<std::size_t>(i) * co;
            double acc = 0.0;
            if (gwp) {
              double* gwr = gwp + static_cast<std::size_t>(i) * co;
              for (int o = 0; o < co; ++o) {
                acc += gp[o] * wr[o];
                gwr[o] += xv * gp[o];
              }
            } else {
              for (int o = 0; o < co; ++o) acc += gp[o] * wr[o];
            }
            if (gxp) gxp[i] += acc;
          }
        }
      }
    }
  }
}

Tensor deconv2d(const Tensor& x, const Tensor& wt, const Tensor* bias, int ci, int co) {
  // k = 4, stride = 2, pad = 1: output is exactly (2h, 2w).
  if (wt.h != 4 || wt.w != 4 || wt.c != ci * co || x.c != ci)
    throw std::invalid_argument("deconv2d: expects a 4x4 kernel and matching channel packing");
  const int oh = x.h * 2, ow = x.w * 2;
  Tensor out(oh, ow, co);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* orow = out.px(oy, ox);
      if (bias) {
        for (int o = 0; o < co; ++o) orow[o] = bias->v[o];
      }
      for (int ky = 0; ky < 4; ++ky) {
        const int ty = oy + 1 - ky;
        if (ty < 0 || (ty & 1)) continue;
        const int iy = ty >> 1;
        if (iy >= x.h) continue;
        for (int kx = 0; kx < 4; ++kx) {
          const int tx = ox + 1 - kx;
          if (tx < 0 || (tx & 1)) continue;
          const int ix = tx >> 1;
          if (ix >= x.w) continue;
          const double* xp = x.px(iy, ix);
          const double* wp = wt.px(ky, kx);
          for (int i = 0; i < ci; ++i) {
            const double xv = xp[i];
            const double* wr = wp + static_cast<std::size_t>(i) * co;
            for (int o = 0; o < co; ++o) orow[o] += xv * wr[o];
          }
        }
      }
    }
  }
  return out;
}

void deconv2d_backward(const Tensor& x, const Tensor& wt, int ci, int co, const Tensor& gout,
                       Tensor* gx, Tensor* gw, Tensor* gb) {
  const int oh = gout.h, ow = gout.w;
  if (gb) {
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const double* gp = gout.px(oy, ox);
        for (int o = 0; o < co; ++o) gb->v[o] += gp[o];
      }
  }
  if (!gx && !gw) return;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* gp = gout.px(oy, ox);
      for (int ky = 0; ky < 4; ++ky) {
        const int ty = oy + 1 - ky;
        if (ty < 0 || (ty & 1)) continue;
        const int iy = ty >> 1;
        if (iy >= x.h) continue;
        for (int kx = 0; kx < 4; ++kx) {
          const int tx = ox + 1 - kx;
          if (tx < 0 || (tx & 1)) continue;
          const int ix = tx >> 1;
          if (ix >= x.w) continue;
          const double* xp = x.px(iy, ix);
          const double* wp = wt.px(ky, kx);
          double* gxp = gx ? gx->px(iy, ix) : nullptr;
          double* gwp = gw ? gw->px(ky, kx) : nullptr;
          for (int i = 0; i < ci; ++i) {
            const double xv = xp[i];
            const double* wr = wp + static_cast<std::size_t>(i) * co;
            double acc = 0.0;
            if (gwp) {
              double* gwr = gwp + static_cast<std::size_t>(i) * co;
              for (int o = 0; o < co; ++o) {
                acc += gp[o] * wr[o];
                gwr[o] += xv * gp[o];
              }
            } else {
              for (int o = 0; o < co; ++o) acc += gp[o] * wr[o];
            }
            if (gxp) gxp[i] += acc;
          }
        }
      }
    }
  }
}

Tensor warp(const Tensor& frame, const Tensor& flow) {
  assert(flow.c == 2 && flow.h == frame.h && flow.w == frame.w);
  const int h = frame.h, w = frame.w, c = frame.c;
  Tensor out(h, w, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(x + flow.at(y, x, 0), 0.0, static_cast<double>(w - 1));
      const double sy = std::clamp(y + flow.at(y, x, 1), 0.0, static_cast<double>(h - 1));
      const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
      const double w10 = (1 - fx) * fy, w11 = fx * fy;
      const double* p00 = frame.px(y0, x0);
      const double* p01 = frame.px(y0, x1);
      const double* p10 = frame.px(y1, x0);
      const double* p11 = frame.px(y1, x1);
      double* op = out.px(y, x);
      for (int k = 0; k < c; ++k)
        op[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
    }
  }
  return out;
}

void warp_backward(const Tensor& frame, const Tensor& flow, const Tensor& gout,
                   Tensor* gframe, Tensor* gflow) {
  const int h = frame.h, w = frame.w, c = frame.c;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double rx = x + flow.at(y, x, 0);
      const double ry = y + flow.at(y, x, 1);
      const bool cx = rx <= 0.0 || rx >= w - 1;  // clamped: no flow gradient
      const bool cy = ry <= 0.0 || ry >= h - 1;
      const double sx = std::clamp(rx, 0.0, static_cast<double>(w - 1));
      const double sy = std::clamp(ry, 0.0, static_cast<double>(h - 1));
      const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      const double* gp = gout.px(y, x);
      if (gframe) {
        const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
        const double w10 = (1 - fx) * fy, w11 = fx * fy;
        double* g00 = gframe->px(y0, x0);
        double* g01 = gframe->px(y0, x1);
        double* g10 = gframe->px(y1, x0);
        double* g11 = gframe->px(y1, x1);
        for (int k = 0; k < c; ++k) {
          const double g = gp[k];
          g00[k] += w00 * g;
          g01[k] += w01 * g;
          g10[k] += w10 * g;
          g11[k] += w11 * g;
        }
      }
      if (gflow) {
        double ddx = 0.0, ddy = 0.0;
        const double* p00 = frame.px(y0, x0);
        const double* p01 = frame.px(y0, x1);
        const double* p10 = frame.px(y1, x0);
        const double* p11 = frame.px(y1, x1);
        for (int k = 0; k < c; ++k) {
          const double g = gp[k];
          ddx += g * ((1 - fy) * (p01[k] - p00[k]) + fy * (p11[k] - p10[k]));
          ddy += g * ((1 - fx) * (p10[k] - p00[k]) + fx * (p11[k] - p01[k]));
        }
        if (!cx) gflow->at(y, x, 0) += ddx;
        if (!cy) gflow->at(y, x, 1) += ddy;
      }
    }
  }
}

namespace {

struct LinTap {
  int i0, i1;
  double f;  // weight of i1
};

std::vector<LinTap> linear_taps(int in, int out) {
  std::vector<LinTap> taps(out);
  const double r = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * r - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    int i0 = std::min(static_cast<int>(std::floor(s)), in - 1);
    int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int oh, int ow) {
  const auto ty = linear_taps(x.h, oh);
  const auto tx = linear_taps(x.w, ow);
  Tensor out(oh, ow, x.c);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const auto& a = ty[oy];
      const auto& b = tx[ox];
      const double* p00 = x.px(a.i0, b.i0);
      const double* p01 = x.px(a.i0, b.i1);
      const double* p10 = x.px(a.i1, b.i0);
      const double* p11 = x.px(a.i1, b.i1);
      double* op = out.px(oy, ox);
      const double w00 = (1 - a.f) * (1 - b.f), w01 = (1 - a.f) * b.f;
      const double w10 = a.f * (1 - b.f), w11 = a.f * b.f;
      for (int k = 0; k < x.c; ++k)
        op[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
    }
  }
  return out;
}

void resize_bilinear_backward(const Tensor& x, int oh, int ow, const Tensor& gout, Tensor* gx) {
  const auto ty = linear_taps(x.h, oh);
  const auto tx = linear_taps(x.w, ow);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const auto& a = ty[oy];
      const auto& b = tx[ox];
      const double w00 = (1 - a.f) * (1 - b.f), w01 = (1 - a.f) * b.f;
      const double w10 = a.f * (1 - b.f), w11 = a.f * b.f;
      const double* gp = gout.px(oy, ox);
      double* g00 = gx->px(a.i0, b.i0);
      double* g01 = gx->px(a.i0, b.i1);
      double* g10 = gx->px(a.i1, b.i0);
      double* g11 = gx->px(a.i1, b.i1);
      for (int k = 0; k < x.c; ++k) {
        const double g = gp[k];
        g00[k] += w00 * g;
        g01[k] += w01 * g;
        g10[k] += w10 * g;
        g11[k] += w11 * g;
      }
    }
  }
}

namespace {

struct CubicTaps {
  int idx[4];
  double w[4];
};

std::vector<CubicTaps> cubic_up_taps(int in, int scale) {
  const int out = in * scale;
  std::vector<CubicTaps> taps(out);
  for (int o = 0; o < out; ++o) {
    const double s = (o + 0.5) / scale - 0.5;
    const int base = static_cast<int>(std::floor(s));
    for (int t = 0; t < 4; ++t) {
      const int i = base - 1 + t;
      taps[o].idx[t] = std::clamp(i, 0, in - 1);
      taps[o].w[t] = cubic_keys(s - i);
    }
  }
  return taps;
}

}  // namespace

Tensor bicubic_upsample(const Tensor& x, int scale) {
  if (scale < 1) throw std::invalid_argument("bicubic_upsample: scale must be >= 1");
  const auto ty = cubic_up_taps(x.h, scale);
  const auto tx = cubic_up_taps(x.w, scale);
  Tensor out(x.h * scale, x.w * scale, x.c);
  for (int oy = 0; oy < out.h; ++oy) {
    for (int ox = 0; ox < out.w; ++ox) {
      double* op = out.px(oy, ox);
      for (int a = 0; a < 4; ++a) {
        const double wy = ty[oy].w[a];
        if (wy == 0.0) continue;
        const int iy = ty[oy].idx[a];
        for (int b = 0; b < 4; ++b) {
          const double wgt = wy * tx[ox].w[b];
          if (wgt == 0.0) continue;
          const double* ip = x.px(iy, tx[ox].idx[b]);
          for (int k = 0; k < x.c; ++k) op[k] += wgt * ip[k];
        }
      }
    }
  }
  return out;
}

void bicubic_upsample_backward(const Tensor& x, int scale, const Tensor& gout, Tensor* gx) {
  const auto ty = cubic_up_taps(x.h, scale);
  const auto tx = cubic_up_taps(x.w, scale);
  for (int oy = 0; oy < gout.h; ++oy) {
    for (int ox = 0; ox < gout.w; ++ox) {
      const double* gp = gout.px(oy, ox);
      for (int a = 0; a < 4; ++a) {
        const double wy = ty[oy].w[a];
        if (wy == 0.0) continue;
        const int iy = ty[oy].idx[a];
        for (int b = 0; b < 4; ++b) {
          const double wgt = wy * tx[ox].w[b];
          if (wgt == 0.0) continue;
          double* ip = gx->px(iy, tx[ox].idx[b]);
          for (int k = 0; k < x.c; ++k) ip[k] += wgt * gp[k];
        }
      }
    }
  }
}

Tensor bicubic_downsample(const Tensor& x, int scale) {
  if (scale < 1) throw std::invalid_argument("bicubic_downsample: scale must be >= 1");
  if (x.h % scale != 0 || x.w % scale != 0)
    throw std::invalid_argument("bicubic_downsample: dims must be divisible by scale");
  const int oh = x.h / scale, ow = x.w / scale;
  const int radius = 2 * scale;  // kernel support stretched by the factor

  struct Taps {
    std::vector<int> idx;
    std::vector<double> w;
  };
  auto make_taps = [&](int in, int out) {
    std::vector<Taps> taps(out);
    for (int o = 0; o < out; ++o) {
      const double s = (o + 0.5) * scale - 0.5;
      const int lo = static_cast<int>(std::ceil(s - radius));
      const int hi = static_cast<int>(std::floor(s + radius));
      double sum = 0.0;
      for (int i = lo; i <= hi; ++i) {
        const double wgt = cubic_keys((s - i) / scale);
        if (wgt == 0.0) continue;
        taps[o].idx.push_back(std::clamp(i, 0, in - 1));
        taps[o].w.push_back(wgt);
        sum += wgt;
      }
      for (double& wgt : taps[o].w) wgt /= sum;
    }
    return taps;
  };
  const auto ty = make_taps(x.h, oh);
  const auto tx = make_taps(x.w, ow);

  // Separable: filter rows into an intermediate, then columns.
  Tensor tmp(x.h, ow, x.c);
  for (int y = 0; y < x.h; ++y)
    for (int ox = 0; ox < ow; ++ox) {
      double* op = tmp.px(y, ox);
      const auto& t = tx[ox];
      for (std::size_t i = 0; i < t.idx.size(); ++i) {
        const double* ip = x.px(y, t.idx[i]);
        const double wgt = t.w[i];
        for (int k = 0; k < x.c; ++k) op[k] += wgt * ip[k];
      }
    }
  Tensor out(oh, ow, x.c);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      double* op = out.px(oy, ox);
      const auto& t = ty[oy];
      for (std::size_t i = 0; i < t.idx.size(); ++i) {
        const double* ip = tmp.px(t.idx[i], ox);
        const double wgt = t.w[i];
        for (int k = 0; k < x.c; ++k) op[k] += wgt * ip[k];
      }
    }
  return out;
}

std::vector<double> gaussian_taps(double sigma, int ksize) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_taps: sigma must be positive");
  if (ksize <= 0 || ksize % 2 == 0)
    throw std::invalid_argument("gaussian_taps: ksize must be odd and positive");
  std::vector<double> taps(ksize);
  const int r = ksize / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    taps[i + r] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Tensor sepconv_symmetric(const Tensor& x, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  Tensor tmp(x.h, x.w, x.c);
  for (int y = 0; y < x.h; ++y)
    for (int ox = 0; ox < x.w; ++ox) {
      double* op = tmp.px(y, ox);
      for (int t = -r; t <= r; ++t) {
        const double wgt = taps[t + r];
        const double* ip = x.px(y, reflect_sym(ox + t, x.w));
        for (int k = 0; k < x.c; ++k) op[k] += wgt * ip[k];
      }
    }
  Tensor out(x.h, x.w, x.c);
  for (int oy = 0; oy < x.h; ++oy)
    for (int ox = 0; ox < x.w; ++ox) {
      double* op = out.px(oy, ox);
      for (int t = -r; t <= r; ++t) {
        const double wgt = taps[t + r];
        const double* ip = tmp.px(reflect_sym(oy + t, x.h), ox);
        for (int k = 0; k < x.c; ++k) op[k] += wgt * ip[k];
      }
    }
  return out;
}

Tensor sepconv_valid(const Tensor& x, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  if (x.h < k || x.w < k) throw std::invalid_argument("sepconv_valid: input smaller than kernel");
  Tensor tmp(x.h, x.w - k + 1, x.c);
  for (int y = 0; y < x.h; ++y)
    for (int ox = 0; ox < tmp.w; ++ox) {
      double* op = tmp.px(y, ox);
      for (int t = 0; t < k; ++t) {
        const double wgt = taps[t];
        const double* ip = x.px(y, ox + t);
        for (int ch = 0; ch < x.c; ++ch) op[ch] += wgt * ip[ch];
      }
    }
  Tensor out(x.h - k + 1, tmp.w, x.c);
  for (int oy = 0; oy < out.h; ++oy)
    for (int ox = 0; ox < out.w; ++ox) {
      double* op = out.px(oy, ox);
      for (int t = 0; t < k; ++t) {
        const double wgt = taps[t];
        const double* ip = tmp.px(oy + t, ox);
        for (int ch = 0; ch < x.c; ++ch) op[ch] += wgt * ip[ch];
      }
    }
  return out;
}

Tensor luma601(const Tensor& rgb) {
  assert(rgb.c == 3);
  Tensor out(rgb.h, rgb.w, 1);
  for (int y = 0; y < rgb.h; ++y)
    for (int x = 0; x < rgb.w; ++x) {
      const double* p = rgb.px(y, x);
      out.at(y, x, 0) = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  return out;
}

Tensor crop(const Tensor& x, int y0, int x0, int ch, int cw) {
  assert(y0 >= 0 && x0 >= 0 && y0 + ch <= x.h && x0 + cw <= x.w);
  Tensor out(ch, cw, x.c);
  for (int y = 0; y < ch; ++y)
    for (int xx = 0; xx < cw; ++xx) {
      const double* ip = x.px(y0 + y, x0 + xx);
      double* op = out.px(y, xx);
      for (int k = 0; k < x.c; ++k) op[k] = ip[k];
    }
  return out;
}

}  // namespace vsr::kern
