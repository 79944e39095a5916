#include "vsr/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "vsr/kernels.hpp"

namespace vsr::flow {

FlowField zero_flow(int h, int w) { return Tensor(h, w, 2); }

FlowField constant_flow(int h, int w, double dx, double dy) {
  Tensor f(h, w, 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f.at(y, x, 0) = dx;
      f.at(y, x, 1) = dy;
    }
  return f;
}

Frame warp(const Frame& frame, const FlowField& field) {
  if (field.c != 2 || field.h != frame.h || field.w != frame.w)
    throw std::invalid_argument("warp: flow dims must match the frame");
  return kern::warp(frame, field);
}

namespace {

nn::Var conv_init(Rng& rng, int kh, int kw, int ci, int co, double gain) {
  Tensor w(kh, kw, ci * co);
  const double stddev = gain * std::sqrt(2.0 / (kh * kw * ci));
  for (double& v : w.v) v = rng.normal(0.0, stddev);
  return nn::leaf(std::move(w));
}

}  // namespace

FlowNet::FlowNet(const FlowNetConfig& config, Rng& rng) : config_(config) {
  if (config.levels < 1 || config.channels < 4)
    throw std::invalid_argument("flownet: levels >= 1 and channels >= 4 required");
  const int c = config_.channels;
  levels_.resize(config_.levels);
  for (auto& lv : levels_) {
    lv.w1 = conv_init(rng, 3, 3, 8, c, 1.0);
    lv.b1 = nn::leaf(Tensor(1, 1, c));
    lv.a1 = nn::leaf(Tensor::scalar(0.25));
    lv.w2 = conv_init(rng, 3, 3, c, c, 1.0);
    lv.b2 = nn::leaf(Tensor(1, 1, c));
    lv.a2 = nn::leaf(Tensor::scalar(0.25));
    // Small final weights keep initial flows near zero without pinning them
    // to the bilinear kink at exactly integer displacements.
    lv.w3 = conv_init(rng, 3, 3, c, 2, 0.01);
    lv.b3 = nn::leaf(Tensor(1, 1, 2));
  }
}

nn::Var FlowNet::forward(const nn::Var& src, const nn::Var& dst) const {
  if (src->val.h != dst->val.h || src->val.w != dst->val.w)
    throw std::invalid_argument("estimate_flow: src and dst dims must match");
  const int c = config_.channels;

  // Pyramids, level 0 = full resolution.
  std::vector<nn::Var> srcs = {src}, dsts = {dst};
  for (int l = 1; l < config_.levels; ++l) {
    const nn::Var& ps = srcs.back();
    const int nh = (ps->val.h + 1) / 2, nw = (ps->val.w + 1) / 2;
    if (nh < 4 || nw < 4) break;
    srcs.push_back(nn::resize_bilinear(srcs.back(), nh, nw));
    dsts.push_back(nn::resize_bilinear(dsts.back(), nh, nw));
  }

  nn::Var f;  // flow at the current level
  for (int l = static_cast<int>(srcs.size()) - 1; l >= 0; --l) {
    const int h = srcs[l]->val.h, w = srcs[l]->val.w;
    if (!f) {
      f = nn::constant(Tensor(h, w, 2));
    } else {
      const double sx = static_cast<double>(w) / f->val.w;
      const double sy = static_cast<double>(h) / f->val.h;
      f = nn::scale_channels(nn::resize_bilinear(f, h, w), {sx, sy});
    }
    const auto& lv = levels_[l];
    nn::Var warped = nn::warp(srcs[l], f);
    nn::Var inp = nn::concat_channels({warped, dsts[l], f});
    nn::Var t = nn::prelu(nn::conv2d(inp, lv.w1, lv.b1, 8, c, 1, 1), lv.a1);
    t = nn::prelu(nn::conv2d(t, lv.w2, lv.b2, c, c, 1, 1), lv.a2);
    nn::Var delta = nn::conv2d(t, lv.w3, lv.b3, c, 2, 1, 1);
    f = nn::add(f, delta);
  }
  return f;
}

FlowField FlowNet::estimate(const Frame& src, const Frame& dst) const {
  return forward(nn::constant(src), nn::constant(dst))->val;
}

std::vector<std::pair<std::string, nn::Var>> FlowNet::named_params(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, nn::Var>> out;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const auto& lv = levels_[l];
    const std::string p = prefix + ".level" + std::to_string(l);
    out.emplace_back(p + ".w1", lv.w1);
    out.emplace_back(p + ".b1", lv.b1);
    out.emplace_back(p + ".a1", lv.a1);
    out.emplace_back(p + ".w2", lv.w2);
    out.emplace_back(p + ".b2", lv.b2);
    out.emplace_back(p + ".a2", lv.a2);
    out.emplace_back(p + ".w3", lv.w3);
    out.emplace_back(p + ".b3", lv.b3);
  }
  return out;
}

std::size_t FlowNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : named_params("f")) n += v->val.numel();
  return n;
}

namespace {

Tensor gradient_x(const Tensor& img) {
  Tensor g(img.h, img.w, 1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const int xm = std::max(0, x - 1), xp = std::min(img.w - 1, x + 1);
      g.at(y, x, 0) = (img.at(y, xp, 0) - img.at(y, xm, 0)) / (xp - xm > 0 ? xp - xm : 1);
    }
  return g;
}

Tensor gradient_y(const Tensor& img) {
  Tensor g(img.h, img.w, 1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const int ym = std::max(0, y - 1), yp = std::min(img.h - 1, y + 1);
      g.at(y, x, 0) = (img.at(yp, x, 0) - img.at(ym, x, 0)) / (yp - ym > 0 ? yp - ym : 1);
    }
  return g;
}

}  // namespace

FlowField lk_flow(const Frame& src, const Frame& dst, const LkParams& p) {
  if (src.h != dst.h || src.w != dst.w)
    throw std::invalid_argument("estimate_flow: src and dst dims must match");

  // Luma pyramids with a light pre-blur per level.
  const auto blur_taps = kern::gaussian_taps(1.0, 5);
  std::vector<Tensor> ps = {kern::luma601(src)}, pd = {kern::luma601(dst)};
  while (static_cast<int>(ps.size()) < p.max_levels) {
    const Tensor& prev = ps.back();
    const int nh = (prev.h + 1) / 2, nw = (prev.w + 1) / 2;
    if (nh < p.min_dim || nw < p.min_dim) break;
    ps.push_back(kern::resize_bilinear(kern::sepconv_symmetric(ps.back(), blur_taps), nh, nw));
    pd.push_back(kern::resize_bilinear(kern::sepconv_symmetric(pd.back(), blur_taps), nh, nw));
  }

  const auto win = kern::gaussian_taps(p.window_sigma, p.window_ksize);
  Tensor f;
  for (int l = static_cast<int>(ps.size()) - 1; l >= 0; --l) {
    const Tensor& s = ps[l];
    const Tensor& d = pd[l];
    if (f.numel() == 0) {
      f = Tensor(s.h, s.w, 2);
    } else {
      const double sx = static_cast<double>(s.w) / f.w;
      const double sy = static_cast<double>(s.h) / f.h;
      f = kern::resize_bilinear(f, s.h, s.w);
      for (int y = 0; y < f.h; ++y)
        for (int x = 0; x < f.w; ++x) {
          f.at(y, x, 0) *= sx;
          f.at(y, x, 1) *= sy;
        }
    }

    for (int it = 0; it < p.iterations; ++it) {
      Tensor warped = kern::warp(s, f);
      // Gradients of the mean image stabilize the linearization.
      Tensor avg(s.h, s.w, 1);
      for (std::size_t i = 0; i < avg.v.size(); ++i)
        avg.v[i] = 0.5 * (warped.v[i] + d.v[i]);
      Tensor ix = gradient_x(avg), iy = gradient_y(avg);

      Tensor prods(s.h, s.w, 5);
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const double gx = ix.at(y, x, 0), gy = iy.at(y, x, 0);
          const double gt = warped.at(y, x, 0) - d.at(y, x, 0);
          double* q = prods.px(y, x);
          q[0] = gx * gx;
          q[1] = gx * gy;
          q[2] = gy * gy;
          q[3] = gx * gt;
          q[4] = gy * gt;
        }
      Tensor sums = kern::sepconv_symmetric(prods, win);

      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const double* q = sums.px(y, x);
          const double a = q[0] + p.ridge, b = q[1], c = q[2] + p.ridge;
          const double det = a * c - b * b;
          if (det <= 1e-12) continue;
          double du = (-c * q[3] + b * q[4]) / det;
          double dv = (b * q[3] - a * q[4]) / det;
          du = std::clamp(du, -p.step_clamp, p.step_clamp);
          dv = std::clamp(dv, -p.step_clamp, p.step_clamp);
          f.at(y, x, 0) += du;
          f.at(y, x, 1) += dv;
        }
    }
  }
  return f;
}

FlowField FlowEstimator::estimate(const Frame& src, const Frame& dst) const {
  if (src.h != dst.h || src.w != dst.w)
    throw std::invalid_argument("estimate_flow: src and dst dims must match");
  switch (kind) {
    case Kind::zero:
      return zero_flow(src.h, src.w);
    case Kind::learned:
      if (!net) throw std::invalid_argument("estimate_flow: learned estimator has no network");
      return net->estimate(src, dst);
    case Kind::pyramid_classical:
      return lk_flow(src, dst, lk);
  }
  throw std::logic_error("estimate_flow: unknown estimator kind");
}

void save_flow(const std::string& path, const FlowField& field) {
  if (field.c != 2) throw std::invalid_argument("save_flow: field must have 2 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot create flow file: " + path);
  const std::uint32_t h = field.h, w = field.w;
  os.write(reinterpret_cast<const char*>(&h), 4);
  os.write(reinterpret_cast<const char*>(&w), 4);
  std::vector<float> buf(field.v.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(field.v[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw DataError("flow write failed: " + path);
}

FlowField load_flow(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open flow file: " + path);
  std::uint32_t h = 0, w = 0;
  is.read(reinterpret_cast<char*>(&h), 4);
  is.read(reinterpret_cast<char*>(&w), 4);
  if (!is || h == 0 || w == 0) throw DataError("malformed flow file header: " + path);
  std::vector<float> buf(static_cast<std::size_t>(h) * w * 2);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw DataError("truncated flow file: " + path);
  Tensor f(static_cast<int>(h), static_cast<int>(w), 2);
  for (std::size_t i = 0; i < buf.size(); ++i) f.v[i] = buf[i];
  return f;
}

}  // namespace vsr::flow
