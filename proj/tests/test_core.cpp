#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vsr/autodiff.hpp"
#include "vsr/kernels.hpp"

using namespace vsr;

namespace {

// Brute-force convolution, written independently of the production kernel:
// plain quadruple loop, no pointer walking.
Tensor conv_oracle(const Tensor& x, const Tensor& wt, const Tensor* bias, int ci, int co,
                   int stride, int pad) {
  const int oh = (x.h + 2 * pad - wt.h) / stride + 1;
  const int ow = (x.w + 2 * pad - wt.w) / stride + 1;
  Tensor out(oh, ow, co);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int o = 0; o < co; ++o) {
        double acc = bias ? bias->v[o] : 0.0;
        for (int ky = 0; ky < wt.h; ++ky)
          for (int kx = 0; kx < wt.w; ++kx) {
            const int iy = oy * stride + ky - pad;
            const int ix = ox * stride + kx - pad;
            if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
            for (int i = 0; i < ci; ++i)
              acc += x.at(iy, ix, i) * wt.at(ky, kx, i * co + o);
          }
        out.at(oy, ox, o) = acc;
      }
  return out;
}

// Scatter-form transposed convolution oracle.
Tensor deconv_oracle(const Tensor& x, const Tensor& wt, const Tensor* bias, int ci, int co) {
  Tensor out(x.h * 2, x.w * 2, co);
  if (bias)
    for (int y = 0; y < out.h; ++y)
      for (int xx = 0; xx < out.w; ++xx)
        for (int o = 0; o < co; ++o) out.at(y, xx, o) = bias->v[o];
  for (int iy = 0; iy < x.h; ++iy)
    for (int ix = 0; ix < x.w; ++ix)
      for (int ky = 0; ky < 4; ++ky)
        for (int kx = 0; kx < 4; ++kx) {
          const int oy = iy * 2 + ky - 1;
          const int ox = ix * 2 + kx - 1;
          if (oy < 0 || oy >= out.h || ox < 0 || ox >= out.w) continue;
          for (int i = 0; i < ci; ++i)
            for (int o = 0; o < co; ++o)
              out.at(oy, ox, o) += x.at(iy, ix, i) * wt.at(ky, kx, i * co + o);
        }
  return out;
}

}  // namespace

TEST_CASE("rng: serialized state resumes the exact stream") {
  Rng a(42);
  for (int i = 0; i < 7; ++i) a.normal();
  const std::string state = a.serialize();
  Rng b(0);
  b.deserialize(state);
  for (int i = 0; i < 16; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("conv2d matches the brute-force oracle") {
  Rng rng(1);
  for (int stride : {1, 2}) {
    Tensor x = test::random_tensor(7, 9, 3, rng, -1.0, 1.0);
    Tensor w = test::random_tensor(3, 3, 3 * 5, rng, -1.0, 1.0);
    Tensor b = test::random_tensor(1, 1, 5, rng, -0.5, 0.5);
    Tensor got = kern::conv2d(x, w, &b, 3, 5, stride, 1);
    Tensor want = conv_oracle(x, w, &b, 3, 5, stride, 1);
    REQUIRE(got.same_shape(want));
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("conv2d ceil-halving shape on odd dims") {
  Rng rng(2);
  Tensor x = test::random_tensor(15, 11, 2, rng);
  Tensor w = test::random_tensor(3, 3, 2 * 4, rng);
  Tensor out = kern::conv2d(x, w, nullptr, 2, 4, 2, 1);
  CHECK(out.h == 8);  // ceil(15/2)
  CHECK(out.w == 6);  // ceil(11/2)
}

TEST_CASE("deconv2d doubles dims and matches the scatter oracle") {
  Rng rng(3);
  Tensor x = test::random_tensor(5, 4, 3, rng, -1.0, 1.0);
  Tensor w = test::random_tensor(4, 4, 3 * 2, rng, -1.0, 1.0);
  Tensor b = test::random_tensor(1, 1, 2, rng, -0.5, 0.5);
  Tensor got = kern::deconv2d(x, w, &b, 3, 2);
  Tensor want = deconv_oracle(x, w, &b, 3, 2);
  REQUIRE(got.h == 10);
  REQUIRE(got.w == 8);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("conv and deconv gradients match finite differences") {
  Rng rng(4);
  Tensor xv = test::random_tensor(5, 5, 2, rng, -1.0, 1.0);
  Tensor wv = test::random_tensor(3, 3, 2 * 3, rng, -1.0, 1.0);
  Tensor bv = test::random_tensor(1, 1, 3, rng, -0.5, 0.5);
  Tensor dv = test::random_tensor(4, 4, 3 * 3, rng, -1.0, 1.0);

  auto graph_loss = [&](const Tensor& x, const Tensor& w, const Tensor& b,
                        const Tensor& dw) {
    auto xn = nn::leaf(x), wn = nn::leaf(w), bn = nn::leaf(b), dn = nn::leaf(dw);
    auto y = nn::conv2d(xn, wn, bn, 2, 3, 1, 1);
    auto z = nn::deconv2d_x2(y, dn, nullptr, 3, 3);
    return std::tuple(nn::mean_all(nn::mul(z, z)), xn, wn, bn, dn);
  };
  auto [loss, xn, wn, bn, dn] = graph_loss(xv, wv, bv, dv);
  nn::backward(loss);

  auto probe = [&](const Tensor& base, const Tensor& grad, int count,
                   const std::function<double(const Tensor&)>& eval) {
    Rng prng(7);
    for (int i = 0; i < count; ++i) {
      const std::size_t idx = prng.uniform_int(0, static_cast<int>(base.numel()) - 1);
      const double num = nn::numeric_gradient(eval, base, idx, 1e-5);
      CHECK(test::rel_error(grad.v[idx], num) < 1e-5);
    }
  };
  probe(xv, xn->grad, 6, [&](const Tensor& t) {
    return std::get<0>(graph_loss(t, wv, bv, dv))->val.item();
  });
  probe(wv, wn->grad, 6, [&](const Tensor& t) {
    return std::get<0>(graph_loss(xv, t, bv, dv))->val.item();
  });
  probe(bv, bn->grad, 3, [&](const Tensor& t) {
    return std::get<0>(graph_loss(xv, wv, t, dv))->val.item();
  });
  probe(dv, dn->grad, 6, [&](const Tensor& t) {
    return std::get<0>(graph_loss(xv, wv, bv, t))->val.item();
  });
}

TEST_CASE("warp: zero flow is the identity") {
  Rng rng(5);
  Tensor f = test::random_tensor(6, 7, 3, rng);
  Tensor flow(6, 7, 2);
  CHECK(max_abs_diff(kern::warp(f, flow), f) == 0.0);
}

TEST_CASE("warp: unit flow shifts by one column away from the clamped border") {
  Rng rng(6);
  Tensor f = test::random_tensor(8, 8, 3, rng);
  Tensor flow(8, 8, 2);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) flow.at(y, x, 0) = 1.0;
  Tensor out = kern::warp(f, flow);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 7; ++x)  // last column samples the clamped edge
      for (int c = 0; c < 3; ++c)
        CHECK(out.at(y, x, c) == doctest::Approx(f.at(y, x + 1, c)).epsilon(1e-12));
}

TEST_CASE("warp: half-pixel flow on a ramp averages horizontal neighbors") {
  Tensor f(4, 8, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) f.at(y, x, 0) = 0.1 * x;
  Tensor flow(4, 8, 2);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) flow.at(y, x, 0) = 0.5;
  Tensor out = kern::warp(f, flow);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 7; ++x)
      CHECK(out.at(y, x, 0) ==
            doctest::Approx(0.5 * (f.at(y, x, 0) + f.at(y, x + 1, 0))).epsilon(1e-12));
}

TEST_CASE("warp is linear in the frame argument") {
  Rng rng(7);
  Tensor a = test::random_tensor(9, 9, 3, rng);
  Tensor b = test::random_tensor(9, 9, 3, rng);
  Tensor flow = test::random_tensor(9, 9, 2, rng, -1.3, 1.3);
  const double alpha = 0.7, beta = -0.4;
  Tensor mix(9, 9, 3);
  for (std::size_t i = 0; i < mix.v.size(); ++i) mix.v[i] = alpha * a.v[i] + beta * b.v[i];
  Tensor lhs = kern::warp(mix, flow);
  Tensor wa = kern::warp(a, flow);
  Tensor wb = kern::warp(b, flow);
  for (std::size_t i = 0; i < lhs.v.size(); ++i)
    CHECK(std::fabs(lhs.v[i] - (alpha * wa.v[i] + beta * wb.v[i])) < 1e-6);
}

TEST_CASE("warp gradients match finite differences on 6x6 fixtures") {
  Rng rng(8);
  Tensor fv = test::smooth_random_frame(6, 6, rng);
  // Fractional flows keep sample points off the bilinear kinks and inside
  // the un-clamped interior.
  Tensor gv(6, 6, 2);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      gv.at(y, x, 0) = rng.uniform(-0.45, 0.45) + (x >= 3 ? -0.3 : 0.3);
      gv.at(y, x, 1) = rng.uniform(-0.45, 0.45) + (y >= 3 ? -0.3 : 0.3);
    }
  auto eval = [&](const Tensor& frame, const Tensor& flow) {
    auto fn = nn::leaf(frame), gn = nn::leaf(flow);
    auto s = nn::mean_all(nn::warp(fn, gn));
    return std::tuple(s, fn, gn);
  };
  auto [loss, fn, gn] = eval(fv, gv);
  nn::backward(loss);
  Rng prng(9);
  for (int i = 0; i < 8; ++i) {
    const std::size_t fi = prng.uniform_int(0, static_cast<int>(fv.numel()) - 1);
    const double numf = nn::numeric_gradient(
        [&](const Tensor& t) { return std::get<0>(eval(t, gv))->val.item(); }, fv, fi, 1e-4);
    CHECK(test::rel_error(fn->grad.v[fi], numf) < 1e-3);
    const std::size_t gi = prng.uniform_int(0, static_cast<int>(gv.numel()) - 1);
    const double numg = nn::numeric_gradient(
        [&](const Tensor& t) { return std::get<0>(eval(fv, t))->val.item(); }, gv, gi, 1e-4);
    CHECK(test::rel_error(gn->grad.v[gi], numg) < 1e-3);
  }
}

TEST_CASE("bicubic upsample preserves constants and linear ramps") {
  Tensor c = Tensor::full(6, 6, 3, 0.3);
  Tensor up = kern::bicubic_upsample(c, 4);
  REQUIRE(up.h == 24);
  CHECK(max_value(up) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(min_value(up) == doctest::Approx(0.3).epsilon(1e-12));

  Tensor ramp(1, 8, 1);
  for (int x = 0; x < 8; ++x) ramp.at(0, x, 0) = 0.1 * x;
  Tensor upr = kern::bicubic_upsample(ramp, 4);
  // interior output j samples source position (j + 0.5)/4 - 0.5
  for (int j = 8; j < 24; ++j) {
    const double sx = (j + 0.5) / 4.0 - 0.5;
    CHECK(upr.at(0, j, 0) == doctest::Approx(0.1 * sx).epsilon(1e-10));
  }
}

TEST_CASE("bicubic upsample gradient is the transpose of the forward map") {
  Rng rng(10);
  Tensor xv = test::random_tensor(3, 4, 2, rng);
  auto eval = [&](const Tensor& t) {
    auto xn = nn::leaf(t);
    auto s = nn::mean_all(nn::mul(nn::bicubic_upsample(xn, 4), nn::bicubic_upsample(xn, 4)));
    return std::tuple(s, xn);
  };
  auto [loss, xn] = eval(xv);
  nn::backward(loss);
  for (std::size_t i = 0; i < xv.numel(); i += 5) {
    const double num = nn::numeric_gradient(
        [&](const Tensor& t) { return std::get<0>(eval(t))->val.item(); }, xv, i, 1e-5);
    CHECK(test::rel_error(xn->grad.v[i], num) < 1e-5);
  }
}

TEST_CASE("bicubic downsample: constants, shape, and the ramp oracle") {
  Tensor c = Tensor::full(64, 64, 3, 0.3);
  Tensor down = kern::bicubic_downsample(c, 4);
  REQUIRE(down.h == 16);
  REQUIRE(down.w == 16);
  CHECK(std::fabs(max_value(down) - 0.3) < 1e-12);
  CHECK(std::fabs(min_value(down) - 0.3) < 1e-12);

  // Horizontal ramp: interior outputs must equal the ramp sampled at
  // (4j + 1.5)/(W-1), by symmetry of the normalized stretched kernel.
  Tensor ramp(32, 64, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) ramp.at(y, x, 0) = x / 63.0;
  Tensor dr = kern::bicubic_downsample(ramp, 4);
  for (int j = 3; j < 13; ++j)
    CHECK(dr.at(4, j, 0) == doctest::Approx((4.0 * j + 1.5) / 63.0).epsilon(1e-10));

  CHECK_THROWS_AS(kern::bicubic_downsample(Tensor(10, 12, 3), 4), std::invalid_argument);
}

TEST_CASE("bicubic downsample matches a non-separable direct oracle") {
  Rng rng(11);
  Tensor x = test::random_tensor(16, 16, 3, rng);
  Tensor got = kern::bicubic_downsample(x, 4);

  auto keys = [](double d) {
    const double a = -0.5;
    d = std::fabs(d);
    if (d < 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
    if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
    return 0.0;
  };
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 4; ++ox)
      for (int ch = 0; ch < 3; ++ch) {
        const double sy = (oy + 0.5) * 4.0 - 0.5;
        const double sx = (ox + 0.5) * 4.0 - 0.5;
        double acc = 0.0, wsum = 0.0;
        for (int iy = static_cast<int>(std::ceil(sy - 8)); iy <= sy + 8; ++iy)
          for (int ix = static_cast<int>(std::ceil(sx - 8)); ix <= sx + 8; ++ix) {
            const double wgt = keys((sy - iy) / 4.0) * keys((sx - ix) / 4.0);
            if (wgt == 0.0) continue;
            acc += wgt * x.at(std::clamp(iy, 0, 15), std::clamp(ix, 0, 15), ch);
            wsum += wgt;
          }
        const double want = std::clamp(acc / wsum, 0.0, 1.0);
        CHECK(std::fabs(got.at(oy, ox, ch) - want) < 1e-10);
      }
}

TEST_CASE("gaussian taps are normalized and symmetric") {
  const auto taps = kern::gaussian_taps(1.5, 13);
  double sum = 0.0;
  for (double t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 6; ++i) CHECK(taps[i] == doctest::Approx(taps[12 - i]).epsilon(1e-12));
  CHECK_THROWS_AS(kern::gaussian_taps(0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(kern::gaussian_taps(1.0, 4), std::invalid_argument);
}

TEST_CASE("symmetric-padding blur preserves the global sum exactly") {
  Rng rng(12);
  Tensor x = test::random_tensor(13, 17, 3, rng);
  Tensor y = kern::sepconv_symmetric(x, kern::gaussian_taps(1.5, 13));
  double sx = 0.0, sy = 0.0;
  for (double v : x.v) sx += v;
  for (double v : y.v) sy += v;
  CHECK(std::fabs(sx - sy) / sx < 1e-12);
}

TEST_CASE("autodiff elementwise ops: gradients vs finite differences") {
  Rng rng(13);
  Tensor av = test::random_tensor(3, 3, 2, rng, -2.0, 2.0);
  Tensor bv = test::random_tensor(3, 3, 2, rng, -2.0, 2.0);

  auto build = [&](const Tensor& a, const Tensor& b) {
    auto an = nn::leaf(a), bn = nn::leaf(b);
    auto t1 = nn::mul(nn::add(an, bn), nn::sub(an, bn));
    auto t2 = nn::sigmoid(nn::scale(t1, 0.5));
    auto t3 = nn::softplus(nn::add_scalar(t2, -0.3));
    auto t4 = nn::prelu(t3, nn::constant(Tensor::scalar(0.25)));
    auto loss = nn::add(nn::mse(t4, bn), nn::cosine_similarity(an, bn));
    return std::tuple(loss, an, bn);
  };
  auto [loss, an, bn] = build(av, bv);
  nn::backward(loss);
  Rng prng(14);
  for (int i = 0; i < 8; ++i) {
    const std::size_t ia = prng.uniform_int(0, static_cast<int>(av.numel()) - 1);
    const double na = nn::numeric_gradient(
        [&](const Tensor& t) { return std::get<0>(build(t, bv))->val.item(); }, av, ia, 1e-5);
    CHECK(test::rel_error(an->grad.v[ia], na) < 1e-4);
    const std::size_t ib = prng.uniform_int(0, static_cast<int>(bv.numel()) - 1);
    const double nb = nn::numeric_gradient(
        [&](const Tensor& t) { return std::get<0>(build(av, t))->val.item(); }, bv, ib, 1e-5);
    CHECK(test::rel_error(bn->grad.v[ib], nb) < 1e-4);
  }
}

TEST_CASE("autodiff: grads accumulate across shared subgraphs and reset on zero_grad") {
  Tensor xv = Tensor::full(1, 1, 1, 2.0);
  auto x = nn::leaf(xv);
  auto y = nn::add(nn::mul(x, x), x);  // x^2 + x, d/dx = 2x + 1 = 5
  nn::backward(y);
  CHECK(x->grad.v[0] == doctest::Approx(5.0));
  nn::backward(y);  // accumulates a second pass
  CHECK(x->grad.v[0] == doctest::Approx(10.0));
  nn::zero_grad(x);
  CHECK(x->grad.v[0] == 0.0);
}

TEST_CASE("resize_bilinear: identity at same dims and gradcheck") {
  Rng rng(15);
  Tensor xv = test::random_tensor(5, 7, 2, rng);
  CHECK(max_abs_diff(kern::resize_bilinear(xv, 5, 7), xv) < 1e-12);

  auto eval = [&](const Tensor& t) {
    auto xn = nn::leaf(t);
    auto up = nn::resize_bilinear(xn, 9, 4);
    auto s = nn::mean_all(nn::mul(up, up));
    return std::tuple(s, xn);
  };
  auto [loss, xn] = eval(xv);
  nn::backward(loss);
  for (std::size_t i = 0; i < xv.numel(); i += 7) {
    const double num = nn::numeric_gradient(
        [&](const Tensor& t) { return std::get<0>(eval(t))->val.item(); }, xv, i, 1e-5);
    CHECK(test::rel_error(xn->grad.v[i], num) < 1e-5);
  }
}

TEST_CASE("global_avg_pool and concat_channels behave and differentiate") {
  Rng rng(16);
  Tensor av = test::random_tensor(4, 4, 2, rng);
  Tensor bv = test::random_tensor(4, 4, 3, rng);
  auto an = nn::leaf(av), bn = nn::leaf(bv);
  auto cat = nn::concat_channels({an, bn});
  REQUIRE(cat->val.c == 5);
  CHECK(cat->val.at(2, 3, 0) == av.at(2, 3, 0));
  CHECK(cat->val.at(2, 3, 4) == bv.at(2, 3, 2));
  auto pooled = nn::global_avg_pool(cat);
  REQUIRE(pooled->val.numel() == 5);
  double ch0 = 0.0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ch0 += av.at(y, x, 0);
  CHECK(pooled->val.v[0] == doctest::Approx(ch0 / 16.0).epsilon(1e-12));
  auto loss = nn::mean_all(nn::mul(pooled, pooled));
  nn::backward(loss);
  CHECK(an->grad.numel() == av.numel());
  CHECK(bn->grad.numel() == bv.numel());
}
