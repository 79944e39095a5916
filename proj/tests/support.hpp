#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "vsr/image.hpp"
#include "vsr/rng.hpp"
#include "vsr/tensor.hpp"

namespace vsr::test {

inline Tensor random_tensor(int h, int w, int c, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor t(h, w, c);
  for (double& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

// Smooth random field: low-pass noise, useful wherever gradients matter
// (optical flow, warping) because raw white noise defeats linearization.
inline Tensor smooth_random_frame(int h, int w, Rng& rng, int c = 3) {
  Tensor t(h, w, c);
  const int kNumBlobs = 24;
  for (int i = 0; i < kNumBlobs; ++i) {
    const double cx = rng.uniform(0.0, w - 1.0);
    const double cy = rng.uniform(0.0, h - 1.0);
    const double s2 = rng.uniform(2.0, 18.0);
    for (int ch = 0; ch < c; ++ch) {
      const double amp = rng.uniform(-0.4, 0.4);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          t.at(y, x, ch) += amp * std::exp(-d2 / (2.0 * s2));
        }
    }
  }
  for (double& v : t.v) v = 0.5 + 0.5 * std::tanh(v);
  return t;
}

// Periodic sample of a band-limited field, so integer shifts wrap around
// exactly: fixture(x - shift) is again a valid frame of the same scene.
inline Tensor periodic_texture(int h, int w, std::uint64_t seed, double shift_x,
                               double shift_y, int c = 3) {
  Rng rng(seed);
  const int kWaves = 10;
  Tensor t(h, w, c);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < kWaves; ++i)
    waves.push_back({static_cast<double>(rng.uniform_int(1, 3)),
                     static_cast<double>(rng.uniform_int(1, 3)),
                     rng.uniform(0.0, 6.28318530717958648), rng.uniform(0.05, 0.18)});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = 0.5;
        for (std::size_t i = 0; i < waves.size(); ++i) {
          const auto& wv = waves[i];
          const double ph = wv.phase + 0.7 * ch + 0.3 * static_cast<double>(i);
          v += wv.amp * std::sin(6.28318530717958648 *
                                     (wv.fx * (x + shift_x) / w + wv.fy * (y + shift_y) / h) +
                                 ph);
        }
        t.at(y, x, ch) = std::clamp(v, 0.0, 1.0);
      }
  return t;
}

inline VideoClip make_clip(const std::string& scene, std::vector<Frame> frames) {
  VideoClip c;
  c.scene_id = scene;
  c.frames = std::move(frames);
  return c;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("vsrtest_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::filesystem::path path() const { return path_; }

 private:
  std::filesystem::path path_;
  static inline int counter_ = 0;
};

inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace vsr::test
