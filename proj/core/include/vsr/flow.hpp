#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vsr/autodiff.hpp"
#include "vsr/image.hpp"
#include "vsr/rng.hpp"

// Motion estimation and differentiable warping. Flow fields are (h, w, 2)
// tensors; channel 0 is dx, channel 1 dy, mapping target coordinates to
// source coordinates: warp samples frame at (x + dx, y + dy).
namespace vsr::flow {

using FlowField = Tensor;

FlowField zero_flow(int h, int w);
FlowField constant_flow(int h, int w, double dx, double dy);

// Bilinear warp with border clamping.
Frame warp(const Frame& frame, const FlowField& field);

struct FlowNetConfig {
  int levels = 3;
  int channels = 24;
};

// Small coarse-to-fine convolutional flow network. Each pyramid level warps
// the source by the upsampled flow and predicts a residual correction from
// [warped src, dst, flow] (8 channels).
class FlowNet {
 public:
  FlowNet(const FlowNetConfig& config, Rng& rng);

  nn::Var forward(const nn::Var& src, const nn::Var& dst) const;
  FlowField estimate(const Frame& src, const Frame& dst) const;

  const FlowNetConfig& config() const { return config_; }
  std::vector<std::pair<std::string, nn::Var>> named_params(const std::string& prefix) const;
  std::size_t parameter_count() const;

 private:
  FlowNetConfig config_;
  struct Level {
    nn::Var w1, b1, a1;
    nn::Var w2, b2, a2;
    nn::Var w3, b3;
  };
  std::vector<Level> levels_;
};

struct LkParams {
  int max_levels = 4;
  int min_dim = 12;      // coarsest pyramid level keeps at least this many px
  int iterations = 5;
  double window_sigma = 3.0;
  int window_ksize = 13;
  double ridge = 1e-3;   // Tikhonov term added to the structure tensor
  double step_clamp = 2.0;
};

// Deterministic pyramidal Lucas-Kanade dense flow on luma; used by the tOF
// metric so that it stays model-independent.
FlowField lk_flow(const Frame& src, const Frame& dst, const LkParams& params = {});

struct FlowEstimator {
  enum class Kind { zero, learned, pyramid_classical };

  Kind kind = Kind::zero;
  std::shared_ptr<FlowNet> net;  // set for learned
  LkParams lk;

  static FlowEstimator zero() { return {Kind::zero, nullptr, {}}; }
  static FlowEstimator classical(const LkParams& params = {}) {
    return {Kind::pyramid_classical, nullptr, params};
  }
  static FlowEstimator learned(std::shared_ptr<FlowNet> net) {
    return {Kind::learned, std::move(net), {}};
  }

  FlowField estimate(const Frame& src, const Frame& dst) const;
};

// Fixture raster format: uint32 h, uint32 w, then row-major float32 (dx, dy)
// pairs, little-endian.
void save_flow(const std::string& path, const FlowField& field);
FlowField load_flow(const std::string& path);

}  // namespace vsr::flow
