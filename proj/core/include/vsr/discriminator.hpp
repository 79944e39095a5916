#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "vsr/autodiff.hpp"
#include "vsr/image.hpp"
#include "vsr/rng.hpp"

// Spatio-temporal discriminator: judges triplets of consecutive HR frames
// conditioned on the bicubic-upsampled LR triplet, exposing its intermediate
// feature maps for the perceptual loss.
namespace vsr::disc {

struct Triplet {
  std::array<Frame, 3> frames;  // (t-1, t, t+1)
  void validate() const;
};

struct DiscriminatorConfig {
  std::vector<int> stage_channels = {32, 64, 64, 128};
  double leaky_slope = 0.2;
  // Reserved extension: additionally condition on a flow-warped triplet
  // (adds 9 input channels). Off by default at desk scale.
  bool include_warped_triplet = false;

  int in_channels() const { return include_warped_triplet ? 27 : 18; }
  void validate() const;
};

// Channel concatenation [f_{t-1}, f_t, f_{t+1}, u_{t-1}, u_t, u_{t+1}].
Tensor assemble_input(const Triplet& hr, const Triplet& lr_upsampled);
// 27-channel variant used when include_warped_triplet is on.
Tensor assemble_input(const Triplet& hr, const Triplet& lr_upsampled,
                      const Triplet& warped);

struct DiscOutput {
  double score = 0.0;  // sigmoid of the (clamped) logit, strictly in (0,1)
  double logit = 0.0;
  std::vector<Tensor> features;  // one post-activation map per conv stage
};

class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, Rng& rng);

  struct GraphOutput {
    nn::Var logit;                  // scalar
    std::vector<nn::Var> features;  // per-stage post-activation maps
  };
  GraphOutput forward(const nn::Var& input) const;

  DiscOutput discriminate(const Tensor& input) const;

  const DiscriminatorConfig& config() const { return config_; }
  int stage_count() const { return static_cast<int>(config_.stage_channels.size()); }
  std::vector<std::pair<std::string, nn::Var>> named_params(const std::string& prefix) const;
  std::size_t parameter_count() const;

 private:
  DiscriminatorConfig config_;
  struct Stage {
    nn::Var w, b;
  };
  std::vector<Stage> stages_;
  nn::Var head_w, head_b;  // 1x1 conv on the pooled vector -> logit
};

}  // namespace vsr::disc
