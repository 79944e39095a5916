#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsr/autodiff.hpp"
#include "vsr/flow.hpp"
#include "vsr/image.hpp"

// The five training objectives plus ping-pong sequence construction and
// weighted aggregation. Each loss has a graph form (Var in/out, used by the
// trainer) and a plain evaluation form. All distance reductions are
// per-element means, so magnitudes are resolution-independent.
namespace vsr::losses {

enum class GanForm { non_saturating, minimax };

GanForm gan_form_from_string(const std::string& s);
std::string to_string(GanForm form);

struct LossWeights {
  double adv = 0.01;
  double pixel = 1.0;
  double pingpong = 0.5;
  double feature = 0.2;
  double warp = 1.0;
  std::vector<double> feature_layer_weights = {1.0, 1.0, 1.0, 1.0};

  void validate() const;  // all >= 0, at least one > 0
};

struct LossBundle {
  double adv = 0.0;
  double pixel = 0.0;
  double pingpong = 0.0;
  double feature = 0.0;
  double warp = 0.0;
  double total = 0.0;
};

struct PingPongSequence {
  std::vector<Frame> frames;  // palindromic, length 2n-1
  int n = 0;                  // original clip length
};

// [a1..an] -> [a1..an, a(n-1)..a1]; frames are copied so the palindrome
// invariant frames[i] == frames[2n-2-i] holds bit-exactly.
PingPongSequence build_pingpong(const VideoClip& clip);

nn::Var pixel_loss(const nn::Var& gen, const nn::Var& gt);
double pixel_loss(const Frame& gen, const Frame& gt);

nn::Var pingpong_loss(const std::vector<nn::Var>& forward_frames,
                      const std::vector<nn::Var>& backward_frames);
double pingpong_loss(const std::vector<Frame>& forward_frames,
                     const std::vector<Frame>& backward_frames);

// Score-domain forms for analysis/tests; scores must lie in (0, 1).
double gan_loss_d(double score_real, double score_fake);
double gan_loss_g(double score_fake, GanForm form = GanForm::non_saturating);

// Logit-domain forms used in training (numerically stable, never ln 0).
nn::Var adversarial_d_loss(const nn::Var& logit_real, const nn::Var& logit_fake);
nn::Var adversarial_g_loss(const nn::Var& logit_fake,
                           GanForm form = GanForm::non_saturating);

// sum_i w_i * (1 - cos_sim(vec(fg_i), vec(fb_i))), eps = 1e-8.
nn::Var feature_loss(const std::vector<nn::Var>& feats_gen,
                     const std::vector<nn::Var>& feats_real,
                     const std::vector<double>& layer_weights);
double feature_loss(const std::vector<Tensor>& feats_gen,
                    const std::vector<Tensor>& feats_real,
                    const std::vector<double>& layer_weights);

// mean over t of MSE(a_t, W(a_{t-1}, flow_{t-1})) where flows[i] aligns
// frames[i] onto frames[i+1].
nn::Var warping_loss(const std::vector<nn::Var>& frames, const std::vector<nn::Var>& flows);
double warping_loss(const VideoClip& clip, const flow::FlowEstimator& estimator);

struct LossTerms {
  std::optional<nn::Var> adv;
  std::optional<nn::Var> pixel;
  std::optional<nn::Var> pingpong;
  std::optional<nn::Var> feature;
  std::optional<nn::Var> warp;
};

struct TotalLoss {
  nn::Var total;       // scalar graph node, sum of weighted present terms
  LossBundle bundle;   // recorded values; absent terms contribute 0
};

TotalLoss total_generator_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace vsr::losses
