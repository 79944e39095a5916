#include "vsr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsr::losses {

GanForm gan_form_from_string(const std::string& s) {
  if (s == "non_saturating" || s == "non-saturating") return GanForm::non_saturating;
  if (s == "minimax") return GanForm::minimax;
  throw std::invalid_argument("unknown gan form: " + s);
}

std::string to_string(GanForm form) {
  return form == GanForm::non_saturating ? "non_saturating" : "minimax";
}

void LossWeights::validate() const {
  const double all[] = {adv, pixel, pingpong, feature, warp};
  double sum = 0.0;
  for (double w : all) {
    if (w < 0.0) throw std::invalid_argument("loss weights must be non-negative");
    sum += w;
  }
  for (double w : feature_layer_weights)
    if (w < 0.0) throw std::invalid_argument("feature layer weights must be non-negative");
  if (sum <= 0.0) throw std::invalid_argument("at least one loss weight must be positive");
}

PingPongSequence build_pingpong(const VideoClip& clip) {
  const int n = clip.length();
  if (n < 2) throw std::invalid_argument("build_pingpong: clip length must be >= 2");
  PingPongSequence seq;
  seq.n = n;
  seq.frames.reserve(2 * n - 1);
  for (int i = 0; i < n; ++i) seq.frames.push_back(clip.frames[i]);
  for (int i = n - 2; i >= 0; --i) seq.frames.push_back(clip.frames[i]);
  return seq;
}

nn::Var pixel_loss(const nn::Var& gen, const nn::Var& gt) {
  if (!gen->val.same_shape(gt->val))
    throw std::invalid_argument("pixel_loss: dims must match");
  return nn::mse(gen, gt);
}

double pixel_loss(const Frame& gen, const Frame& gt) {
  return pixel_loss(nn::constant(gen), nn::constant(gt))->val.item();
}

nn::Var pingpong_loss(const std::vector<nn::Var>& forward_frames,
                      const std::vector<nn::Var>& backward_frames) {
  if (forward_frames.size() != backward_frames.size() || forward_frames.empty())
    throw std::invalid_argument("pingpong_loss: sequences must be non-empty and equal length");
  nn::Var acc;
  for (std::size_t i = 0; i < forward_frames.size(); ++i) {
    nn::Var term = nn::mse(forward_frames[i], backward_frames[i]);
    acc = acc ? nn::add(acc, term) : term;
  }
  return nn::scale(acc, 1.0 / static_cast<double>(forward_frames.size()));
}

double pingpong_loss(const std::vector<Frame>& forward_frames,
                     const std::vector<Frame>& backward_frames) {
  std::vector<nn::Var> f, b;
  for (const auto& x : forward_frames) f.push_back(nn::constant(x));
  for (const auto& x : backward_frames) b.push_back(nn::constant(x));
  return pingpong_loss(f, b)->val.item();
}

namespace {

double safe_log(double x) { return std::log(std::max(x, 1e-300)); }

void check_score(double s) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("gan loss: scores must lie strictly in (0, 1)");
}

}  // namespace

double gan_loss_d(double score_real, double score_fake) {
  check_score(score_real);
  check_score(score_fake);
  return -(safe_log(score_real) + safe_log(1.0 - score_fake));
}

double gan_loss_g(double score_fake, GanForm form) {
  check_score(score_fake);
  return form == GanForm::non_saturating ? -safe_log(score_fake)
                                         : safe_log(1.0 - score_fake);
}

nn::Var adversarial_d_loss(const nn::Var& logit_real, const nn::Var& logit_fake) {
  // -ln sigma(lr) - ln(1 - sigma(lf)) = softplus(-lr) + softplus(lf)
  return nn::add(nn::softplus(nn::scale(logit_real, -1.0)), nn::softplus(logit_fake));
}

nn::Var adversarial_g_loss(const nn::Var& logit_fake, GanForm form) {
  if (form == GanForm::non_saturating)
    return nn::softplus(nn::scale(logit_fake, -1.0));  // -ln sigma(lf)
  return nn::scale(nn::softplus(logit_fake), -1.0);    // ln(1 - sigma(lf))
}

nn::Var feature_loss(const std::vector<nn::Var>& feats_gen,
                     const std::vector<nn::Var>& feats_real,
                     const std::vector<double>& layer_weights) {
  if (feats_gen.size() != feats_real.size() || feats_gen.size() != layer_weights.size())
    throw std::invalid_argument("feature_loss: list lengths must match the layer weights");
  if (feats_gen.empty()) throw std::invalid_argument("feature_loss: empty feature lists");
  nn::Var acc;
  for (std::size_t i = 0; i < feats_gen.size(); ++i) {
    if (!feats_gen[i]->val.same_shape(feats_real[i]->val))
      throw std::invalid_argument("feature_loss: per-stage dims must match");
    nn::Var cos = nn::cosine_similarity(feats_gen[i], feats_real[i], 1e-8);
    nn::Var term = nn::scale(nn::add_scalar(nn::scale(cos, -1.0), 1.0), layer_weights[i]);
    acc = acc ? nn::add(acc, term) : term;
  }
  return acc;
}

double feature_loss(const std::vector<Tensor>& feats_gen,
                    const std::vector<Tensor>& feats_real,
                    const std::vector<double>& layer_weights) {
  std::vector<nn::Var> g, r;
  for (const auto& t : feats_gen) g.push_back(nn::constant(t));
  for (const auto& t : feats_real) r.push_back(nn::constant(t));
  return feature_loss(g, r, layer_weights)->val.item();
}

nn::Var warping_loss(const std::vector<nn::Var>& frames, const std::vector<nn::Var>& flows) {
  if (frames.size() < 2)
    throw std::invalid_argument("warping_loss: clip must have at least 2 frames");
  if (flows.size() != frames.size() - 1)
    throw std::invalid_argument("warping_loss: need one flow per consecutive pair");
  nn::Var acc;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    nn::Var warped = nn::warp(frames[t - 1], flows[t - 1]);
    nn::Var term = nn::mse(frames[t], warped);
    acc = acc ? nn::add(acc, term) : term;
  }
  return nn::scale(acc, 1.0 / static_cast<double>(frames.size() - 1));
}

double warping_loss(const VideoClip& clip, const flow::FlowEstimator& estimator) {
  if (clip.length() < 2)
    throw std::invalid_argument("warping_loss: clip must have at least 2 frames");
  std::vector<nn::Var> frames, flows;
  for (const auto& f : clip.frames) frames.push_back(nn::constant(f));
  for (int t = 1; t < clip.length(); ++t)
    flows.push_back(nn::constant(estimator.estimate(clip.frames[t - 1], clip.frames[t])));
  return warping_loss(frames, flows)->val.item();
}

TotalLoss total_generator_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  TotalLoss out;
  nn::Var acc;
  auto fold = [&](const std::optional<nn::Var>& term, double weight, double& slot) {
    if (!term) return;
    slot = (*term)->val.item();
    if (weight == 0.0) return;
    nn::Var scaled = nn::scale(*term, weight);
    acc = acc ? nn::add(acc, scaled) : scaled;
  };
  fold(terms.adv, weights.adv, out.bundle.adv);
  fold(terms.pixel, weights.pixel, out.bundle.pixel);
  fold(terms.pingpong, weights.pingpong, out.bundle.pingpong);
  fold(terms.feature, weights.feature, out.bundle.feature);
  fold(terms.warp, weights.warp, out.bundle.warp);
  out.total = acc ? acc : nn::constant(Tensor::scalar(0.0));
  out.bundle.total = weights.adv * out.bundle.adv + weights.pixel * out.bundle.pixel +
                     weights.pingpong * out.bundle.pingpong +
                     weights.feature * out.bundle.feature + weights.warp * out.bundle.warp;
  return out;
}

}  // namespace vsr::losses
