#include "vsr/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsr::disc {

void Triplet::validate() const {
  for (const auto& f : frames) {
    if (f.c != 3) throw std::invalid_argument("triplet: frames must have 3 channels");
    if (f.h != frames[0].h || f.w != frames[0].w)
      throw std::invalid_argument("triplet: heterogeneous frame dims");
  }
}

void DiscriminatorConfig::validate() const {
  if (stage_channels.empty())
    throw std::invalid_argument("discriminator: at least one conv stage required");
  for (int c : stage_channels)
    if (c < 1) throw std::invalid_argument("discriminator: stage widths must be positive");
}

namespace {

Tensor concat6(const std::array<const Triplet*, 3>& parts, int count) {
  const Frame& ref = parts[0]->frames[0];
  Tensor out(ref.h, ref.w, count * 9);
  for (int y = 0; y < ref.h; ++y)
    for (int x = 0; x < ref.w; ++x) {
      double* op = out.px(y, x);
      int off = 0;
      for (int p = 0; p < count; ++p)
        for (const auto& f : parts[p]->frames) {
          const double* ip = f.px(y, x);
          op[off++] = ip[0];
          op[off++] = ip[1];
          op[off++] = ip[2];
        }
    }
  return out;
}

void check_dims(const Triplet& a, const Triplet& b) {
  a.validate();
  b.validate();
  if (a.frames[0].h != b.frames[0].h || a.frames[0].w != b.frames[0].w)
    throw std::invalid_argument("assemble_input: triplet dims must match");
}

}  // namespace

Tensor assemble_input(const Triplet& hr, const Triplet& lr_upsampled) {
  check_dims(hr, lr_upsampled);
  return concat6({&hr, &lr_upsampled, nullptr}, 2);
}

Tensor assemble_input(const Triplet& hr, const Triplet& lr_upsampled, const Triplet& warped) {
  check_dims(hr, lr_upsampled);
  check_dims(hr, warped);
  return concat6({&hr, &lr_upsampled, &warped}, 3);
}

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  int ci = config_.in_channels();
  for (int co : config_.stage_channels) {
    Tensor w(3, 3, ci * co);
    const double stddev = std::sqrt(2.0 / (9.0 * ci));
    for (double& v : w.v) v = rng.normal(0.0, stddev);
    stages_.push_back({nn::leaf(std::move(w)), nn::leaf(Tensor(1, 1, co))});
    ci = co;
  }
  Tensor hw(1, 1, ci);
  const double stddev = std::sqrt(1.0 / ci);
  for (double& v : hw.v) v = rng.normal(0.0, stddev);
  head_w = nn::leaf(std::move(hw));
  head_b = nn::leaf(Tensor(1, 1, 1));
}

Discriminator::GraphOutput Discriminator::forward(const nn::Var& input) const {
  if (input->val.c != config_.in_channels())
    throw std::invalid_argument("discriminate: expected " +
                                std::to_string(config_.in_channels()) + " input channels, got " +
                                std::to_string(input->val.c));
  GraphOutput out;
  nn::Var x = input;
  int ci = config_.in_channels();
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const int co = config_.stage_channels[i];
    x = nn::leaky_relu(nn::conv2d(x, stages_[i].w, stages_[i].b, ci, co, 2, 1),
                       config_.leaky_slope);
    out.features.push_back(x);
    ci = co;
  }
  nn::Var pooled = nn::global_avg_pool(x);
  out.logit = nn::conv2d(pooled, head_w, head_b, ci, 1, 1, 0);
  return out;
}

DiscOutput Discriminator::discriminate(const Tensor& input) const {
  GraphOutput g = forward(nn::constant(input));
  DiscOutput out;
  out.logit = g.logit->val.item();
  const double clamped_logit = std::clamp(out.logit, -40.0, 40.0);
  out.score = 1.0 / (1.0 + std::exp(-clamped_logit));
  out.features.reserve(g.features.size());
  for (const auto& f : g.features) out.features.push_back(f->val);
  return out;
}

std::vector<std::pair<std::string, nn::Var>> Discriminator::named_params(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, nn::Var>> out;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    out.emplace_back(prefix + ".stage" + std::to_string(i) + ".w", stages_[i].w);
    out.emplace_back(prefix + ".stage" + std::to_string(i) + ".b", stages_[i].b);
  }
  out.emplace_back(prefix + ".head.w", head_w);
  out.emplace_back(prefix + ".head.b", head_b);
  return out;
}

std::size_t Discriminator::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : named_params("d")) n += v->val.numel();
  return n;
}

}  // namespace vsr::disc
