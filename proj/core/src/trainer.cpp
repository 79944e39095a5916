#include "vsr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vsr/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vsr::trainer {

Preset preset_from_string(const std::string& s) {
  if (s == "exp4_1") return Preset::exp4_1;
  if (s == "exp4_2") return Preset::exp4_2;
  if (s == "exp4_3") return Preset::exp4_3;
  if (s == "rbpn_only") return Preset::rbpn_only;
  throw std::invalid_argument("unknown experiment preset: " + s);
}

std::string to_string(Preset preset) {
  switch (preset) {
    case Preset::exp4_1: return "exp4_1";
    case Preset::exp4_2: return "exp4_2";
    case Preset::exp4_3: return "exp4_3";
    case Preset::rbpn_only: return "rbpn_only";
  }
  return "?";
}

TrainConfig TrainConfig::preset_defaults(Preset preset) {
  TrainConfig c;
  c.preset = preset;
  switch (preset) {
    case Preset::exp4_1:
      c.use_pingpong = true;
      c.n_neighbors = 2;
      break;
    case Preset::exp4_2:
      c.use_pingpong = false;
      c.n_neighbors = 3;
      c.weights.pingpong = 0.0;
      break;
    case Preset::exp4_3:
      c.use_pingpong = false;
      c.n_neighbors = 3;
      c.weights.pingpong = 0.0;
      c.pretrain_generator_steps = c.total_steps / 4;
      break;
    case Preset::rbpn_only:
      c.use_pingpong = false;
      c.n_neighbors = 3;
      c.weights.adv = 0.0;
      c.weights.feature = 0.0;
      c.weights.pingpong = 0.0;
      break;
  }
  c.generator.n_neighbors = c.n_neighbors;
  return c;
}

int TrainConfig::min_clip_frames() const {
  int m = 1;
  if (weights.warp > 0.0) m = std::max(m, 2);
  if (use_pingpong) m = std::max(m, 2);
  if (weights.adv > 0.0 || weights.feature > 0.0) m = std::max(m, 3);
  return m;
}

double TrainConfig::lr_at(int step) const {
  const int third = std::min(2, (3 * step) / std::max(1, total_steps));
  return learning_rate * std::pow(0.5, third);
}

void TrainConfig::validate() const {
  if (total_steps < 1) throw std::invalid_argument("train config: total_steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (crop < 1) throw std::invalid_argument("train config: crop must be >= 1");
  if (scale != 4) throw std::invalid_argument("train config: only scale 4 is supported");
  if (checkpoint_every < 1)
    throw std::invalid_argument("train config: checkpoint_every must be >= 1");
  if (learning_rate <= 0.0)
    throw std::invalid_argument("train config: learning_rate must be positive");
  weights.validate();
  generator.validate();
  discriminator.validate();
  if (generator.n_neighbors != n_neighbors)
    throw std::invalid_argument("train config: generator n_neighbors out of sync");
  switch (preset) {
    case Preset::exp4_1:
      if (!use_pingpong || n_neighbors != 2)
        throw std::invalid_argument(
            "preset exp4_1 requires use_pingpong = true and n_neighbors = 2");
      break;
    case Preset::exp4_2:
      if (use_pingpong || n_neighbors != 3)
        throw std::invalid_argument(
            "preset exp4_2 requires use_pingpong = false and n_neighbors = 3");
      break;
    case Preset::exp4_3:
      if (use_pingpong || n_neighbors != 3)
        throw std::invalid_argument(
            "preset exp4_3 requires use_pingpong = false and n_neighbors = 3");
      if (pretrain_generator_steps <= 0)
        throw std::invalid_argument("preset exp4_3 requires pretrain_generator_steps > 0");
      break;
    case Preset::rbpn_only:
      if (weights.adv != 0.0 || weights.feature != 0.0 || weights.pingpong != 0.0)
        throw std::invalid_argument(
            "preset rbpn_only requires zero adversarial, feature and ping-pong weights");
      break;
  }
  if (pretrain_generator_steps < 0 || pretrain_generator_steps > total_steps)
    throw std::invalid_argument(
        "train config: pretrain_generator_steps must lie in [0, total_steps]");
  if (clip_frames < min_clip_frames())
    throw std::invalid_argument("train config: this loss configuration needs clips of at least " +
                                std::to_string(min_clip_frames()) + " frames");
  if (weights.feature > 0.0 &&
      weights.feature_layer_weights.size() != discriminator.stage_channels.size())
    throw std::invalid_argument(
        "train config: feature_layer_weights count must match discriminator stages");
}

TrainConfig TrainConfig::from_kv(const cfg::KvMap& kv_in) {
  cfg::KvMap kv = kv_in;
  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    std::string v;
    if (it != kv.end()) {
      v = it->second;
      kv.erase(it);
    }
    return v;
  };
  const std::string preset_str = take("preset");
  TrainConfig c = preset_defaults(preset_str.empty() ? Preset::exp4_2
                                                     : preset_from_string(preset_str));
  cfg::KvMap rest = kv;

  c.n_neighbors = cfg::get_int(rest, "n_neighbors", c.n_neighbors);
  c.use_pingpong = cfg::get_bool(rest, "use_pingpong", c.use_pingpong);
  c.total_steps = cfg::get_int(rest, "total_steps", c.total_steps);
  if (c.preset == Preset::exp4_3 && !cfg::has(rest, "pretrain_generator_steps"))
    c.pretrain_generator_steps = std::max(1, c.total_steps / 4);
  c.pretrain_generator_steps =
      cfg::get_int(rest, "pretrain_generator_steps", c.pretrain_generator_steps);
  c.learning_rate = cfg::get_double(rest, "learning_rate", c.learning_rate);
  c.adam_beta1 = cfg::get_double(rest, "adam_beta1", c.adam_beta1);
  c.adam_beta2 = cfg::get_double(rest, "adam_beta2", c.adam_beta2);
  c.adam_eps = cfg::get_double(rest, "adam_eps", c.adam_eps);
  c.batch_size = cfg::get_int(rest, "batch_size", c.batch_size);
  c.crop = cfg::get_int(rest, "crop", c.crop);
  c.scale = cfg::get_int(rest, "scale", c.scale);
  c.clip_frames = cfg::get_int(rest, "clip_frames", c.clip_frames);
  if (cfg::has(rest, "seed")) c.seed = std::stoull(cfg::get_string(rest, "seed", "1"));
  c.data_root = cfg::get_string(rest, "data_root", c.data_root);
  c.out_dir = cfg::get_string(rest, "out_dir", c.out_dir);
  c.checkpoint_every = cfg::get_int(rest, "checkpoint_every", c.checkpoint_every);
  c.weights.adv = cfg::get_double(rest, "lambda_adv", c.weights.adv);
  c.weights.pixel = cfg::get_double(rest, "lambda_pixel", c.weights.pixel);
  c.weights.pingpong = cfg::get_double(rest, "lambda_pingpong", c.weights.pingpong);
  c.weights.feature = cfg::get_double(rest, "lambda_feature", c.weights.feature);
  c.weights.warp = cfg::get_double(rest, "lambda_warp", c.weights.warp);
  c.weights.feature_layer_weights =
      cfg::get_double_list(rest, "feature_layer_weights", c.weights.feature_layer_weights);
  c.gan_form = losses::gan_form_from_string(
      cfg::get_string(rest, "gan_form", losses::to_string(c.gan_form)));
  c.generator.base_channels = cfg::get_int(rest, "gen_base_channels", c.generator.base_channels);
  c.generator.n_residual_blocks =
      cfg::get_int(rest, "gen_residual_blocks", c.generator.n_residual_blocks);
  c.generator.bicubic_skip = cfg::get_bool(rest, "gen_bicubic_skip", c.generator.bicubic_skip);
  c.discriminator.stage_channels =
      cfg::get_int_list(rest, "disc_stage_channels", c.discriminator.stage_channels);
  c.discriminator.leaky_slope =
      cfg::get_double(rest, "disc_leaky_slope", c.discriminator.leaky_slope);
  c.discriminator.include_warped_triplet = cfg::get_bool(
      rest, "disc_include_warped_triplet", c.discriminator.include_warped_triplet);
  c.flownet.levels = cfg::get_int(rest, "flow_levels", c.flownet.levels);
  c.flownet.channels = cfg::get_int(rest, "flow_channels", c.flownet.channels);
  c.generator.n_neighbors = c.n_neighbors;
  c.generator.scale = c.scale;

  static const char* kKnown[] = {
      "n_neighbors", "use_pingpong", "pretrain_generator_steps", "total_steps",
      "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "batch_size", "crop",
      "scale", "clip_frames", "seed", "data_root", "out_dir", "checkpoint_every",
      "lambda_adv", "lambda_pixel", "lambda_pingpong", "lambda_feature", "lambda_warp",
      "feature_layer_weights", "gan_form", "gen_base_channels", "gen_residual_blocks",
      "gen_bicubic_skip", "disc_stage_channels", "disc_leaky_slope",
      "disc_include_warped_triplet", "flow_levels", "flow_channels"};
  for (const auto& [key, value] : rest) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw std::invalid_argument("unknown config key: " + key);
  }

  c.validate();
  return c;
}

cfg::KvMap TrainConfig::to_kv() const {
  cfg::KvMap kv;
  auto put_d = [&kv](const std::string& k, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    kv[k] = os.str();
  };
  kv["preset"] = to_string(preset);
  kv["n_neighbors"] = std::to_string(n_neighbors);
  kv["use_pingpong"] = use_pingpong ? "true" : "false";
  kv["pretrain_generator_steps"] = std::to_string(pretrain_generator_steps);
  kv["total_steps"] = std::to_string(total_steps);
  put_d("learning_rate", learning_rate);
  put_d("adam_beta1", adam_beta1);
  put_d("adam_beta2", adam_beta2);
  put_d("adam_eps", adam_eps);
  kv["batch_size"] = std::to_string(batch_size);
  kv["crop"] = std::to_string(crop);
  kv["scale"] = std::to_string(scale);
  kv["clip_frames"] = std::to_string(clip_frames);
  kv["seed"] = std::to_string(seed);
  kv["data_root"] = data_root;
  kv["out_dir"] = out_dir;
  kv["checkpoint_every"] = std::to_string(checkpoint_every);
  put_d("lambda_adv", weights.adv);
  put_d("lambda_pixel", weights.pixel);
  put_d("lambda_pingpong", weights.pingpong);
  put_d("lambda_feature", weights.feature);
  put_d("lambda_warp", weights.warp);
  {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < weights.feature_layer_weights.size(); ++i)
      os << (i ? "," : "") << weights.feature_layer_weights[i];
    kv["feature_layer_weights"] = os.str();
  }
  kv["gan_form"] = losses::to_string(gan_form);
  kv["gen_base_channels"] = std::to_string(generator.base_channels);
  kv["gen_residual_blocks"] = std::to_string(generator.n_residual_blocks);
  kv["gen_bicubic_skip"] = generator.bicubic_skip ? "true" : "false";
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < discriminator.stage_channels.size(); ++i)
      os << (i ? "," : "") << discriminator.stage_channels[i];
    kv["disc_stage_channels"] = os.str();
  }
  put_d("disc_leaky_slope", discriminator.leaky_slope);
  kv["disc_include_warped_triplet"] = discriminator.include_warped_triplet ? "true" : "false";
  kv["flow_levels"] = std::to_string(flownet.levels);
  kv["flow_channels"] = std::to_string(flownet.channels);
  return kv;
}

Adam::Adam(std::vector<nn::Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p->val.h, p->val.w, p->val.c);
    v_.emplace_back(p->val.h, p->val.w, p->val.c);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i]->val;
    const Tensor& g = params_[i]->grad;
    const bool has_grad = g.numel() == p.numel();
    for (std::size_t k = 0; k < p.v.size(); ++k) {
      const double gk = has_grad ? g.v[k] : 0.0;
      m_[i].v[k] = beta1_ * m_[i].v[k] + (1.0 - beta1_) * gk;
      v_[i].v[k] = beta2_ * v_[i].v[k] + (1.0 - beta2_) * gk * gk;
      const double mhat = m_[i].v[k] / bc1;
      const double vhat = v_[i].v[k] / bc2;
      p.v[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) nn::zero_grad(p);
}

void Adam::put_state(ckpt::Archive& archive, const std::string& prefix,
                     const std::vector<std::string>& names) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    archive.put(prefix + ".m." + names[i], m_[i]);
    archive.put(prefix + ".v." + names[i], v_[i]);
  }
}

void Adam::load_state(const ckpt::Archive& archive, const std::string& prefix,
                      const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor* m = archive.find(prefix + ".m." + names[i]);
    const Tensor* v = archive.find(prefix + ".v." + names[i]);
    if (!m || !v) throw DataError("checkpoint missing optimizer state for " + names[i]);
    m_[i] = *m;
    v_[i] = *v;
  }
}

namespace {

std::vector<std::pair<std::string, nn::Var>> all_g_params(const gen::Generator& g,
                                                          const flow::FlowNet& f) {
  auto params = g.named_params("gen");
  auto fp = f.named_params("flow");
  params.insert(params.end(), fp.begin(), fp.end());
  return params;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, std::vector<dataio::LRHRPair> dataset)
    : config_(config), data_(std::move(dataset)), data_rng_(config.seed ^ 0x9E3779B97F4A7C15ULL) {
  config_.validate();
  if (data_.empty()) throw std::invalid_argument("trainer: dataset is empty");
  for (const auto& pair : data_) {
    pair.validate(config_.scale);
    if (pair.lr.length() < config_.clip_frames)
      throw std::invalid_argument("trainer: scene '" + pair.lr.scene_id + "' has " +
                                  std::to_string(pair.lr.length()) +
                                  " frames but this configuration needs at least " +
                                  std::to_string(config_.clip_frames));
    if (pair.lr.height() < config_.crop || pair.lr.width() < config_.crop)
      throw std::invalid_argument("trainer: scene '" + pair.lr.scene_id +
                                  "' is smaller than the crop size");
  }
  Rng init_rng(config_.seed);
  gen_ = std::make_unique<gen::Generator>(config_.generator, init_rng);
  disc_ = std::make_unique<disc::Discriminator>(config_.discriminator, init_rng);
  flow_ = std::make_shared<flow::FlowNet>(config_.flownet, init_rng);

  std::vector<nn::Var> gp;
  for (auto& [n, v] : all_g_params(*gen_, *flow_)) gp.push_back(v);
  opt_g_ = std::make_unique<Adam>(std::move(gp), config_.adam_beta1, config_.adam_beta2,
                                  config_.adam_eps);
  std::vector<nn::Var> dp;
  for (auto& [n, v] : disc_->named_params("disc")) dp.push_back(v);
  opt_d_ = std::make_unique<Adam>(std::move(dp), config_.adam_beta1, config_.adam_beta2,
                                  config_.adam_eps);
}

std::vector<Trainer::Sample> Trainer::sample_batch() {
  std::vector<Sample> batch;
  batch.reserve(config_.batch_size);
  for (int b = 0; b < config_.batch_size; ++b) {
    const int scene = data_rng_.uniform_int(0, static_cast<int>(data_.size()) - 1);
    const dataio::LRHRPair& pair = data_[scene];
    const int start = data_rng_.uniform_int(0, pair.lr.length() - config_.clip_frames);
    const int oy = data_rng_.uniform_int(0, pair.lr.height() - config_.crop);
    const int ox = data_rng_.uniform_int(0, pair.lr.width() - config_.crop);
    Sample s;
    for (int t = 0; t < config_.clip_frames; ++t) {
      s.lr.push_back(kern::crop(pair.lr.frames[start + t], oy, ox, config_.crop, config_.crop));
      s.hr.push_back(kern::crop(pair.hr.frames[start + t], oy * config_.scale,
                                ox * config_.scale, config_.crop * config_.scale,
                                config_.crop * config_.scale));
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

double Trainer::discriminator_update(const std::vector<Sample>& batch, double lr) {
  opt_d_->zero_grad();
  const int L = config_.clip_frames;
  const int m = L / 2;
  const flow::FlowEstimator est = flow::FlowEstimator::learned(flow_);
  double total = 0.0;
  for (const auto& s : batch) {
    disc::Triplet real, fake, up;
    for (int k = -1; k <= 1; ++k) {
      const int t = m + k;
      gen::NeighborPack pack;
      for (int idx : gen::neighbor_indices(t, L, config_.n_neighbors))
        pack.push_back({s.lr[idx], est.estimate(s.lr[idx], s.lr[t])});
      fake.frames[k + 1] = gen_->generate(s.lr[t], pack, /*clamp=*/false);
      real.frames[k + 1] = s.hr[t];
      up.frames[k + 1] = kern::bicubic_upsample(s.lr[t], config_.scale);
    }
    auto d_real = disc_->forward(nn::constant(disc::assemble_input(real, up)));
    auto d_fake = disc_->forward(nn::constant(disc::assemble_input(fake, up)));
    nn::Var loss = losses::adversarial_d_loss(d_real.logit, d_fake.logit);
    total += loss->val.item();
    nn::backward(nn::scale(loss, 1.0 / config_.batch_size));
  }
  opt_d_->step(lr);
  return total / config_.batch_size;
}

losses::LossBundle Trainer::generator_update(const std::vector<Sample>& batch, bool pretrain,
                                             double lr) {
  opt_g_->zero_grad();
  losses::LossWeights w = config_.weights;
  if (pretrain) {
    w.adv = 0.0;
    w.feature = 0.0;
  }
  const int L = config_.clip_frames;
  const int m = L / 2;
  const bool pp = config_.use_pingpong;
  const bool need_disc = w.adv > 0.0 || w.feature > 0.0;

  losses::LossBundle acc;
  for (const auto& s : batch) {
    // Sequence positions; with ping-pong the clip is expanded to the
    // palindrome and the generator runs over the whole of it.
    std::vector<int> seq;
    for (int i = 0; i < L; ++i) seq.push_back(i);
    if (pp)
      for (int i = L - 2; i >= 0; --i) seq.push_back(i);
    const int S = static_cast<int>(seq.size());

    std::vector<nn::Var> lrv(L), hrv(L);
    for (int i = 0; i < L; ++i) {
      lrv[i] = nn::constant(s.lr[i]);
      hrv[i] = nn::constant(s.hr[i]);
    }

    std::map<std::pair<int, int>, nn::Var> flow_cache;
    auto get_flow = [&](int src, int dst) {
      const auto key = std::make_pair(src, dst);
      auto it = flow_cache.find(key);
      if (it != flow_cache.end()) return it->second;
      nn::Var f = flow_->forward(lrv[src], lrv[dst]);
      flow_cache.emplace(key, f);
      return f;
    };

    std::vector<nn::Var> outputs(S);
    for (int pos = 0; pos < S; ++pos) {
      const int t = seq[pos];
      std::vector<gen::NeighborVar> pack;
      for (int nb : gen::neighbor_indices(pos, S, config_.n_neighbors))
        pack.push_back({lrv[seq[nb]], get_flow(seq[nb], t)});
      outputs[pos] = gen_->forward(lrv[t], pack);
    }

    losses::LossTerms terms;
    {
      nn::Var px;
      for (int pos = 0; pos < S; ++pos) {
        nn::Var term = nn::mse(outputs[pos], hrv[seq[pos]]);
        px = px ? nn::add(px, term) : term;
      }
      terms.pixel = nn::scale(px, 1.0 / S);
    }
    if (pp && w.pingpong > 0.0) {
      std::vector<nn::Var> fwd, bwd;
      for (int t = 0; t <= L - 2; ++t) {
        fwd.push_back(outputs[t]);
        bwd.push_back(outputs[2 * L - 2 - t]);
      }
      terms.pingpong = losses::pingpong_loss(fwd, bwd);
    }
    if (need_disc) {
      std::vector<nn::Var> fake_in, real_in;
      std::vector<nn::Var> ups;
      for (int k = -1; k <= 1; ++k)
        ups.push_back(nn::constant(kern::bicubic_upsample(s.lr[m + k], config_.scale)));
      fake_in = {outputs[m - 1], outputs[m], outputs[m + 1], ups[0], ups[1], ups[2]};
      auto d_fake = disc_->forward(nn::concat_channels(fake_in));
      if (w.adv > 0.0) terms.adv = losses::adversarial_g_loss(d_fake.logit, config_.gan_form);
      if (w.feature > 0.0) {
        real_in = {hrv[m - 1], hrv[m], hrv[m + 1], ups[0], ups[1], ups[2]};
        auto d_real = disc_->forward(nn::concat_channels(real_in));
        terms.feature = losses::feature_loss(d_fake.features, d_real.features,
                                             w.feature_layer_weights);
      }
    }
    if (w.warp > 0.0) {
      std::vector<nn::Var> frames(lrv.begin(), lrv.end());
      std::vector<nn::Var> flows;
      for (int t = 1; t < L; ++t) flows.push_back(get_flow(t - 1, t));
      terms.warp = losses::warping_loss(frames, flows);
    }

    losses::TotalLoss total = losses::total_generator_loss(terms, w);
    nn::backward(nn::scale(total.total, 1.0 / config_.batch_size));
    acc.adv += total.bundle.adv;
    acc.pixel += total.bundle.pixel;
    acc.pingpong += total.bundle.pingpong;
    acc.feature += total.bundle.feature;
    acc.warp += total.bundle.warp;
    acc.total += total.bundle.total;
  }
  opt_g_->step(lr);
  const double inv = 1.0 / config_.batch_size;
  acc.adv *= inv;
  acc.pixel *= inv;
  acc.pingpong *= inv;
  acc.feature *= inv;
  acc.warp *= inv;
  acc.total *= inv;
  return acc;
}

StepResult Trainer::step() {
  StepResult r;
  r.step = step_;
  r.pretrain_phase = step_ < config_.pretrain_generator_steps;
  r.lr = config_.lr_at(step_);
  const auto batch = sample_batch();
  if (!r.pretrain_phase && config_.weights.adv > 0.0) {
    r.d_loss = discriminator_update(batch, r.lr);
    r.d_updated = true;
  }
  r.losses = generator_update(batch, r.pretrain_phase, r.lr);
  if (!running_init_) {
    running_ = r.losses;
    running_init_ = true;
  } else {
    auto ema = [](double a, double x) { return 0.99 * a + 0.01 * x; };
    running_.adv = ema(running_.adv, r.losses.adv);
    running_.pixel = ema(running_.pixel, r.losses.pixel);
    running_.pingpong = ema(running_.pingpong, r.losses.pingpong);
    running_.feature = ema(running_.feature, r.losses.feature);
    running_.warp = ema(running_.warp, r.losses.warp);
    running_.total = ema(running_.total, r.losses.total);
  }
  ++step_;
  return r;
}

void Trainer::save_checkpoint(const std::string& path) const {
  ckpt::Archive a;
  json meta;
  meta["format"] = "vsr-checkpoint";
  meta["version"] = 1;
  meta["step"] = step_;
  meta["seed"] = config_.seed;
  // Runtime locations are not model state; dropping them keeps checkpoints
  // byte-identical across runs that only differ in output directory.
  cfg::KvMap kv = config_.to_kv();
  kv.erase("out_dir");
  kv.erase("data_root");
  meta["config"] = json(kv);
  meta["rng_data"] = data_rng_.serialize();
  meta["adam_g_t"] = opt_g_->t();
  meta["adam_d_t"] = opt_d_->t();
  meta["running"] = {{"adv", running_.adv},       {"pixel", running_.pixel},
                     {"pingpong", running_.pingpong}, {"feature", running_.feature},
                     {"warp", running_.warp},     {"total", running_.total},
                     {"init", running_init_}};
  a.meta_json = meta.dump();

  std::vector<std::string> g_names, d_names;
  for (const auto& [n, v] : all_g_params(*gen_, *flow_)) {
    a.put(n, v->val);
    g_names.push_back(n);
  }
  for (const auto& [n, v] : disc_->named_params("disc")) {
    a.put(n, v->val);
    d_names.push_back(n);
  }
  opt_g_->put_state(a, "adam_g", g_names);
  opt_d_->put_state(a, "adam_d", d_names);
  ckpt::save_archive(path, a);
}

namespace {

TrainConfig config_from_meta(const json& meta) {
  cfg::KvMap kv;
  for (const auto& [k, v] : meta.at("config").items()) kv[k] = v.get<std::string>();
  return TrainConfig::from_kv(kv);
}

}  // namespace

Trainer Trainer::from_checkpoint(const std::string& path,
                                 std::vector<dataio::LRHRPair> dataset) {
  const ckpt::Archive a = ckpt::load_archive(path);
  json meta;
  try {
    meta = json::parse(a.meta_json);
  } catch (const json::exception&) {
    throw DataError("checkpoint has malformed metadata: " + path);
  }
  if (meta.value("format", "") != "vsr-checkpoint")
    throw DataError("archive is not a training checkpoint: " + path);

  Trainer tr(config_from_meta(meta), std::move(dataset));
  std::vector<std::string> g_names, d_names;
  for (const auto& [n, v] : all_g_params(*tr.gen_, *tr.flow_)) {
    const Tensor* t = a.find(n);
    if (!t || !t->same_shape(v->val))
      throw DataError("checkpoint missing or mismatched tensor: " + n);
    v->val = *t;
    g_names.push_back(n);
  }
  for (const auto& [n, v] : tr.disc_->named_params("disc")) {
    const Tensor* t = a.find(n);
    if (!t || !t->same_shape(v->val))
      throw DataError("checkpoint missing or mismatched tensor: " + n);
    v->val = *t;
    d_names.push_back(n);
  }
  tr.opt_g_->load_state(a, "adam_g", g_names);
  tr.opt_d_->load_state(a, "adam_d", d_names);
  tr.opt_g_->set_t(meta.at("adam_g_t").get<int>());
  tr.opt_d_->set_t(meta.at("adam_d_t").get<int>());
  tr.data_rng_.deserialize(meta.at("rng_data").get<std::string>());
  tr.step_ = meta.at("step").get<int>();
  const auto& run = meta.at("running");
  tr.running_.adv = run.at("adv").get<double>();
  tr.running_.pixel = run.at("pixel").get<double>();
  tr.running_.pingpong = run.at("pingpong").get<double>();
  tr.running_.feature = run.at("feature").get<double>();
  tr.running_.warp = run.at("warp").get<double>();
  tr.running_.total = run.at("total").get<double>();
  tr.running_init_ = run.at("init").get<bool>();
  return tr;
}

namespace {

std::string step_filename(int step) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_step%06d.vsr", step);
  return buf;
}

json step_to_json(const StepResult& r) {
  json j;
  j["step"] = r.step;
  j["phase"] = r.pretrain_phase ? "pretrain" : "adversarial";
  j["adv"] = r.losses.adv;
  j["pixel"] = r.losses.pixel;
  j["pingpong"] = r.losses.pingpong;
  j["feature"] = r.losses.feature;
  j["warp"] = r.losses.warp;
  j["total"] = r.losses.total;
  j["d_loss"] = r.d_loss;
  j["d_updated"] = r.d_updated;
  j["lr"] = r.lr;
  return j;
}

}  // namespace

TrainOutput train(const TrainConfig& config, std::vector<dataio::LRHRPair> dataset,
                  const std::string& resume_from) {
  const bool resuming = !resume_from.empty();
  Trainer tr = resuming ? Trainer::from_checkpoint(resume_from, std::move(dataset))
                        : Trainer(config, std::move(dataset));
  const TrainConfig& cfg = tr.config();
  const std::string out_dir = config.out_dir;  // runtime location from the caller
  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  const std::string timing_path = (fs::path(out_dir) / "train_timing.jsonl").string();
  std::ofstream log(log_path, resuming ? std::ios::app : std::ios::trunc);
  std::ofstream timing(timing_path, resuming ? std::ios::app : std::ios::trunc);
  if (!log || !timing) throw DataError("cannot open training logs under: " + out_dir);

  TrainOutput out;
  out.log_path = log_path;
  while (tr.current_step() < cfg.total_steps) {
    const auto t0 = std::chrono::steady_clock::now();
    StepResult r = tr.step();
    const auto t1 = std::chrono::steady_clock::now();
    log << step_to_json(r).dump() << "\n";
    log.flush();
    timing << json{{"step", r.step},
                   {"wall_ms",
                    std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() /
                        1000.0}}
                  .dump()
           << "\n";
    timing.flush();
    if ((r.step + 1) % cfg.checkpoint_every == 0 && r.step + 1 < cfg.total_steps)
      tr.save_checkpoint((fs::path(cfg.out_dir) / step_filename(r.step + 1)).string());
    out.steps.push_back(r);
  }
  out.final_checkpoint = (fs::path(cfg.out_dir) / "checkpoint_final.vsr").string();
  tr.save_checkpoint(out.final_checkpoint);
  return out;
}

std::string pretrain_generator(const TrainConfig& config,
                               std::vector<dataio::LRHRPair> dataset) {
  if (config.pretrain_generator_steps <= 0)
    throw std::invalid_argument("pretrain_generator: pretrain_generator_steps must be > 0");
  TrainConfig c = config;
  c.total_steps = c.pretrain_generator_steps;
  Trainer tr(c, std::move(dataset));
  fs::create_directories(c.out_dir);
  while (tr.current_step() < c.total_steps) tr.step();
  const std::string path = (fs::path(c.out_dir) / "checkpoint_pretrain.vsr").string();
  tr.save_checkpoint(path);
  return path;
}

VideoClip InferModel::infer(const VideoClip& lr_clip) const {
  return generator->generate_sequence(lr_clip, flow::FlowEstimator::learned(flownet),
                                      /*clamp=*/true);
}

InferModel load_for_inference(const std::string& checkpoint_path) {
  const ckpt::Archive a = ckpt::load_archive(checkpoint_path);
  json meta;
  try {
    meta = json::parse(a.meta_json);
  } catch (const json::exception&) {
    throw DataError("checkpoint has malformed metadata: " + checkpoint_path);
  }
  if (meta.value("format", "") != "vsr-checkpoint")
    throw DataError("archive is not a training checkpoint: " + checkpoint_path);
  InferModel model;
  model.config = config_from_meta(meta);
  model.step = meta.at("step").get<int>();
  Rng rng(model.config.seed);
  model.generator = std::make_unique<gen::Generator>(model.config.generator, rng);
  model.flownet = std::make_shared<flow::FlowNet>(model.config.flownet, rng);
  for (const auto& [n, v] : model.generator->named_params("gen")) {
    const Tensor* t = a.find(n);
    if (!t || !t->same_shape(v->val))
      throw DataError("checkpoint missing or mismatched tensor: " + n);
    v->val = *t;
  }
  for (const auto& [n, v] : model.flownet->named_params("flow")) {
    const Tensor* t = a.find(n);
    if (!t || !t->same_shape(v->val))
      throw DataError("checkpoint missing or mismatched tensor: " + n);
    v->val = *t;
  }
  return model;
}

}  // namespace vsr::trainer
