#include "vsr/generator.hpp"

#include <cmath>
#include <stdexcept>

#include "vsr/kernels.hpp"

namespace vsr::gen {

void GeneratorConfig::validate() const {
  if (scale != 4) throw std::invalid_argument("generator: only scale 4 is supported");
  if (n_neighbors < 1) throw std::invalid_argument("generator: n_neighbors must be >= 1");
  if (base_channels < 8) throw std::invalid_argument("generator: base_channels must be >= 8");
  if (n_residual_blocks < 1)
    throw std::invalid_argument("generator: n_residual_blocks must be >= 1");
}

std::vector<int> neighbor_indices(int t, int clip_len, int n_neighbors) {
  auto reflect101 = [clip_len](int i) {
    if (clip_len == 1) return 0;
    const int period = 2 * (clip_len - 1);
    i %= period;
    if (i < 0) i += period;
    return i < clip_len ? i : period - i;
  };
  std::vector<int> out;
  out.reserve(n_neighbors);
  int mag = 1;
  while (static_cast<int>(out.size()) < n_neighbors) {
    out.push_back(reflect101(t - mag));
    if (static_cast<int>(out.size()) < n_neighbors) out.push_back(reflect101(t + mag));
    ++mag;
  }
  return out;
}

namespace {

nn::Var conv_init(Rng& rng, int kh, int kw, int ci, int co) {
  Tensor w(kh, kw, ci * co);
  const double stddev = std::sqrt(2.0 / (kh * kw * ci));
  for (double& v : w.v) v = rng.normal(0.0, stddev);
  return nn::leaf(std::move(w));
}

nn::Var bias_init(int co) { return nn::leaf(Tensor(1, 1, co)); }
nn::Var prelu_init() { return nn::leaf(Tensor::scalar(0.25)); }

}  // namespace

Generator::Generator(const GeneratorConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int c = config_.base_channels;

  feat_t_w = conv_init(rng, 3, 3, 3, c);
  feat_t_b = bias_init(c);
  feat_t_a = prelu_init();
  feat_n_w = conv_init(rng, 3, 3, 8, c);
  feat_n_b = bias_init(c);
  feat_n_a = prelu_init();

  auto make_up = [&](UpPair& up) {
    up.w1 = conv_init(rng, 4, 4, c, c);
    up.b1 = bias_init(c);
    up.a1 = prelu_init();
    up.w2 = conv_init(rng, 4, 4, c, c);
    up.b2 = bias_init(c);
    up.a2 = prelu_init();
  };
  make_up(sisr_up_);
  make_up(misr_up_);

  auto make_res = [&]() {
    ResBlock rb;
    rb.wa = conv_init(rng, 3, 3, c, c);
    rb.ba = bias_init(c);
    rb.aa = prelu_init();
    rb.wb = conv_init(rng, 3, 3, c, c);
    rb.bb = bias_init(c);
    return rb;
  };
  for (int i = 0; i < config_.n_residual_blocks; ++i) enc_res_.push_back(make_res());

  dec_w1 = conv_init(rng, 3, 3, c, c);
  dec_b1 = bias_init(c);
  dec_a1 = prelu_init();
  dec_w2 = conv_init(rng, 3, 3, c, c);
  dec_b2 = bias_init(c);
  dec_a2 = prelu_init();
  dec_res_ = make_res();

  recon_w = nn::leaf(Tensor(3, 3, config_.n_neighbors * c * 3));
  recon_b = bias_init(3);
}

nn::Var Generator::run_resblocks(const std::vector<ResBlock>& blocks, nn::Var x) const {
  const int c = config_.base_channels;
  for (const auto& rb : blocks) {
    nn::Var t = nn::prelu(nn::conv2d(x, rb.wa, rb.ba, c, c, 1, 1), rb.aa);
    t = nn::conv2d(t, rb.wb, rb.bb, c, c, 1, 1);
    x = nn::add(x, t);
  }
  return x;
}

nn::Var Generator::run_up(const UpPair& up, const nn::Var& x) const {
  const int c = config_.base_channels;
  nn::Var t = nn::prelu(nn::deconv2d_x2(x, up.w1, up.b1, c, c), up.a1);
  return nn::prelu(nn::deconv2d_x2(t, up.w2, up.b2, c, c), up.a2);
}

nn::Var Generator::extract_target_features(const nn::Var& target) const {
  const int c = config_.base_channels;
  return nn::prelu(nn::conv2d(target, feat_t_w, feat_t_b, 3, c, 1, 1), feat_t_a);
}

nn::Var Generator::extract_neighbor_features(const nn::Var& target, const nn::Var& neighbor,
                                             const nn::Var& flow) const {
  if (neighbor->val.h != target->val.h || neighbor->val.w != target->val.w ||
      flow->val.h != target->val.h || flow->val.w != target->val.w)
    throw std::invalid_argument("extract_neighbor_features: dims must match the target");
  const int c = config_.base_channels;
  nn::Var inp = nn::concat_channels({target, neighbor, flow});
  return nn::prelu(nn::conv2d(inp, feat_n_w, feat_n_b, 8, c, 1, 1), feat_n_a);
}

nn::Var Generator::project_encode(const nn::Var& l_prev, const nn::Var& m_k) const {
  if (l_prev->val.h != m_k->val.h || l_prev->val.w != m_k->val.w)
    throw std::invalid_argument("project_encode: LR feature dims must match");
  nn::Var h_sisr = run_up(sisr_up_, l_prev);
  nn::Var h_misr = run_up(misr_up_, m_k);
  nn::Var err = nn::sub(h_misr, h_sisr);
  nn::Var corr = run_resblocks(enc_res_, err);
  return nn::add(h_sisr, corr);
}

nn::Var Generator::project_decode(const nn::Var& h_k) const {
  if (h_k->val.h % 4 != 0 || h_k->val.w % 4 != 0)
    throw std::invalid_argument("project_decode: HR dims must divide by 4");
  const int c = config_.base_channels;
  nn::Var t = nn::prelu(nn::conv2d(h_k, dec_w1, dec_b1, c, c, 2, 1), dec_a1);
  t = nn::prelu(nn::conv2d(t, dec_w2, dec_b2, c, c, 2, 1), dec_a2);
  return run_resblocks({dec_res_}, t);
}

nn::Var Generator::reconstruct(const std::vector<nn::Var>& h_list) const {
  if (h_list.empty()) throw std::invalid_argument("reconstruct: empty feature list");
  const int c = config_.base_channels;
  const int ci = static_cast<int>(h_list.size()) * c;
  if (ci != config_.n_neighbors * c)
    throw std::invalid_argument("reconstruct: feature list length must equal n_neighbors");
  nn::Var cat = h_list.size() == 1 ? h_list[0] : nn::concat_channels(h_list);
  return nn::conv2d(cat, recon_w, recon_b, ci, 3, 1, 1);
}

nn::Var Generator::forward(const nn::Var& target,
                           const std::vector<NeighborVar>& neighbors) const {
  if (static_cast<int>(neighbors.size()) != config_.n_neighbors)
    throw std::invalid_argument("generate: neighbor pack size must equal n_neighbors");
  nn::Var l = extract_target_features(target);
  std::vector<nn::Var> h_list;
  h_list.reserve(neighbors.size());
  for (const auto& nb : neighbors) {
    nn::Var m = extract_neighbor_features(target, nb.frame, nb.flow);
    nn::Var h = project_encode(l, m);
    h_list.push_back(h);
    l = project_decode(h);
  }
  nn::Var residual = reconstruct(h_list);
  if (!config_.bicubic_skip) return residual;
  return nn::add(nn::bicubic_upsample(target, config_.scale), residual);
}

Frame Generator::generate(const Frame& target, const NeighborPack& pack, bool clamp) const {
  std::vector<NeighborVar> nbs;
  nbs.reserve(pack.size());
  for (const auto& nb : pack)
    nbs.push_back({nn::constant(nb.frame), nn::constant(nb.flow)});
  Tensor out = forward(nn::constant(target), nbs)->val;
  return clamp ? clamped(out, 0.0, 1.0) : out;
}

VideoClip Generator::generate_sequence(const VideoClip& lr_clip,
                                       const flow::FlowEstimator& estimator,
                                       bool clamp) const {
  lr_clip.validate();
  VideoClip out;
  out.scene_id = lr_clip.scene_id;
  const int len = lr_clip.length();
  for (int t = 0; t < len; ++t) {
    NeighborPack pack;
    for (int idx : neighbor_indices(t, len, config_.n_neighbors)) {
      const Frame& nb = lr_clip.frames[idx];
      pack.push_back({nb, estimator.estimate(nb, lr_clip.frames[t])});
    }
    out.frames.push_back(generate(lr_clip.frames[t], pack, clamp));
  }
  return out;
}

std::vector<std::pair<std::string, nn::Var>> Generator::named_params(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, nn::Var>> out;
  auto put = [&](const std::string& name, const nn::Var& v) { out.emplace_back(prefix + "." + name, v); };
  put("feat_t.w", feat_t_w);
  put("feat_t.b", feat_t_b);
  put("feat_t.a", feat_t_a);
  put("feat_n.w", feat_n_w);
  put("feat_n.b", feat_n_b);
  put("feat_n.a", feat_n_a);
  auto put_up = [&](const std::string& name, const UpPair& up) {
    put(name + ".w1", up.w1);
    put(name + ".b1", up.b1);
    put(name + ".a1", up.a1);
    put(name + ".w2", up.w2);
    put(name + ".b2", up.b2);
    put(name + ".a2", up.a2);
  };
  put_up("sisr_up", sisr_up_);
  put_up("misr_up", misr_up_);
  auto put_res = [&](const std::string& name, const ResBlock& rb) {
    put(name + ".wa", rb.wa);
    put(name + ".ba", rb.ba);
    put(name + ".aa", rb.aa);
    put(name + ".wb", rb.wb);
    put(name + ".bb", rb.bb);
  };
  for (std::size_t i = 0; i < enc_res_.size(); ++i)
    put_res("enc_res" + std::to_string(i), enc_res_[i]);
  put("dec.w1", dec_w1);
  put("dec.b1", dec_b1);
  put("dec.a1", dec_a1);
  put("dec.w2", dec_w2);
  put("dec.b2", dec_b2);
  put("dec.a2", dec_a2);
  put_res("dec_res", dec_res_);
  put("recon.w", recon_w);
  put("recon.b", recon_b);
  return out;
}

ModelDescription Generator::describe() const {
  ModelDescription d;
  auto params = named_params("gen");
  auto bucket = [](const std::string& name) {
    // "gen.<part>.<leaf>" -> "<part>"
    const auto a = name.find('.');
    const auto b = name.find('.', a + 1);
    return name.substr(a + 1, b - a - 1);
  };
  for (const auto& [name, v] : params) {
    d.parameter_count += v->val.numel();
    const std::string part = bucket(name);
    bool found = false;
    for (auto& [p, n] : d.by_part)
      if (p == part) {
        n += v->val.numel();
        found = true;
      }
    if (!found) d.by_part.emplace_back(part, v->val.numel());
  }
  return d;
}

}  // namespace vsr::gen
