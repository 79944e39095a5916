#include "vsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vsr/checkpoint.hpp"
#include "vsr/kernels.hpp"
#include "vsr/rng.hpp"

using nlohmann::json;

namespace vsr::metrics {

double psnr(const Frame& a, const Frame& b, double max_val) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: dims must match");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double d = (a.v[i] - b.v[i]) * 255.0;
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.v.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: dims must match");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  constexpr double kL = 255.0;
  constexpr double kC1 = (0.01 * kL) * (0.01 * kL);
  constexpr double kC2 = (0.03 * kL) * (0.03 * kL);
  if (a.h < kWindow || a.w < kWindow)
    throw std::invalid_argument("ssim: frame smaller than the 11x11 window");

  Tensor ya = kern::luma601(a);
  Tensor yb = kern::luma601(b);
  for (double& v : ya.v) v *= kL;
  for (double& v : yb.v) v *= kL;

  Tensor prods(a.h, a.w, 5);
  for (int y = 0; y < a.h; ++y)
    for (int x = 0; x < a.w; ++x) {
      const double pa = ya.at(y, x, 0), pb = yb.at(y, x, 0);
      double* q = prods.px(y, x);
      q[0] = pa;
      q[1] = pb;
      q[2] = pa * pa;
      q[3] = pb * pb;
      q[4] = pa * pb;
    }
  const auto taps = kern::gaussian_taps(kSigma, kWindow);
  Tensor sums = kern::sepconv_valid(prods, taps);

  double acc = 0.0;
  for (int y = 0; y < sums.h; ++y)
    for (int x = 0; x < sums.w; ++x) {
      const double* q = sums.px(y, x);
      const double mu_a = q[0], mu_b = q[1];
      const double var_a = q[2] - mu_a * mu_a;
      const double var_b = q[3] - mu_b * mu_b;
      const double cov = q[4] - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
      acc += num / den;
    }
  return acc / (static_cast<double>(sums.h) * sums.w);
}

LpipsBackbone LpipsBackbone::deterministic(std::uint64_t seed) {
  LpipsBackbone bb;
  Rng rng(seed);
  const int chans[] = {8, 16, 16, 24, 24};
  int ci = 3;
  for (int co : chans) {
    Stage s;
    s.ci = ci;
    s.co = co;
    s.w = Tensor(3, 3, ci * co);
    const double stddev = std::sqrt(2.0 / (9.0 * ci));
    for (double& v : s.w.v) v = rng.normal(0.0, stddev);
    s.b = Tensor(1, 1, co);
    bb.stages_.push_back(std::move(s));
    ci = co;
  }
  return bb;
}

LpipsBackbone LpipsBackbone::from_file(const std::string& path) {
  const ckpt::Archive a = ckpt::load_archive(path);
  json meta;
  try {
    meta = json::parse(a.meta_json);
  } catch (const json::exception&) {
    throw DataError("perceptual backbone file has malformed metadata: " + path);
  }
  if (meta.value("kind", "") != "lpips_backbone")
    throw DataError("archive is not a perceptual backbone: " + path);
  LpipsBackbone bb;
  const auto chans = meta.at("stage_channels").get<std::vector<int>>();
  int ci = 3;
  for (std::size_t i = 0; i < chans.size(); ++i) {
    Stage s;
    s.ci = ci;
    s.co = chans[i];
    const Tensor* w = a.find("lpips.stage" + std::to_string(i) + ".w");
    const Tensor* b = a.find("lpips.stage" + std::to_string(i) + ".b");
    if (!w || !b) throw DataError("perceptual backbone missing stage tensors: " + path);
    s.w = *w;
    s.b = *b;
    bb.stages_.push_back(std::move(s));
    ci = chans[i];
  }
  if (bb.stages_.empty()) throw DataError("perceptual backbone has no stages: " + path);
  return bb;
}

void LpipsBackbone::save(const std::string& path) const {
  ckpt::Archive a;
  json meta;
  meta["kind"] = "lpips_backbone";
  std::vector<int> chans;
  for (const auto& s : stages_) chans.push_back(s.co);
  meta["stage_channels"] = chans;
  a.meta_json = meta.dump();
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    a.put("lpips.stage" + std::to_string(i) + ".w", stages_[i].w);
    a.put("lpips.stage" + std::to_string(i) + ".b", stages_[i].b);
  }
  ckpt::save_archive(path, a);
}

std::vector<Tensor> LpipsBackbone::features(const Frame& f) const {
  std::vector<Tensor> out;
  Tensor x = f;
  for (const auto& s : stages_) {
    x = kern::conv2d(x, s.w, &s.b, s.ci, s.co, 2, 1);
    for (double& v : x.v)
      if (v < 0.0) v *= 0.2;
    out.push_back(x);
  }
  return out;
}

double LpipsBackbone::distance(const Frame& a, const Frame& b) const {
  if (!a.same_shape(b)) throw std::invalid_argument("lpips: dims must match");
  const auto fa = features(a);
  const auto fb = features(b);
  double total = 0.0;
  for (std::size_t s = 0; s < fa.size(); ++s) {
    const Tensor& ta = fa[s];
    const Tensor& tb = fb[s];
    double acc = 0.0;
    for (int y = 0; y < ta.h; ++y)
      for (int x = 0; x < ta.w; ++x) {
        const double* pa = ta.px(y, x);
        const double* pb = tb.px(y, x);
        double na = 0.0, nb = 0.0;
        for (int k = 0; k < ta.c; ++k) {
          na += pa[k] * pa[k];
          nb += pb[k] * pb[k];
        }
        na = std::sqrt(na) + 1e-10;
        nb = std::sqrt(nb) + 1e-10;
        for (int k = 0; k < ta.c; ++k) {
          const double d = pa[k] / na - pb[k] / nb;
          acc += d * d;
        }
      }
    total += acc / static_cast<double>(ta.numel());
  }
  return total;
}

double lpips(const Frame& a, const Frame& b, const LpipsBackbone& backbone) {
  return backbone.distance(a, b);
}

namespace {

double tof_pair(const Frame& gt_prev, const Frame& gt_cur, const Frame& gen_prev,
                const Frame& gen_cur, const flow::FlowEstimator& estimator) {
  const flow::FlowField fb = estimator.estimate(gt_prev, gt_cur);
  const flow::FlowField fg = estimator.estimate(gen_prev, gen_cur);
  double acc = 0.0;
  for (int y = 0; y < fb.h; ++y)
    for (int x = 0; x < fb.w; ++x)
      acc += std::fabs(fb.at(y, x, 0) - fg.at(y, x, 0)) +
             std::fabs(fb.at(y, x, 1) - fg.at(y, x, 1));
  return acc / (static_cast<double>(fb.h) * fb.w);
}

}  // namespace

double tof(const VideoClip& gt, const VideoClip& gen, const flow::FlowEstimator& estimator,
           const std::vector<int>& retained_t) {
  if (gt.length() != gen.length())
    throw std::invalid_argument("tof: clip lengths must match");
  if (gt.length() < 2) throw std::invalid_argument("tof: need at least 2 frames");
  if (gt.height() != gen.height() || gt.width() != gen.width())
    throw std::invalid_argument("tof: clip dims must match");
  std::vector<int> ts = retained_t;
  if (ts.empty())
    for (int t = 1; t < gt.length(); ++t) ts.push_back(t);
  double acc = 0.0;
  for (int t : ts) {
    if (t < 1 || t >= gt.length())
      throw std::invalid_argument("tof: retained index out of range");
    acc += tof_pair(gt.frames[t - 1], gt.frames[t], gen.frames[t - 1], gen.frames[t],
                    estimator);
  }
  return acc / static_cast<double>(ts.size());
}

Frame protocol_crop(const Frame& frame, const ProtocolConfig& cfg, bool lr_scale) {
  const int scale = lr_scale ? 1 : cfg.scale;
  if (!lr_scale && (frame.h % cfg.scale != 0 || frame.w % cfg.scale != 0))
    throw std::invalid_argument("protocol_crop: HR frame dims must divide by scale");
  const int h2 = frame.h - 2 * cfg.border_px;
  const int w2 = frame.w - 2 * cfg.border_px;
  const int unit = cfg.divisor * scale;
  if (h2 < unit || w2 < unit)
    throw std::invalid_argument("protocol_crop: result would be empty");
  const int th = (h2 / unit) * unit;
  const int tw = (w2 / unit) * unit;
  const int oy = cfg.border_px + (h2 - th) / 2;
  const int ox = cfg.border_px + (w2 - tw) / 2;
  return kern::crop(frame, oy, ox, th, tw);
}

std::vector<int> select_frames(int n_frames, FrameSelection kind, const ProtocolConfig& cfg) {
  const int front =
      kind == FrameSelection::spatial ? cfg.spatial_skip_front : cfg.temporal_skip_front;
  const int back =
      kind == FrameSelection::spatial ? cfg.spatial_skip_back : cfg.temporal_skip_back;
  const int minimum = front + back + 1;
  if (n_frames < minimum)
    throw std::invalid_argument("select_frames: clip too short, need at least " +
                                std::to_string(minimum) + " frames");
  std::vector<int> out;
  for (int t = front; t <= n_frames - 1 - back; ++t) out.push_back(t);
  return out;
}

namespace {

json protocol_to_json(const ProtocolConfig& p) {
  return json{{"border_px", p.border_px},
              {"divisor", p.divisor},
              {"spatial_skip", {p.spatial_skip_front, p.spatial_skip_back}},
              {"temporal_skip", {p.temporal_skip_front, p.temporal_skip_back}},
              {"scale", p.scale},
              {"border_at_hr_scale", p.border_at_hr_scale}};
}

ProtocolConfig protocol_from_json(const json& j) {
  ProtocolConfig p;
  p.border_px = j.at("border_px").get<int>();
  p.divisor = j.at("divisor").get<int>();
  p.spatial_skip_front = j.at("spatial_skip")[0].get<int>();
  p.spatial_skip_back = j.at("spatial_skip")[1].get<int>();
  p.temporal_skip_front = j.at("temporal_skip")[0].get<int>();
  p.temporal_skip_back = j.at("temporal_skip")[1].get<int>();
  p.scale = j.at("scale").get<int>();
  p.border_at_hr_scale = j.at("border_at_hr_scale").get<bool>();
  return p;
}

json aggregate_to_json(const Aggregate& a) {
  json j;
  if (a.psnr_frames > 0)
    j["psnr"] = a.psnr;
  else
    j["psnr"] = "inf";
  j["psnr_frames"] = a.psnr_frames;
  j["psnr_inf_frames"] = a.psnr_inf_frames;
  j["ssim"] = a.ssim;
  j["lpips"] = a.lpips;
  j["lpips_x10"] = a.lpips * 10.0;
  j["tof"] = a.tof;
  return j;
}

Aggregate aggregate_from_json(const json& j) {
  Aggregate a;
  a.psnr_frames = j.at("psnr_frames").get<int>();
  a.psnr = a.psnr_frames > 0 ? j.at("psnr").get<double>()
                             : std::numeric_limits<double>::infinity();
  a.psnr_inf_frames = j.at("psnr_inf_frames").get<int>();
  a.ssim = j.at("ssim").get<double>();
  a.lpips = j.at("lpips").get<double>();
  a.tof = j.at("tof").get<double>();
  return a;
}

}  // namespace

std::string MetricReport::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["model_id"] = model_id;
  j["tof_norm"] = tof_norm;
  j["protocol"] = protocol_to_json(protocol);
  j["overall"] = aggregate_to_json(overall);
  json js = json::array();
  for (const auto& s : scenes) {
    json sj;
    sj["scene_id"] = s.scene_id;
    sj["spatial_indices"] = s.spatial_indices;
    sj["temporal_indices"] = s.temporal_indices;
    sj["mean"] = aggregate_to_json(s.mean);
    json fr = json::array();
    for (const auto& f : s.frames) {
      json fj;
      fj["frame"] = f.frame_index;
      if (f.psnr_inf)
        fj["psnr"] = "inf";
      else
        fj["psnr"] = f.psnr;
      fj["ssim"] = f.ssim;
      fj["lpips"] = f.lpips;
      fr.push_back(fj);
    }
    sj["frames"] = fr;
    json pr = json::array();
    for (const auto& p : s.pairs) pr.push_back(json{{"frame", p.frame_index}, {"tof", p.tof}});
    sj["pairs"] = pr;
    js.push_back(sj);
  }
  j["scenes"] = js;
  return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed metric report: ") + e.what());
  }
  MetricReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != 1) throw DataError("unsupported metric report schema version");
  r.model_id = j.at("model_id").get<std::string>();
  r.tof_norm = j.at("tof_norm").get<std::string>();
  r.protocol = protocol_from_json(j.at("protocol"));
  r.overall = aggregate_from_json(j.at("overall"));
  for (const auto& sj : j.at("scenes")) {
    SceneReport s;
    s.scene_id = sj.at("scene_id").get<std::string>();
    s.spatial_indices = sj.at("spatial_indices").get<std::vector<int>>();
    s.temporal_indices = sj.at("temporal_indices").get<std::vector<int>>();
    s.mean = aggregate_from_json(sj.at("mean"));
    for (const auto& fj : sj.at("frames")) {
      FrameMetrics f;
      f.frame_index = fj.at("frame").get<int>();
      if (fj.at("psnr").is_string()) {
        f.psnr_inf = true;
        f.psnr = std::numeric_limits<double>::infinity();
      } else {
        f.psnr = fj.at("psnr").get<double>();
      }
      f.ssim = fj.at("ssim").get<double>();
      f.lpips = fj.at("lpips").get<double>();
      s.frames.push_back(f);
    }
    for (const auto& pj : sj.at("pairs"))
      s.pairs.push_back({pj.at("frame").get<int>(), pj.at("tof").get<double>()});
    r.scenes.push_back(std::move(s));
  }
  return r;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "scene,frame,psnr,ssim,lpips,tof\n";
  os.precision(10);
  for (const auto& s : scenes) {
    for (const auto& f : s.frames) {
      os << s.scene_id << "," << f.frame_index << ",";
      if (f.psnr_inf)
        os << "inf";
      else
        os << f.psnr;
      os << "," << f.ssim << "," << f.lpips << ",";
      for (const auto& p : s.pairs)
        if (p.frame_index == f.frame_index) os << p.tof;
      os << "\n";
    }
  }
  return os.str();
}

MetricReport evaluate(const std::vector<VideoClip>& gen_clips,
                      const std::vector<VideoClip>& gt_clips, const ProtocolConfig& cfg,
                      const EvaluateOptions& options) {
  if (gen_clips.empty() || gt_clips.empty())
    throw std::invalid_argument("evaluate: empty scene set");
  if (gen_clips.size() != gt_clips.size())
    throw std::invalid_argument("evaluate: scene counts differ (" +
                                std::to_string(gen_clips.size()) + " generated vs " +
                                std::to_string(gt_clips.size()) + " ground-truth)");

  std::vector<const VideoClip*> gens, gts;
  for (const auto& c : gen_clips) gens.push_back(&c);
  for (const auto& c : gt_clips) gts.push_back(&c);
  auto by_id = [](const VideoClip* a, const VideoClip* b) { return a->scene_id < b->scene_id; };
  std::sort(gens.begin(), gens.end(), by_id);
  std::sort(gts.begin(), gts.end(), by_id);
  for (std::size_t i = 0; i < gens.size(); ++i) {
    if (gens[i]->scene_id != gts[i]->scene_id)
      throw std::invalid_argument("evaluate: scene sets differ at '" + gens[i]->scene_id +
                                  "' vs '" + gts[i]->scene_id + "'");
    if (gens[i]->length() != gts[i]->length())
      throw std::invalid_argument("evaluate: frame counts differ for scene '" +
                                  gens[i]->scene_id + "'");
  }

  const LpipsBackbone backbone = options.lpips_weights_path.empty()
                                     ? LpipsBackbone::deterministic(options.lpips_seed)
                                     : LpipsBackbone::from_file(options.lpips_weights_path);
  const flow::FlowEstimator flow_est = flow::FlowEstimator::classical(options.lk);

  MetricReport report;
  report.model_id = options.model_id;
  report.protocol = cfg;

  double o_psnr = 0.0, o_ssim = 0.0, o_lpips = 0.0, o_tof = 0.0;
  int o_psnr_n = 0, o_inf = 0, o_frames = 0, o_pairs = 0;

  for (std::size_t i = 0; i < gens.size(); ++i) {
    const VideoClip& gen = *gens[i];
    const VideoClip& gt = *gts[i];
    if (gen.height() != gt.height() || gen.width() != gt.width())
      throw std::invalid_argument("evaluate: dims differ for scene '" + gen.scene_id + "'");

    VideoClip cgen, cgt;
    cgen.scene_id = gen.scene_id;
    cgt.scene_id = gt.scene_id;
    for (int t = 0; t < gen.length(); ++t) {
      cgen.frames.push_back(protocol_crop(gen.frames[t], cfg));
      cgt.frames.push_back(protocol_crop(gt.frames[t], cfg));
    }

    SceneReport scene;
    scene.scene_id = gen.scene_id;
    scene.spatial_indices = select_frames(gen.length(), FrameSelection::spatial, cfg);
    scene.temporal_indices = select_frames(gen.length(), FrameSelection::temporal, cfg);

    double s_psnr = 0.0, s_ssim = 0.0, s_lpips = 0.0;
    int s_psnr_n = 0;
    for (int t : scene.spatial_indices) {
      FrameMetrics fm;
      fm.frame_index = t;
      const double p = psnr(cgen.frames[t], cgt.frames[t]);
      if (std::isinf(p)) {
        fm.psnr_inf = true;
        fm.psnr = p;
        scene.mean.psnr_inf_frames++;
        o_inf++;
      } else {
        fm.psnr = p;
        s_psnr += p;
        s_psnr_n++;
        o_psnr += p;
        o_psnr_n++;
      }
      fm.ssim = ssim(cgen.frames[t], cgt.frames[t]);
      fm.lpips = lpips(cgen.frames[t], cgt.frames[t], backbone);
      s_ssim += fm.ssim;
      s_lpips += fm.lpips;
      o_ssim += fm.ssim;
      o_lpips += fm.lpips;
      o_frames++;
      scene.frames.push_back(fm);
    }

    double s_tof = 0.0;
    for (int t : scene.temporal_indices) {
      PairMetrics pm;
      pm.frame_index = t;
      pm.tof = tof(cgt, cgen, flow_est, {t});
      s_tof += pm.tof;
      o_tof += pm.tof;
      o_pairs++;
      scene.pairs.push_back(pm);
    }

    const int nf = static_cast<int>(scene.spatial_indices.size());
    scene.mean.psnr_frames = s_psnr_n;
    scene.mean.psnr = s_psnr_n > 0 ? s_psnr / s_psnr_n
                                   : std::numeric_limits<double>::infinity();
    scene.mean.ssim = s_ssim / nf;
    scene.mean.lpips = s_lpips / nf;
    scene.mean.tof = s_tof / static_cast<double>(scene.temporal_indices.size());
    report.scenes.push_back(std::move(scene));
  }

  report.overall.psnr_frames = o_psnr_n;
  report.overall.psnr_inf_frames = o_inf;
  report.overall.psnr =
      o_psnr_n > 0 ? o_psnr / o_psnr_n : std::numeric_limits<double>::infinity();
  report.overall.ssim = o_ssim / o_frames;
  report.overall.lpips = o_lpips / o_frames;
  report.overall.tof = o_tof / o_pairs;
  return report;
}

}  // namespace vsr::metrics
