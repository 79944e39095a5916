#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsr/flow.hpp"
#include "vsr/image.hpp"

// Quality metrics and the evaluation protocol (border exclusion,
// divisibility shrink, frame skipping). PSNR works on RGB over [0, 255],
// SSIM on BT.601 luma; tOF compares classical optical-flow fields with a
// mean per-pixel L1 norm.
namespace vsr::metrics {

struct ProtocolConfig {
  int border_px = 8;
  int divisor = 8;  // divisibility required of the LR-equivalent dims
  int spatial_skip_front = 2;
  int spatial_skip_back = 2;
  int temporal_skip_front = 3;
  int temporal_skip_back = 2;
  int scale = 4;
  bool border_at_hr_scale = true;  // border exclusion applied at result scale
};

enum class FrameSelection { spatial, temporal };

// 10*log10(max_val^2 / MSE) with frames mapped to the [0, 255] domain.
// Identical frames return +infinity (reported as the "inf" sentinel and
// excluded from aggregate means).
double psnr(const Frame& a, const Frame& b, double max_val = 255.0);

// Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5) on luma,
// K1 = 0.01, K2 = 0.03, L = 255. Frames smaller than the window are
// rejected.
double ssim(const Frame& a, const Frame& b);

// Perceptual distance over a frozen convolutional feature pyramid. The
// default backbone is a fixed-seed random pyramid: a deterministic
// surrogate whose absolute values are not comparable to published
// pretrained-backbone numbers (orderings are); external weights can be
// supplied through an archive file to restore comparability.
class LpipsBackbone {
 public:
  static LpipsBackbone deterministic(std::uint64_t seed = 0xC0FFEE);
  static LpipsBackbone from_file(const std::string& path);
  void save(const std::string& path) const;

  double distance(const Frame& a, const Frame& b) const;
  int stage_count() const { return static_cast<int>(stages_.size()); }

 private:
  struct Stage {
    Tensor w, b;
    int ci = 0, co = 0;
  };
  std::vector<Stage> stages_;
  std::vector<Tensor> features(const Frame& f) const;
};

double lpips(const Frame& a, const Frame& b, const LpipsBackbone& backbone);

// Mean over retained t of the mean per-pixel L1 difference between
// OF(gt[t-1], gt[t]) and OF(gen[t-1], gen[t]). retained_t empty selects all
// consecutive pairs (t = 1..n-1).
double tof(const VideoClip& gt, const VideoClip& gen, const flow::FlowEstimator& estimator,
           const std::vector<int>& retained_t = {});

// Border exclusion then center shrink so the LR-equivalent dims divide by
// cfg.divisor. Excess is split floor-left/ceil-right. lr_scale flags an
// LR-resolution input (border and divisibility at its own scale).
Frame protocol_crop(const Frame& frame, const ProtocolConfig& cfg, bool lr_scale = false);

// Retained frame indices: spatial [front .. n-1-back] with the spatial
// skips, temporal likewise with the temporal skips (0-based, inclusive).
std::vector<int> select_frames(int n_frames, FrameSelection kind, const ProtocolConfig& cfg);

struct FrameMetrics {
  int frame_index = 0;
  double psnr = 0.0;
  bool psnr_inf = false;
  double ssim = 0.0;
  double lpips = 0.0;
};

struct PairMetrics {
  int frame_index = 0;  // the later frame of the flow pair
  double tof = 0.0;
};

struct Aggregate {
  double psnr = 0.0;  // mean over retained non-inf frames
  int psnr_frames = 0;
  int psnr_inf_frames = 0;
  double ssim = 0.0;
  double lpips = 0.0;
  double tof = 0.0;
};

struct SceneReport {
  std::string scene_id;
  std::vector<int> spatial_indices;
  std::vector<int> temporal_indices;
  std::vector<FrameMetrics> frames;
  std::vector<PairMetrics> pairs;
  Aggregate mean;
};

struct MetricReport {
  int schema_version = 1;
  std::string model_id;
  std::string tof_norm = "mean_per_pixel_l1";
  ProtocolConfig protocol;
  std::vector<SceneReport> scenes;
  Aggregate overall;  // frame-weighted across scenes

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
  std::string to_csv() const;  // per-frame rows
};

struct EvaluateOptions {
  std::string model_id = "unnamed";
  std::uint64_t lpips_seed = 0xC0FFEE;
  std::string lpips_weights_path;  // optional external backbone
  flow::LkParams lk;
};

// Full protocol evaluation over matching scene sets (clips matched by
// scene_id; frame counts and dims must agree per scene).
MetricReport evaluate(const std::vector<VideoClip>& gen_clips,
                      const std::vector<VideoClip>& gt_clips, const ProtocolConfig& cfg,
                      const EvaluateOptions& options = {});

}  // namespace vsr::metrics
