#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsr/image.hpp"

// Dataset ingestion and the x4 blur/bicubic degradation pipeline that builds
// self-supervised LR/HR training pairs.
namespace vsr::dataio {

struct LRHRPair {
  VideoClip lr;
  VideoClip hr;
  void validate(int scale = 4) const;
};

enum class Layout { flat_scene_dirs, septuplet };

Layout layout_from_string(const std::string& s);
std::string to_string(Layout layout);

struct SceneEntry {
  std::string scene_id;
  std::vector<std::string> frame_paths;  // lexicographically ordered
};

struct DatasetManifest {
  std::string root;
  Layout layout = Layout::flat_scene_dirs;
  std::vector<SceneEntry> scenes;  // ordered by scene_id
};

// Separable Gaussian blur with symmetric border reflection. ksize must be
// odd, sigma positive.
Frame gaussian_blur(const Frame& frame, double sigma, int ksize);

// Antialiased bicubic downsample (a = -0.5); dims must divide by scale.
Frame bicubic_downsample(const Frame& frame, int scale = 4);

struct DegradeParams {
  double sigma = 1.5;
  int ksize = 13;
  int scale = 4;
};

// lr[i] = bicubic_downsample(gaussian_blur(hr[i])).
LRHRPair degrade(const VideoClip& hr, const DegradeParams& params = {});

// Aligned random crop: both clips cropped at the same (seeded) offset, with
// the HR offset and size exactly scale x the LR ones. Identical offsets
// across all frames of the clip.
LRHRPair sample_crop(const LRHRPair& pair, int lr_crop, std::uint64_t rng_seed);

// Scans a directory tree of 8-bit PNG scenes. flat_scene_dirs: every
// immediate subdirectory holding PNGs is a scene (PNGs directly under root
// form a scene named after the root as a degenerate case). septuplet:
// two-level sequence/subsequence directories, scene_id "seq/sub".
DatasetManifest load_manifest(const std::string& root, Layout layout);

VideoClip load_clip(const DatasetManifest& manifest, const std::string& scene_id);

// Center-crop so that both dims divide by `divisor` (floor-left/ceil-right
// split of the excess).
Frame center_crop_to_multiple(const Frame& frame, int divisor);

struct PrepareOptions {
  DegradeParams degrade;
  bool force = false;
};

struct PreparedScene {
  std::string scene_id;
  int frame_count = 0;
  int hr_h = 0, hr_w = 0;
  int lr_h = 0, lr_w = 0;
  bool skipped = false;  // outputs already existed and force was off
};

// Writes OUT/HR/<scene>/... and OUT/LR/<scene>/... plus OUT/manifest.jsonl
// (one JSON record per scene). HR frames are center-cropped to divisibility
// before degradation. Returns one entry per scene.
std::vector<PreparedScene> prepare_tree(const DatasetManifest& manifest,
                                        const std::string& out_dir,
                                        const PrepareOptions& options);

}  // namespace vsr::dataio
