#include "vsr/dataio.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "vsr/kernels.hpp"
#include "vsr/rng.hpp"

namespace fs = std::filesystem;

namespace vsr::dataio {

void LRHRPair::validate(int scale) const {
  lr.validate();
  hr.validate();
  if (lr.length() != hr.length())
    throw std::invalid_argument("lr/hr pair: frame counts differ");
  if (hr.height() != lr.height() * scale || hr.width() != lr.width() * scale)
    throw std::invalid_argument("lr/hr pair: hr dims must be exactly scale x lr dims");
  if (lr.scene_id != hr.scene_id)
    throw std::invalid_argument("lr/hr pair: scene ids differ");
}

Layout layout_from_string(const std::string& s) {
  if (s == "flat" || s == "flat-scene-dirs") return Layout::flat_scene_dirs;
  if (s == "septuplet") return Layout::septuplet;
  throw std::invalid_argument("unknown dataset layout: " + s);
}

std::string to_string(Layout layout) {
  return layout == Layout::flat_scene_dirs ? "flat-scene-dirs" : "septuplet";
}

Frame gaussian_blur(const Frame& frame, double sigma, int ksize) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be positive");
  if (ksize <= 0 || ksize % 2 == 0)
    throw std::invalid_argument("gaussian_blur: ksize must be odd and positive");
  return kern::sepconv_symmetric(frame, kern::gaussian_taps(sigma, ksize));
}

Frame bicubic_downsample(const Frame& frame, int scale) {
  Tensor out = kern::bicubic_downsample(frame, scale);
  return clamped(out, 0.0, 1.0);
}

LRHRPair degrade(const VideoClip& hr, const DegradeParams& params) {
  hr.validate();
  if (hr.height() % params.scale != 0 || hr.width() % params.scale != 0)
    throw std::invalid_argument("degrade: hr dims must divide by scale (crop first)");
  LRHRPair pair;
  pair.hr = hr;
  pair.lr.scene_id = hr.scene_id;
  pair.lr.frames.reserve(hr.frames.size());
  for (const auto& f : hr.frames)
    pair.lr.frames.push_back(
        bicubic_downsample(gaussian_blur(f, params.sigma, params.ksize), params.scale));
  return pair;
}

LRHRPair sample_crop(const LRHRPair& pair, int lr_crop, std::uint64_t rng_seed) {
  const int scale = pair.hr.height() / std::max(1, pair.lr.height());
  pair.validate(scale);
  const int lh = pair.lr.height(), lw = pair.lr.width();
  if (lr_crop < 1 || lh < lr_crop || lw < lr_crop)
    throw std::invalid_argument("sample_crop: clip smaller than requested crop");
  Rng rng(rng_seed);
  const int oy = rng.uniform_int(0, lh - lr_crop);
  const int ox = rng.uniform_int(0, lw - lr_crop);
  LRHRPair out;
  out.lr.scene_id = pair.lr.scene_id;
  out.hr.scene_id = pair.hr.scene_id;
  for (const auto& f : pair.lr.frames)
    out.lr.frames.push_back(kern::crop(f, oy, ox, lr_crop, lr_crop));
  for (const auto& f : pair.hr.frames)
    out.hr.frames.push_back(
        kern::crop(f, oy * scale, ox * scale, lr_crop * scale, lr_crop * scale));
  return out;
}

namespace {

std::vector<std::string> png_files_in(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> subdirs_sorted(const fs::path& dir) {
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) dirs.push_back(e.path().filename().string());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

DatasetManifest load_manifest(const std::string& root, Layout layout) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root);
  DatasetManifest m;
  m.root = root;
  m.layout = layout;
  if (layout == Layout::flat_scene_dirs) {
    for (const auto& d : subdirs_sorted(root)) {
      auto files = png_files_in(fs::path(root) / d);
      if (!files.empty()) m.scenes.push_back({d, std::move(files)});
    }
    if (m.scenes.empty()) {
      // Degenerate case: PNGs directly under the root form a single scene.
      auto files = png_files_in(root);
      if (!files.empty())
        m.scenes.push_back({fs::path(root).filename().string(), std::move(files)});
    }
  } else {
    for (const auto& seq : subdirs_sorted(root)) {
      for (const auto& sub : subdirs_sorted(fs::path(root) / seq)) {
        auto files = png_files_in(fs::path(root) / seq / sub);
        if (!files.empty()) m.scenes.push_back({seq + "/" + sub, std::move(files)});
      }
    }
  }
  if (m.scenes.empty())
    throw DataError("no PNG scenes found under: " + root + " (layout " + to_string(layout) + ")");
  return m;
}

VideoClip load_clip(const DatasetManifest& manifest, const std::string& scene_id) {
  const SceneEntry* entry = nullptr;
  for (const auto& s : manifest.scenes)
    if (s.scene_id == scene_id) {
      entry = &s;
      break;
    }
  if (!entry) throw DataError("scene not in manifest: " + scene_id);
  VideoClip clip;
  clip.scene_id = scene_id;
  for (const auto& p : entry->frame_paths) clip.frames.push_back(load_png(p));
  for (const auto& f : clip.frames)
    if (f.h != clip.frames[0].h || f.w != clip.frames[0].w)
      throw DataError("scene '" + scene_id + "': frames have heterogeneous dims");
  return clip;
}

Frame center_crop_to_multiple(const Frame& frame, int divisor) {
  const int ch = (frame.h / divisor) * divisor;
  const int cw = (frame.w / divisor) * divisor;
  if (ch < 1 || cw < 1)
    throw std::invalid_argument("center_crop_to_multiple: frame smaller than divisor");
  const int oy = (frame.h - ch) / 2;
  const int ox = (frame.w - cw) / 2;
  return kern::crop(frame, oy, ox, ch, cw);
}

namespace {

std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "f%04d.png", index);
  return buf;
}

}  // namespace

std::vector<PreparedScene> prepare_tree(const DatasetManifest& manifest,
                                        const std::string& out_dir,
                                        const PrepareOptions& options) {
  const fs::path out(out_dir);
  fs::create_directories(out / "HR");
  fs::create_directories(out / "LR");
  std::vector<PreparedScene> results;

  std::ofstream mf(out / "manifest.jsonl", std::ios::trunc);
  if (!mf) throw DataError("cannot write manifest under: " + out_dir);

  for (const auto& scene : manifest.scenes) {
    const fs::path hr_dir = out / "HR" / scene.scene_id;
    const fs::path lr_dir = out / "LR" / scene.scene_id;
    const std::size_t n = scene.frame_paths.size();

    PreparedScene rec;
    rec.scene_id = scene.scene_id;
    rec.frame_count = static_cast<int>(n);

    const bool exists = fs::is_directory(hr_dir) && fs::is_directory(lr_dir) &&
                        png_files_in(hr_dir).size() == n && png_files_in(lr_dir).size() == n;
    if (exists && !options.force) {
      Frame probe = load_png(png_files_in(hr_dir).front());
      rec.hr_h = probe.h;
      rec.hr_w = probe.w;
      rec.lr_h = probe.h / options.degrade.scale;
      rec.lr_w = probe.w / options.degrade.scale;
      rec.skipped = true;
    } else {
      VideoClip hr = load_clip(manifest, scene.scene_id);
      for (auto& f : hr.frames) f = center_crop_to_multiple(f, options.degrade.scale);
      LRHRPair pair = degrade(hr, options.degrade);
      fs::create_directories(hr_dir);
      fs::create_directories(lr_dir);
      for (std::size_t i = 0; i < pair.hr.frames.size(); ++i) {
        save_png((hr_dir / frame_name(static_cast<int>(i))).string(), pair.hr.frames[i]);
        save_png((lr_dir / frame_name(static_cast<int>(i))).string(), pair.lr.frames[i]);
      }
      rec.hr_h = pair.hr.height();
      rec.hr_w = pair.hr.width();
      rec.lr_h = pair.lr.height();
      rec.lr_w = pair.lr.width();
    }

    mf << "{\"scene_id\":\"" << rec.scene_id << "\",\"frame_count\":" << rec.frame_count
       << ",\"hr_dims\":[" << rec.hr_h << "," << rec.hr_w << "],\"lr_dims\":[" << rec.lr_h
       << "," << rec.lr_w << "],\"sigma\":" << options.degrade.sigma
       << ",\"ksize\":" << options.degrade.ksize << ",\"scale\":" << options.degrade.scale
       << "}\n";
    results.push_back(rec);
  }
  return results;
}

}  // namespace vsr::dataio
