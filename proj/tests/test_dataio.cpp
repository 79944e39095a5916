#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "vsr/dataio.hpp"
#include "vsr/kernels.hpp"

using namespace vsr;
namespace fs = std::filesystem;

namespace {

Frame impulse_frame(int h, int w, int y, int x, double v) {
  Frame f(h, w, 3);
  for (int c = 0; c < 3; ++c) f.at(y, x, c) = v;
  return f;
}

// Direct 2-D convolution with symmetric reflection, no separability.
Frame blur_oracle(const Frame& in, double sigma, int ksize) {
  const auto taps = kern::gaussian_taps(sigma, ksize);
  const int r = ksize / 2;
  auto reflect = [](int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  Frame out(in.h, in.w, in.c);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x)
      for (int c = 0; c < in.c; ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += taps[dy + r] * taps[dx + r] *
                   in.at(reflect(y + dy, in.h), reflect(x + dx, in.w), c);
        out.at(y, x, c) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("gaussian_blur: constants pass through and arguments are checked") {
  Frame c = Tensor::full(9, 9, 3, 0.5);
  Frame out = dataio::gaussian_blur(c, 2.0, 7);
  CHECK(max_abs_diff(out, c) < 1e-12);
  CHECK_THROWS_AS(dataio::gaussian_blur(c, 1.0, 6), std::invalid_argument);
  CHECK_THROWS_AS(dataio::gaussian_blur(c, 0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(dataio::gaussian_blur(c, -1.0, 5), std::invalid_argument);
}

TEST_CASE("gaussian_blur: unit impulse stamps the normalized kernel") {
  Frame f = impulse_frame(9, 9, 4, 4, 1.0);
  Frame out = dataio::gaussian_blur(f, 1.5, 5);
  const auto taps = kern::gaussian_taps(1.5, 5);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const int dy = y - 4, dx = x - 4;
      const double want =
          (std::abs(dy) <= 2 && std::abs(dx) <= 2) ? taps[dy + 2] * taps[dx + 2] : 0.0;
      CHECK(std::fabs(out.at(y, x, 0) - want) < 1e-12);
    }
}

TEST_CASE("gaussian_blur matches the direct 2-D oracle") {
  Rng rng(21);
  Frame f = test::random_tensor(12, 14, 3, rng);
  Frame got = dataio::gaussian_blur(f, 1.5, 7);
  Frame want = blur_oracle(f, 1.5, 7);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("gaussian_blur: semigroup property on the padding-free interior") {
  Rng rng(22);
  Frame f = test::smooth_random_frame(48, 48, rng);
  // Two sigma-1.5 passes vs one pass at sigma*sqrt(2); kernels sized so the
  // truncated tails are negligible against the 1e-5 tolerance.
  Frame twice = dataio::gaussian_blur(dataio::gaussian_blur(f, 1.5, 17), 1.5, 17);
  Frame once = dataio::gaussian_blur(f, 1.5 * std::sqrt(2.0), 23);
  double worst = 0.0;
  for (int y = 16; y < 32; ++y)
    for (int x = 16; x < 32; ++x)
      for (int c = 0; c < 3; ++c)
        worst = std::max(worst, std::fabs(twice.at(y, x, c) - once.at(y, x, c)));
  CHECK(worst < 1e-5);
}

TEST_CASE("gaussian_blur preserves the global mean") {
  Rng rng(23);
  Frame f = test::random_tensor(20, 24, 3, rng);
  Frame out = dataio::gaussian_blur(f, 1.5, 13);
  CHECK(std::fabs(mean_value(out) - mean_value(f)) < 1e-6);
}

TEST_CASE("degrade: constants, shapes, and composition") {
  VideoClip hr;
  hr.scene_id = "const";
  for (int i = 0; i < 3; ++i) hr.frames.push_back(Tensor::full(128, 128, 3, 0.4));
  auto pair = dataio::degrade(hr, {});
  pair.validate();
  CHECK(pair.lr.length() == 3);
  CHECK(pair.lr.height() == 32);
  CHECK(pair.lr.width() == 32);
  for (const auto& f : pair.lr.frames) {
    CHECK(std::fabs(max_value(f) - 0.4) < 1e-9);
    CHECK(std::fabs(min_value(f) - 0.4) < 1e-9);
  }

  // checkerboard composes the two stages exactly
  VideoClip board;
  board.scene_id = "board";
  Frame b(64, 64, 3);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) b.at(y, x, c) = ((x / 8 + y / 8) % 2) ? 1.0 : 0.0;
  board.frames.push_back(b);
  auto p2 = dataio::degrade(board, {1.5, 13, 4});
  Frame composed = dataio::bicubic_downsample(dataio::gaussian_blur(b, 1.5, 13), 4);
  CHECK(max_abs_diff(p2.lr.frames[0], composed) < 1e-12);

  VideoClip bad;
  bad.scene_id = "bad";
  bad.frames.push_back(Tensor::full(30, 30, 3, 0.2));
  CHECK_THROWS_AS(dataio::degrade(bad, {}), std::invalid_argument);
}

TEST_CASE("sample_crop: determinism, 4x alignment, identity, and bounds") {
  // Coordinate-encoding frames let the test recover the chosen offsets.
  const int lh = 12, lw = 16;
  VideoClip lr, hr;
  lr.scene_id = hr.scene_id = "coords";
  Frame lf(lh, lw, 3), hf(4 * lh, 4 * lw, 3);
  for (int y = 0; y < lh; ++y)
    for (int x = 0; x < lw; ++x)
      for (int c = 0; c < 3; ++c) lf.at(y, x, c) = (y * lw + x) / (3.0 * lh * lw);
  for (int y = 0; y < 4 * lh; ++y)
    for (int x = 0; x < 4 * lw; ++x)
      for (int c = 0; c < 3; ++c) hf.at(y, x, c) = (y * 4.0 * lw + x) / (48.0 * lh * lw);
  lr.frames = {lf, lf};
  hr.frames = {hf, hf};
  dataio::LRHRPair pair{lr, hr};

  auto a = dataio::sample_crop(pair, 5, 77);
  auto b = dataio::sample_crop(pair, 5, 77);
  CHECK(max_abs_diff(a.lr.frames[0], b.lr.frames[0]) == 0.0);
  CHECK(max_abs_diff(a.hr.frames[1], b.hr.frames[1]) == 0.0);

  // Recover offsets from the encodings and check hr = 4 x lr.
  const double lv = a.lr.frames[0].at(0, 0, 0) * 3.0 * lh * lw;
  const int l_idx = static_cast<int>(std::lround(lv));
  const int loy = l_idx / lw, lox = l_idx % lw;
  const double hv = a.hr.frames[0].at(0, 0, 0) * 48.0 * lh * lw;
  const int h_idx = static_cast<int>(std::lround(hv));
  const int hoy = h_idx / (4 * lw), hox = h_idx % (4 * lw);
  CHECK(hoy == 4 * loy);
  CHECK(hox == 4 * lox);
}

TEST_CASE("sample_crop: full-size crop is the identity") {
  Rng rng(24);
  VideoClip hr;
  hr.scene_id = "full";
  hr.frames.push_back(test::random_tensor(32, 32, 3, rng));
  auto pair = dataio::degrade(hr, {});
  auto crop = dataio::sample_crop(pair, 8, 123);  // full LR size
  CHECK(max_abs_diff(crop.lr.frames[0], pair.lr.frames[0]) == 0.0);
  CHECK(max_abs_diff(crop.hr.frames[0], pair.hr.frames[0]) == 0.0);
  CHECK_THROWS_AS(dataio::sample_crop(pair, 9, 1), std::invalid_argument);
}

TEST_CASE("degrade shape law over random divisible dims") {
  Rng rng(25);
  for (int i = 0; i < 6; ++i) {
    const int h = 4 * rng.uniform_int(2, 12);
    const int w = 4 * rng.uniform_int(2, 12);
    const int n = rng.uniform_int(1, 4);
    VideoClip hr;
    hr.scene_id = "p";
    for (int t = 0; t < n; ++t) hr.frames.push_back(test::random_tensor(h, w, 3, rng));
    auto pair = dataio::degrade(hr, {});
    CHECK(pair.lr.height() == h / 4);
    CHECK(pair.lr.width() == w / 4);
    CHECK(pair.lr.length() == n);
  }
}

TEST_CASE("crop alignment: degrade-then-crop equals crop-then-degrade on padded-safe content") {
  // Constant background with a bump well inside the crop interior: border
  // padding sees only the constant, so the two orders agree.
  Frame hf = Tensor::full(96, 96, 3, 0.25);
  for (int y = 40; y < 56; ++y)
    for (int x = 40; x < 56; ++x)
      for (int c = 0; c < 3; ++c)
        hf.at(y, x, c) = 0.25 + 0.5 * std::exp(-((y - 48.0) * (y - 48.0) +
                                                 (x - 48.0) * (x - 48.0)) /
                                               18.0);
  VideoClip hr;
  hr.scene_id = "bump";
  hr.frames.push_back(hf);
  auto pair = dataio::degrade(hr, {});

  // Aligned crop: LR offset (4,4), size 16 -> HR offset (16,16), size 64.
  Frame lr_crop = kern::crop(pair.lr.frames[0], 4, 4, 16, 16);
  Frame hr_crop = kern::crop(pair.hr.frames[0], 16, 16, 64, 64);
  VideoClip crop_clip;
  crop_clip.scene_id = "crop";
  crop_clip.frames.push_back(hr_crop);
  auto redone = dataio::degrade(crop_clip, {});
  CHECK(max_abs_diff(redone.lr.frames[0], lr_crop) < 1e-6);

  // Constant fixture: exact equality.
  VideoClip cc;
  cc.scene_id = "c";
  cc.frames.push_back(Tensor::full(64, 64, 3, 0.7));
  auto cp = dataio::degrade(cc, {});
  VideoClip cc2;
  cc2.scene_id = "c2";
  cc2.frames.push_back(kern::crop(cp.hr.frames[0], 16, 16, 32, 32));
  auto cp2 = dataio::degrade(cc2, {});
  CHECK(max_abs_diff(cp2.lr.frames[0], kern::crop(cp.lr.frames[0], 4, 4, 8, 8)) < 1e-9);
}

TEST_CASE("png round-trip stays within quantization error") {
  Rng rng(26);
  test::TempDir tmp("png");
  Frame f = test::random_tensor(21, 17, 3, rng);
  const std::string path = (tmp.path() / "frame.png").string();
  save_png(path, f);
  Frame back = load_png(path);
  CHECK(max_abs_diff(f, back) <= 1.0 / 255.0);

  // normalization convention
  Frame extremes(1, 2, 3);
  extremes.at(0, 0, 0) = 0.0;
  extremes.at(0, 1, 0) = 1.0;
  extremes.at(0, 1, 1) = 1.0;
  extremes.at(0, 1, 2) = 1.0;
  const std::string p2 = (tmp.path() / "extremes.png").string();
  save_png(p2, extremes);
  Frame back2 = load_png(p2);
  CHECK(back2.at(0, 0, 0) == 0.0);
  CHECK(back2.at(0, 1, 0) == 1.0);
}

TEST_CASE("load_manifest and load_clip: ordering, errors, dims") {
  test::TempDir tmp("manifest");
  const auto scene = tmp.path() / "sceneA";
  fs::create_directories(scene);
  Rng rng(27);
  std::vector<Frame> frames;
  for (int i = 7; i >= 1; --i) {  // write in reverse order to test sorting
    Frame f = test::random_tensor(8, 10, 3, rng);
    frames.push_back(f);
    char name[16];
    std::snprintf(name, sizeof(name), "%04d.png", i);
    save_png((scene / name).string(), f);
  }
  auto manifest = dataio::load_manifest(tmp.str(), dataio::Layout::flat_scene_dirs);
  REQUIRE(manifest.scenes.size() == 1);
  CHECK(manifest.scenes[0].scene_id == "sceneA");
  REQUIRE(manifest.scenes[0].frame_paths.size() == 7);
  CHECK(manifest.scenes[0].frame_paths[0].ends_with("0001.png"));

  VideoClip clip = dataio::load_clip(manifest, "sceneA");
  CHECK(clip.length() == 7);
  // frames[6] was written as 0001.png, so clip[0] equals the last generated
  CHECK(max_abs_diff(clip.frames[0], frames[6]) <= 1.0 / 255.0);

  CHECK_THROWS_AS(dataio::load_clip(manifest, "nope"), DataError);

  test::TempDir empty("empty");
  CHECK_THROWS_AS(dataio::load_manifest(empty.str(), dataio::Layout::flat_scene_dirs),
                  DataError);

  // heterogeneous dims rejected
  save_png((scene / "9999.png").string(), test::random_tensor(9, 10, 3, rng));
  auto m2 = dataio::load_manifest(tmp.str(), dataio::Layout::flat_scene_dirs);
  CHECK_THROWS_AS(dataio::load_clip(m2, "sceneA"), DataError);
}

TEST_CASE("septuplet layout: two-level scene ids") {
  test::TempDir tmp("sept");
  Rng rng(28);
  for (const char* seq : {"00001", "00002"})
    for (const char* sub : {"0001", "0002"}) {
      const auto dir = tmp.path() / seq / sub;
      fs::create_directories(dir);
      for (int i = 1; i <= 7; ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "im%d.png", i);
        save_png((dir / name).string(), test::random_tensor(8, 8, 3, rng));
      }
    }
  auto manifest = dataio::load_manifest(tmp.str(), dataio::Layout::septuplet);
  REQUIRE(manifest.scenes.size() == 4);
  CHECK(manifest.scenes[0].scene_id == "00001/0001");
  CHECK(manifest.scenes[3].scene_id == "00002/0002");
  CHECK(dataio::load_clip(manifest, "00002/0001").length() == 7);
}

TEST_CASE("prepare_tree writes pairs and a manifest, and skips existing scenes") {
  test::TempDir src("prep_src");
  test::TempDir dst("prep_dst");
  Rng rng(29);
  for (const char* name : {"a", "b"}) {
    fs::create_directories(src.path() / name);
    for (int i = 0; i < 3; ++i) {
      char fn[16];
      std::snprintf(fn, sizeof(fn), "%02d.png", i);
      save_png((src.path() / name / fn).string(), test::smooth_random_frame(40, 44, rng));
    }
  }
  auto manifest = dataio::load_manifest(src.str(), dataio::Layout::flat_scene_dirs);
  dataio::PrepareOptions opt;
  auto res = dataio::prepare_tree(manifest, dst.str(), opt);
  REQUIRE(res.size() == 2);
  CHECK(res[0].hr_h == 40);
  CHECK(res[0].lr_h == 10);
  CHECK(!res[0].skipped);
  CHECK(fs::exists(dst.path() / "LR" / "a" / "f0000.png"));
  CHECK(fs::exists(dst.path() / "HR" / "b" / "f0002.png"));
  CHECK(fs::exists(dst.path() / "manifest.jsonl"));

  // Tamper with an output; a re-run without force must not rewrite it.
  const auto tampered = dst.path() / "LR" / "a" / "f0000.png";
  save_png(tampered.string(), Tensor::full(5, 6, 3, 0.5));
  auto res2 = dataio::prepare_tree(manifest, dst.str(), opt);
  CHECK(res2[0].skipped);
  CHECK(load_png(tampered.string()).w == 6);

  opt.force = true;
  auto res3 = dataio::prepare_tree(manifest, dst.str(), opt);
  CHECK(!res3[0].skipped);
  Frame rewritten = load_png(tampered.string());
  CHECK(rewritten.h == 10);
  CHECK(rewritten.w == 11);
}
