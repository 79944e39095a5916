#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "vsr/kernels.hpp"
#include "vsr/metrics.hpp"
#include "vsr/trainer.hpp"

using namespace vsr;

namespace {

std::vector<dataio::LRHRPair> synthetic_dataset(int scenes, int frames, int hr_size,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<dataio::LRHRPair> out;
  for (int s = 0; s < scenes; ++s) {
    VideoClip hr;
    hr.scene_id = "scene" + std::to_string(s);
    for (int t = 0; t < frames; ++t)
      hr.frames.push_back(test::periodic_texture(hr_size, hr_size, seed + s, 1.5 * t, 0.5 * t));
    out.push_back(dataio::degrade(hr, {}));
  }
  return out;
}

trainer::TrainConfig tiny_config(trainer::Preset preset, std::uint64_t seed = 1) {
  trainer::TrainConfig c = trainer::TrainConfig::preset_defaults(preset);
  c.total_steps = 4;
  c.batch_size = 1;
  c.crop = 8;
  c.clip_frames = 3;
  c.seed = seed;
  c.generator.base_channels = 8;
  c.generator.n_residual_blocks = 1;
  c.discriminator.stage_channels = {8, 12};
  c.weights.feature_layer_weights = {1.0, 1.0};
  c.flownet = {2, 8};
  c.checkpoint_every = 1000;
  if (preset == trainer::Preset::exp4_3) c.pretrain_generator_steps = 2;
  return c;
}

double clip_pixel_loss(const trainer::Trainer& tr, const dataio::LRHRPair& pair) {
  const auto est = flow::FlowEstimator::learned(tr.flownet_ptr());
  const int n = tr.config().n_neighbors;
  double acc = 0.0;
  for (int t = 0; t < pair.lr.length(); ++t) {
    gen::NeighborPack pack;
    for (int idx : gen::neighbor_indices(t, pair.lr.length(), n))
      pack.push_back({pair.lr.frames[idx],
                      est.estimate(pair.lr.frames[idx], pair.lr.frames[t])});
    Frame out = tr.generator().generate(pair.lr.frames[t], pack, /*clamp=*/false);
    acc += losses::pixel_loss(out, pair.hr.frames[t]);
  }
  return acc / pair.lr.length();
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("preset defaults satisfy the experiment invariants") {
  using trainer::Preset;
  for (Preset p : {Preset::exp4_1, Preset::exp4_2, Preset::exp4_3, Preset::rbpn_only}) {
    auto c = trainer::TrainConfig::preset_defaults(p);
    if (p == Preset::exp4_3) c.pretrain_generator_steps = c.total_steps / 4;
    c.validate();
  }
  auto e1 = trainer::TrainConfig::preset_defaults(Preset::exp4_1);
  CHECK(e1.use_pingpong);
  CHECK(e1.n_neighbors == 2);
  CHECK(e1.effective_neighbor_frames() == 4);  // doubled by the forward/backward paths
  auto e2 = trainer::TrainConfig::preset_defaults(Preset::exp4_2);
  CHECK(!e2.use_pingpong);
  CHECK(e2.n_neighbors == 3);
  CHECK(e2.effective_neighbor_frames() == 3);
  CHECK(e2.weights.pingpong == 0.0);
  auto e3 = trainer::TrainConfig::preset_defaults(Preset::exp4_3);
  CHECK(e3.pretrain_generator_steps > 0);
  auto rb = trainer::TrainConfig::preset_defaults(Preset::rbpn_only);
  CHECK(rb.weights.adv == 0.0);
  CHECK(rb.weights.feature == 0.0);
  CHECK(rb.weights.pingpong == 0.0);
}

TEST_CASE("config file parsing: unknown keys and preset contradictions rejected") {
  cfg::KvMap kv{{"preset", "exp4_2"}, {"total_steps", "10"}};
  auto c = trainer::TrainConfig::from_kv(kv);
  CHECK(c.total_steps == 10);
  CHECK(c.n_neighbors == 3);

  CHECK_THROWS_WITH_AS(trainer::TrainConfig::from_kv({{"bogus_key", "1"}}),
                       doctest::Contains("unknown config key"), std::invalid_argument);
  CHECK_THROWS_AS(
      trainer::TrainConfig::from_kv({{"preset", "exp4_2"}, {"use_pingpong", "true"}}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      trainer::TrainConfig::from_kv({{"preset", "exp4_1"}, {"n_neighbors", "3"}}),
      std::invalid_argument);
  CHECK_THROWS_AS(trainer::TrainConfig::from_kv({{"preset", "nope"}}), std::invalid_argument);

  // round-trip through the flat key/value form
  auto tiny = tiny_config(trainer::Preset::exp4_1, 9);
  auto back = trainer::TrainConfig::from_kv(tiny.to_kv());
  CHECK(back.seed == tiny.seed);
  CHECK(back.crop == tiny.crop);
  CHECK(back.weights.adv == tiny.weights.adv);
  CHECK(back.discriminator.stage_channels == tiny.discriminator.stage_channels);
}

TEST_CASE("learning rate halves at each third of training") {
  auto c = tiny_config(trainer::Preset::rbpn_only);
  c.total_steps = 9;
  c.learning_rate = 8e-4;
  CHECK(c.lr_at(0) == doctest::Approx(8e-4));
  CHECK(c.lr_at(2) == doctest::Approx(8e-4));
  CHECK(c.lr_at(3) == doctest::Approx(4e-4));
  CHECK(c.lr_at(5) == doctest::Approx(4e-4));
  CHECK(c.lr_at(6) == doctest::Approx(2e-4));
  CHECK(c.lr_at(8) == doctest::Approx(2e-4));
}

TEST_CASE("zero adversarial weight leaves discriminator parameters untouched") {
  auto data = synthetic_dataset(1, 3, 32, 100);
  auto cfg = tiny_config(trainer::Preset::rbpn_only);
  trainer::Trainer tr(cfg, data);
  std::vector<Tensor> before;
  for (const auto& [n, v] : tr.discriminator().named_params("disc")) before.push_back(v->val);
  auto r = tr.step();
  CHECK(!r.d_updated);
  CHECK(r.d_loss == 0.0);
  std::size_t i = 0;
  for (const auto& [n, v] : tr.discriminator().named_params("disc"))
    CHECK(max_abs_diff(before[i++], v->val) == 0.0);
}

TEST_CASE("adversarial step updates both networks and logs all terms") {
  auto data = synthetic_dataset(1, 3, 32, 101);
  auto cfg = tiny_config(trainer::Preset::exp4_1);
  trainer::Trainer tr(cfg, data);
  std::vector<Tensor> d_before;
  for (const auto& [n, v] : tr.discriminator().named_params("disc")) d_before.push_back(v->val);
  auto r = tr.step();
  CHECK(r.d_updated);
  CHECK(r.d_loss > 0.0);
  CHECK(r.losses.pixel > 0.0);
  CHECK(r.losses.adv > 0.0);
  CHECK(r.losses.pingpong >= 0.0);
  CHECK(r.losses.feature >= 0.0);
  CHECK(r.losses.warp > 0.0);
  CHECK(r.losses.total ==
        doctest::Approx(cfg.weights.adv * r.losses.adv + cfg.weights.pixel * r.losses.pixel +
                        cfg.weights.pingpong * r.losses.pingpong +
                        cfg.weights.feature * r.losses.feature +
                        cfg.weights.warp * r.losses.warp)
            .epsilon(1e-12));
  double moved = 0.0;
  std::size_t i = 0;
  for (const auto& [n, v] : tr.discriminator().named_params("disc"))
    moved += max_abs_diff(d_before[i++], v->val);
  CHECK(moved > 0.0);
}

TEST_CASE("identical seeds give identical step results") {
  auto data = synthetic_dataset(2, 4, 32, 102);
  auto cfg = tiny_config(trainer::Preset::exp4_1, 7);
  trainer::Trainer a(cfg, data);
  trainer::Trainer b(cfg, data);
  for (int i = 0; i < 2; ++i) {
    auto ra = a.step();
    auto rb = b.step();
    CHECK(ra.losses.total == rb.losses.total);
    CHECK(ra.losses.pixel == rb.losses.pixel);
    CHECK(ra.d_loss == rb.d_loss);
  }
}

TEST_CASE("one step on a fixed miniature batch decreases its pixel loss on average") {
  double delta_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto data = synthetic_dataset(1, 3, 32, 200 + seed);
    auto cfg = tiny_config(trainer::Preset::rbpn_only, seed + 1);
    cfg.learning_rate = 1e-4;
    // single clip exactly crop-sized: the sampled batch is the whole clip
    trainer::Trainer tr(cfg, data);
    const double before = clip_pixel_loss(tr, data[0]);
    tr.step();
    const double after = clip_pixel_loss(tr, data[0]);
    delta_sum += after - before;
  }
  CHECK(delta_sum / 5.0 < 0.0);
}

TEST_CASE("full runs are bit-identical: loss log and final checkpoint") {
  auto data = synthetic_dataset(2, 3, 32, 103);
  test::TempDir da("det_a"), db("det_b");
  auto cfg = tiny_config(trainer::Preset::exp4_1, 5);
  cfg.total_steps = 4;
  cfg.out_dir = da.str();
  auto ra = trainer::train(cfg, data);
  cfg.out_dir = db.str();
  auto rb = trainer::train(cfg, data);
  CHECK(file_bytes(ra.log_path) == file_bytes(rb.log_path));
  CHECK(file_bytes(ra.final_checkpoint) == file_bytes(rb.final_checkpoint));
  CHECK(file_bytes(ra.log_path).find("\"step\":0") != std::string::npos);
}

TEST_CASE("save/load resume matches the uninterrupted run exactly") {
  auto data = synthetic_dataset(2, 3, 32, 104);

  // Uninterrupted: 5 steps.
  test::TempDir full_dir("resume_full");
  auto cfg = tiny_config(trainer::Preset::exp4_1, 11);
  cfg.total_steps = 5;
  cfg.out_dir = full_dir.str();
  auto full = trainer::train(cfg, data);

  // Interrupted: same config, stopped after 3 steps, then resumed.
  test::TempDir part_dir("resume_part");
  auto cfg2 = cfg;
  cfg2.out_dir = part_dir.str();
  trainer::Trainer tr(cfg2, data);
  while (tr.current_step() < 3) tr.step();
  const std::string mid = (part_dir.path() / "mid.vsr").string();
  tr.save_checkpoint(mid);

  trainer::Trainer resumed = trainer::Trainer::from_checkpoint(mid, data);
  CHECK(resumed.current_step() == 3);
  std::vector<trainer::StepResult> tail;
  tail.push_back(resumed.step());
  tail.push_back(resumed.step());

  // Compare parameters against the uninterrupted run's final checkpoint.
  const ckpt::Archive a = ckpt::load_archive(full.final_checkpoint);
  for (const auto& [n, v] : resumed.generator().named_params("gen")) {
    const Tensor* t = a.find(n);
    REQUIRE(t != nullptr);
    CHECK(max_abs_diff(*t, v->val) == 0.0);
  }
  for (const auto& [n, v] : resumed.discriminator().named_params("disc")) {
    const Tensor* t = a.find(n);
    REQUIRE(t != nullptr);
    CHECK(max_abs_diff(*t, v->val) == 0.0);
  }
  // and the post-resume losses equal the uninterrupted run's steps 3..4
  CHECK(tail[0].losses.total == full.steps[3].losses.total);
  CHECK(tail[1].losses.total == full.steps[4].losses.total);
}

TEST_CASE("pretrain_generator: guards and overfit descent") {
  auto data = synthetic_dataset(1, 3, 32, 105);
  auto cfg = tiny_config(trainer::Preset::rbpn_only, 3);
  cfg.weights.warp = 0.0;  // pixel-only for speed
  cfg.pretrain_generator_steps = 0;
  CHECK_THROWS_AS(trainer::pretrain_generator(cfg, data), std::invalid_argument);

  test::TempDir out("pretrain");
  cfg.pretrain_generator_steps = 60;
  cfg.total_steps = 60;
  cfg.learning_rate = 2e-3;
  cfg.out_dir = out.str();
  trainer::Trainer probe(cfg, data);
  const double init_loss = clip_pixel_loss(probe, data[0]);
  const std::string ckpt_path = trainer::pretrain_generator(cfg, data);
  trainer::Trainer loaded = trainer::Trainer::from_checkpoint(ckpt_path, data);
  CHECK(loaded.current_step() == 60);
  const double trained_loss = clip_pixel_loss(loaded, data[0]);
  CHECK(trained_loss < init_loss);
}

TEST_CASE("exp4_3 runs a pretrain phase before adversarial steps") {
  auto data = synthetic_dataset(1, 3, 32, 106);
  test::TempDir out("phases");
  auto cfg = tiny_config(trainer::Preset::exp4_3, 13);
  cfg.total_steps = 4;
  cfg.pretrain_generator_steps = 2;
  cfg.out_dir = out.str();
  auto result = trainer::train(cfg, data);
  REQUIRE(result.steps.size() == 4);
  CHECK(result.steps[0].pretrain_phase);
  CHECK(result.steps[1].pretrain_phase);
  CHECK(!result.steps[0].d_updated);
  CHECK(result.steps[0].losses.adv == 0.0);
  CHECK(result.steps[0].losses.feature == 0.0);
  CHECK(!result.steps[2].pretrain_phase);
  CHECK(result.steps[2].d_updated);
  CHECK(result.steps[2].losses.adv > 0.0);

  const std::string log = file_bytes(result.log_path);
  CHECK(log.find("\"phase\":\"pretrain\"") != std::string::npos);
  CHECK(log.find("\"phase\":\"adversarial\"") != std::string::npos);
}

TEST_CASE("inference: shapes, repeatability, fresh checkpoint equals bicubic") {
  auto data = synthetic_dataset(1, 5, 32, 107);
  test::TempDir out("infer");
  auto cfg = tiny_config(trainer::Preset::rbpn_only, 17);
  cfg.out_dir = out.str();
  trainer::Trainer tr(cfg, data);  // no steps: reconstruction conv still zero
  const std::string path = (out.path() / "init.vsr").string();
  tr.save_checkpoint(path);

  auto model = trainer::load_for_inference(path);
  VideoClip sr1 = model.infer(data[0].lr);
  VideoClip sr2 = model.infer(data[0].lr);
  REQUIRE(sr1.length() == 5);
  CHECK(sr1.height() == 32);
  CHECK(sr1.width() == 32);
  for (int t = 0; t < 5; ++t) CHECK(max_abs_diff(sr1.frames[t], sr2.frames[t]) == 0.0);

  for (int t = 0; t < 5; ++t) {
    Frame up = clamped(kern::bicubic_upsample(data[0].lr.frames[t], 4), 0.0, 1.0);
    CHECK(max_abs_diff(sr1.frames[t], up) < 1e-9);
  }
}

TEST_CASE("trainer rejects unusable datasets with descriptive messages") {
  auto cfg = tiny_config(trainer::Preset::exp4_1, 19);
  CHECK_THROWS_WITH_AS(trainer::Trainer(cfg, {}), doctest::Contains("empty"),
                       std::invalid_argument);

  auto data = synthetic_dataset(1, 2, 32, 108);  // too few frames for clip_frames=3
  CHECK_THROWS_WITH_AS(trainer::Trainer(cfg, data), doctest::Contains("at least 3"),
                       std::invalid_argument);

  auto small = synthetic_dataset(1, 3, 16, 109);  // LR 4 < crop 8
  CHECK_THROWS_WITH_AS(trainer::Trainer(cfg, small), doctest::Contains("crop"),
                       std::invalid_argument);
}
