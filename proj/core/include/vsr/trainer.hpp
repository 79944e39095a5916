#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vsr/checkpoint.hpp"
#include "vsr/config.hpp"
#include "vsr/dataio.hpp"
#include "vsr/discriminator.hpp"
#include "vsr/flow.hpp"
#include "vsr/generator.hpp"
#include "vsr/losses.hpp"
#include "vsr/rng.hpp"

// Adversarial training orchestration: experiment presets, alternating D/G
// updates, joint flow-network training, deterministic seeding, and exactly
// resumable checkpoints.
namespace vsr::trainer {

enum class Preset { exp4_1, exp4_2, exp4_3, rbpn_only };

Preset preset_from_string(const std::string& s);
std::string to_string(Preset preset);

struct TrainConfig {
  Preset preset = Preset::exp4_2;
  int n_neighbors = 3;
  bool use_pingpong = false;
  int pretrain_generator_steps = 0;
  int total_steps = 2000;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 4;
  int crop = 32;
  int scale = 4;
  int clip_frames = 3;
  std::uint64_t seed = 1;
  std::string data_root;
  std::string out_dir = ".";
  int checkpoint_every = 500;
  losses::LossWeights weights;
  losses::GanForm gan_form = losses::GanForm::non_saturating;
  gen::GeneratorConfig generator;
  disc::DiscriminatorConfig discriminator;
  flow::FlowNetConfig flownet;

  static TrainConfig preset_defaults(Preset preset);

  // Parse a flat key/value config file; unknown keys are rejected, keys that
  // contradict the preset's pinned fields raise invalid-argument.
  static TrainConfig from_kv(const cfg::KvMap& kv);
  cfg::KvMap to_kv() const;

  // Enforces the preset invariants and general validity.
  void validate() const;

  // Neighbor frames fed per target; doubled by the ping-pong forward and
  // backward passes.
  int effective_neighbor_frames() const {
    return use_pingpong ? 2 * n_neighbors : n_neighbors;
  }
  // Learning rate schedule: halved at each third of training.
  double lr_at(int step) const;
  // Frames per sampled clip required by the neighbor/triplet configuration.
  int min_clip_frames() const;
};

// Adaptive moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<nn::Var> params, double beta1, double beta2, double eps);

  void step(double lr);
  void zero_grad();
  int t() const { return t_; }

  // Moment serialization (order matches the parameter list).
  void put_state(ckpt::Archive& archive, const std::string& prefix,
                 const std::vector<std::string>& names) const;
  void load_state(const ckpt::Archive& archive, const std::string& prefix,
                  const std::vector<std::string>& names);
  void set_t(int t) { t_ = t; }

 private:
  std::vector<nn::Var> params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

struct StepResult {
  int step = 0;
  bool pretrain_phase = false;
  losses::LossBundle losses;
  double d_loss = 0.0;     // discriminator objective for the step (0 if gated off)
  bool d_updated = false;
  double lr = 0.0;
};

class Trainer {
 public:
  Trainer(const TrainConfig& config, std::vector<dataio::LRHRPair> dataset);

  static Trainer from_checkpoint(const std::string& path,
                                 std::vector<dataio::LRHRPair> dataset);

  // One optimization step: discriminator update (when the adversarial weight
  // is active and pretraining is over) followed by one generator+flow update.
  StepResult step();

  void save_checkpoint(const std::string& path) const;

  int current_step() const { return step_; }
  const TrainConfig& config() const { return config_; }
  const gen::Generator& generator() const { return *gen_; }
  const disc::Discriminator& discriminator() const { return *disc_; }
  const flow::FlowNet& flownet() const { return *flow_; }
  std::shared_ptr<flow::FlowNet> flownet_ptr() const { return flow_; }

  // Exposed for tests: the batch the next step would consume is drawn from
  // this stream.
  Rng& data_rng() { return data_rng_; }

 private:
  struct Sample {
    std::vector<Frame> lr, hr;
  };
  std::vector<Sample> sample_batch();
  losses::LossBundle generator_update(const std::vector<Sample>& batch, bool pretrain,
                                      double lr);
  double discriminator_update(const std::vector<Sample>& batch, double lr);

  TrainConfig config_;
  std::vector<dataio::LRHRPair> data_;
  std::unique_ptr<gen::Generator> gen_;
  std::unique_ptr<disc::Discriminator> disc_;
  std::shared_ptr<flow::FlowNet> flow_;
  std::unique_ptr<Adam> opt_g_;  // generator + flow parameters
  std::unique_ptr<Adam> opt_d_;
  Rng data_rng_;
  int step_ = 0;
  losses::LossBundle running_;  // decayed averages, checkpointed
  bool running_init_ = false;
};

struct TrainOutput {
  std::string final_checkpoint;
  std::string log_path;
  std::vector<StepResult> steps;  // also written to the log file
};

// Full run with line-delimited JSON loss logging (deterministic content),
// a separate wall-time log, periodic checkpoints and a final checkpoint.
// resume_from, when non-empty, continues an interrupted run and appends to
// the existing logs.
TrainOutput train(const TrainConfig& config, std::vector<dataio::LRHRPair> dataset,
                  const std::string& resume_from = "");

// Generator-only pretraining (adversarial and feature weights forced to
// zero); writes checkpoint_pretrain.vsr under out_dir. pretrain steps must
// be positive.
std::string pretrain_generator(const TrainConfig& config,
                               std::vector<dataio::LRHRPair> dataset);

struct InferModel {
  TrainConfig config;
  std::unique_ptr<gen::Generator> generator;
  std::shared_ptr<flow::FlowNet> flownet;
  int step = 0;

  VideoClip infer(const VideoClip& lr_clip) const;
};

// Loads a checkpoint for inference (deterministic, clamped outputs).
InferModel load_for_inference(const std::string& checkpoint_path);

}  // namespace vsr::trainer
