#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vsr/autodiff.hpp"
#include "vsr/flow.hpp"
#include "vsr/image.hpp"
#include "vsr/rng.hpp"

// Back-projection generator: target/neighbor feature extraction, a recurrent
// encoder-decoder projection module applied once per neighbor, and a
// reconstruction stage that fuses the accumulated HR feature maps into the
// x4 output frame.
namespace vsr::gen {

struct GeneratorConfig {
  int base_channels = 32;
  int n_neighbors = 2;
  int n_residual_blocks = 3;
  int scale = 4;  // the only supported factor
  bool bicubic_skip = true;

  void validate() const;
};

struct NeighborInput {
  Frame frame;
  flow::FlowField flow;  // neighbor -> target
};
using NeighborPack = std::vector<NeighborInput>;

struct NeighborVar {
  nn::Var frame;
  nn::Var flow;
};

struct ModelDescription {
  std::size_t parameter_count = 0;
  std::vector<std::pair<std::string, std::size_t>> by_part;
};

// Neighbor index selection: past-first symmetric offsets (-1, +1, -2, +2, ...)
// reflected at clip boundaries (mirror without repeating the edge; duplicates
// allowed near boundaries, and a length-1 clip reflects everything to 0).
std::vector<int> neighbor_indices(int t, int clip_len, int n_neighbors);

class Generator {
 public:
  Generator(const GeneratorConfig& config, Rng& rng);

  // Graph-building stages.
  nn::Var extract_target_features(const nn::Var& target) const;
  nn::Var extract_neighbor_features(const nn::Var& target, const nn::Var& neighbor,
                                    const nn::Var& flow) const;
  nn::Var project_encode(const nn::Var& l_prev, const nn::Var& m_k) const;
  nn::Var project_decode(const nn::Var& h_k) const;
  nn::Var reconstruct(const std::vector<nn::Var>& h_list) const;
  nn::Var forward(const nn::Var& target, const std::vector<NeighborVar>& neighbors) const;

  // Convenience single-frame inference. Clamps to [0,1] when requested
  // (training uses the graph path, which never clamps).
  Frame generate(const Frame& target, const NeighborPack& pack, bool clamp = true) const;

  // Per-frame SR over a clip, neighbor flows computed with the given
  // estimator on the raw LR frames.
  VideoClip generate_sequence(const VideoClip& lr_clip, const flow::FlowEstimator& estimator,
                              bool clamp = true) const;

  const GeneratorConfig& config() const { return config_; }
  std::vector<std::pair<std::string, nn::Var>> named_params(const std::string& prefix) const;
  ModelDescription describe() const;

 private:
  struct ResBlock {
    nn::Var wa, ba, aa;
    nn::Var wb, bb;
  };
  struct UpPair {
    nn::Var w1, b1, a1;
    nn::Var w2, b2, a2;
  };

  nn::Var run_resblocks(const std::vector<ResBlock>& blocks, nn::Var x) const;
  nn::Var run_up(const UpPair& up, const nn::Var& x) const;

  GeneratorConfig config_;
  nn::Var feat_t_w, feat_t_b, feat_t_a;
  nn::Var feat_n_w, feat_n_b, feat_n_a;
  UpPair sisr_up_, misr_up_;
  std::vector<ResBlock> enc_res_;
  nn::Var dec_w1, dec_b1, dec_a1;
  nn::Var dec_w2, dec_b2, dec_a2;
  ResBlock dec_res_;
  nn::Var recon_w, recon_b;  // zero-initialized: the model starts exactly at
                             // the bicubic skip when the skip is enabled
};

}  // namespace vsr::gen
