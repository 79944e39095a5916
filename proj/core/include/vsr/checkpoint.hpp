#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vsr/tensor.hpp"

// Versioned archive of named parameter rasters plus a JSON metadata blob.
// Shared by model checkpoints and the pluggable perceptual-metric weights.
namespace vsr::ckpt {

inline constexpr char kMagic[8] = {'V', 'S', 'R', 'A', 'R', 'C', 'H', '1'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct Archive {
  std::string meta_json;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  void put(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
};

// Atomic write (temp file + rename).
void save_archive(const std::string& path, const Archive& archive);
Archive load_archive(const std::string& path);

}  // namespace vsr::ckpt
