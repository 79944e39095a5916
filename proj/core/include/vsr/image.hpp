#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "vsr/tensor.hpp"

namespace vsr {

// A Frame is a Tensor with exactly 3 channels (RGB) and values in [0, 1].
using Frame = Tensor;

// Errors raised by dataset/file handling; the CLI maps these to exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

void validate_frame(const Frame& f);

struct VideoClip {
  std::string scene_id;
  std::vector<Frame> frames;

  int length() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames[0].h; }
  int width() const { return frames.empty() ? 0 : frames[0].w; }
  void validate() const;  // length >= 1, homogeneous dims, valid frames
};

// 8-bit PNG decode to RGB in [0, 1]. Grayscale/palette/alpha inputs are
// converted; 16-bit depth is reduced. Throws DataError naming the path.
Frame load_png(const std::string& path);

// Encode to 8-bit RGB PNG with round-to-nearest quantization; values are
// clamped to [0, 1] first.
void save_png(const std::string& path, const Frame& frame);

}  // namespace vsr
