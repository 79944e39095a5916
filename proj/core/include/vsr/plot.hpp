#pragma once

#include <string>
#include <vector>

#include "vsr/image.hpp"

// Dependency-free PNG line charts for the report command.
namespace vsr::plot {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

void line_chart(const std::string& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<Series>& series, int width = 960, int height = 540);

}  // namespace vsr::plot
