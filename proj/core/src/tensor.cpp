#include "vsr/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace vsr {

double min_value(const Tensor& t) {
  double m = t.v.empty() ? 0.0 : t.v[0];
  for (double x : t.v) m = std::min(m, x);
  return m;
}

double max_value(const Tensor& t) {
  double m = t.v.empty() ? 0.0 : t.v[0];
  for (double x : t.v) m = std::max(m, x);
  return m;
}

double mean_value(const Tensor& t) {
  if (t.v.empty()) return 0.0;
  double s = 0.0;
  for (double x : t.v) s += x;
  return s / static_cast<double>(t.v.size());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  assert(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
  return m;
}

bool all_finite(const Tensor& t) {
  for (double x : t.v)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor clamped(const Tensor& t, double lo, double hi) {
  Tensor out = t;
  for (double& x : out.v) x = std::clamp(x, lo, hi);
  return out;
}

}  // namespace vsr
