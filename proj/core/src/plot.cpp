#include "vsr/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace vsr::plot {

namespace {

#include "font8x11.inc"

struct Color {
  double r, g, b;
};

constexpr Color kPalette[] = {
    {0.122, 0.467, 0.706}, {1.000, 0.498, 0.055}, {0.173, 0.627, 0.173},
    {0.839, 0.153, 0.157}, {0.580, 0.404, 0.741}, {0.549, 0.337, 0.294},
    {0.890, 0.467, 0.761}, {0.498, 0.498, 0.498},
};

void put_px(Frame& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
  double* p = img.px(y, x);
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

void draw_text(Frame& img, int x, int y, const std::string& text, const Color& c) {
  for (char ch : text) {
    if (ch < 32 || ch > 126) ch = '?';
    const unsigned char* glyph = kFont[ch - 32];
    for (int gy = 0; gy < kFontH; ++gy)
      for (int gx = 0; gx < 8; ++gx)
        if (glyph[gy] & (1u << gx)) put_px(img, x + gx, y + gy, c);
    x += 7;
  }
}

void draw_line(Frame& img, double x0, double y0, double x1, double y1, const Color& c) {
  const double dx = x1 - x0, dy = y1 - y0;
  const int steps = std::max(2, static_cast<int>(std::ceil(std::max(std::fabs(dx),
                                                                    std::fabs(dy)))) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    put_px(img, static_cast<int>(std::lround(x0 + t * dx)),
           static_cast<int>(std::lround(y0 + t * dy)), c);
  }
}

std::string format_tick(double v) {
  char buf[32];
  if (v == 0.0)
    std::snprintf(buf, sizeof(buf), "0");
  else if (std::fabs(v) >= 1000.0 || std::fabs(v) < 0.01)
    std::snprintf(buf, sizeof(buf), "%.2g", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

void line_chart(const std::string& path, const std::string& title,
                const std::string& x_label, const std::string& y_label,
                const std::vector<Series>& series, int width, int height) {
  if (series.empty()) throw std::invalid_argument("line_chart: no series");
  Frame img = Tensor::full(height, width, 3, 1.0);
  const Color black{0.1, 0.1, 0.1};
  const Color grey{0.85, 0.85, 0.85};

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      xmin = std::min(xmin, s.xs[i]);
      xmax = std::max(xmax, s.xs[i]);
      ymin = std::min(ymin, s.ys[i]);
      ymax = std::max(ymax, s.ys[i]);
    }
  if (!std::isfinite(xmin) || !std::isfinite(ymin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  } else {
    const double pad = 0.05 * (ymax - ymin);
    ymax += pad;
    ymin -= pad;
  }

  const int ml = 70, mr = 20, mt = 36, mb = 46;
  const int px0 = ml, px1 = width - mr, py0 = mt, py1 = height - mb;
  auto to_x = [&](double v) { return px0 + (v - xmin) / (xmax - xmin) * (px1 - px0); };
  auto to_y = [&](double v) { return py1 - (v - ymin) / (ymax - ymin) * (py1 - py0); };

  // grid + ticks
  const int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fy = ymin + (ymax - ymin) * i / kTicks;
    const int y = static_cast<int>(std::lround(to_y(fy)));
    draw_line(img, px0, y, px1, y, grey);
    draw_text(img, 6, y - kFontH / 2, format_tick(fy), black);
    const double fx = xmin + (xmax - xmin) * i / kTicks;
    const int x = static_cast<int>(std::lround(to_x(fx)));
    draw_line(img, x, py0, x, py1, grey);
    draw_text(img, x - 10, py1 + 8, format_tick(fx), black);
  }
  draw_line(img, px0, py0, px0, py1, black);
  draw_line(img, px0, py1, px1, py1, black);
  draw_text(img, (px0 + px1) / 2 - static_cast<int>(title.size()) * 7 / 2, 10, title, black);
  draw_text(img, (px0 + px1) / 2 - static_cast<int>(x_label.size()) * 7 / 2,
            height - kFontH - 6, x_label, black);
  draw_text(img, 6, py0 - kFontH - 4, y_label, black);

  // series + legend
  int ly = py0 + 6;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Color& c = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const auto& s = series[si];
    for (std::size_t i = 1; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.ys[i - 1]) || !std::isfinite(s.ys[i])) continue;
      draw_line(img, to_x(s.xs[i - 1]), to_y(s.ys[i - 1]), to_x(s.xs[i]), to_y(s.ys[i]), c);
    }
    for (int dx = 0; dx < 14; ++dx)
      for (int dy = 0; dy < 3; ++dy) put_px(img, px1 - 160 + dx, ly + 4 + dy, c);
    draw_text(img, px1 - 142, ly, s.label, black);
    ly += kFontH + 4;
  }

  save_png(path, img);
}

}  // namespace vsr::plot
