#pragma once

// Straightforward Canny used as an oracle: full 2-D Gaussian kernel instead of
// a separable one, slope tests instead of atan2, breadth-first hysteresis.
// Shares the conventions of the library detector (reflect-101 borders,
// radius ceil(3 sigma), 3x3 Sobel, ties along the gradient kept on the
// negative side) but none of its code.

#include <cmath>
#include <deque>
#include <numbers>
#include <vector>

namespace reference {

struct Gray {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  Gray(int w, int h, double fill = 0.0) : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

inline int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline Gray blur(const Gray& in, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k((2 * r + 1) * (2 * r + 1));
  double total = 0.0;
  for (int j = -r; j <= r; ++j)
    for (int i = -r; i <= r; ++i) total += k[(j + r) * (2 * r + 1) + i + r] = std::exp(-(i * i + j * j) / (2 * sigma * sigma));
  Gray out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j)
        for (int i = -r; i <= r; ++i)
          acc += k[(j + r) * (2 * r + 1) + i + r] * in.at(mirror(x + i, in.width), mirror(y + j, in.height));
      out.at(x, y) = acc / total;
    }
  return out;
}

// Returns 255 on edge pixels, 0 elsewhere.
inline Gray canny(const Gray& image, double sigma, double low, double high) {
  const int w = image.width, h = image.height;
  const Gray b = blur(image, sigma);
  Gray gx(w, h), gy(w, h), mag(w, h);
  double peak = 0.0;
  static const int sx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a = 0.0, c = 0.0;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) {
          const double p = b.at(mirror(x + i, w), mirror(y + j, h));
          a += sx[j + 1][i + 1] * p;
          c += sx[i + 1][j + 1] * p;
        }
      gx.at(x, y) = a;
      gy.at(x, y) = c;
      mag.at(x, y) = std::sqrt(a * a + c * c);
      peak = std::max(peak, mag.at(x, y));
    }

  const double eps = 1e-9 * peak;
  const double t1 = std::tan(std::numbers::pi / 8), t3 = std::tan(3 * std::numbers::pi / 8);
  Gray nms(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = mag.at(x, y);
      if (m <= eps) continue;
      double a = gx.at(x, y), c = gy.at(x, y);
      if (c < 0 || (c == 0 && a < 0)) a = -a, c = -c;  // fold onto [0, 180)
      int dx, dy;
      if (std::abs(c) < t1 * std::abs(a)) dx = 1, dy = 0;
      else if (std::abs(c) >= t3 * std::abs(a)) dx = 0, dy = 1;
      else if (a > 0) dx = 1, dy = 1;
      else dx = -1, dy = 1;
      auto get = [&](int px, int py) { return px >= 0 && py >= 0 && px < w && py < h ? mag.at(px, py) : 0.0; };
      if (m > get(x - dx, y - dy) + eps && m >= get(x + dx, y + dy) - eps) nms.at(x, y) = m;
    }

  Gray out(w, h);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (nms.at(x, y) >= high) {
        out.at(x, y) = 255.0;
        queue.emplace_back(x, y);
      }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (int j = -1; j <= 1; ++j)
      for (int i = -1; i <= 1; ++i) {
        const int px = x + i, py = y + j;
        if (px < 0 || py < 0 || px >= w || py >= h || out.at(px, py) != 0.0) continue;
        if (nms.at(px, py) >= low) {
          out.at(px, py) = 255.0;
          queue.emplace_back(px, py);
        }
      }
  }
  return out;
}

}  // namespace reference
