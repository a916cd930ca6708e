#include "edgenerf/edgemap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "edgenerf/errors.hpp"
#include "edgenerf/image_io.hpp"

namespace edgenerf {
namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

enum class Direction { Horizontal, Diagonal, Vertical, AntiDiagonal };

Direction quantize_direction(double gx, double gy) {
  double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 180.0;
  if (angle < 22.5 || angle >= 157.5) return Direction::Horizontal;
  if (angle < 67.5) return Direction::Diagonal;
  if (angle < 112.5) return Direction::Vertical;
  return Direction::AntiDiagonal;
}

std::array<int, 2> step(Direction d) {
  switch (d) {
    case Direction::Horizontal: return {1, 0};
    case Direction::Diagonal: return {1, 1};
    case Direction::Vertical: return {0, 1};
    case Direction::AntiDiagonal: return {-1, 1};
  }
  return {1, 0};
}

}  // namespace

GrayImage to_grayscale(const RgbImage& rgb) {
  GrayImage gray(rgb.width(), rgb.height());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const Vec3 c = rgb.pixels()[i] * 255.0;
    gray.pixels()[i] = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
  }
  return gray;
}

GrayImage gaussian_blur(const GrayImage& gray, double sigma) {
  if (sigma <= 0.0) return gray;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = gray.width(), h = gray.height();
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * gray(reflect101(x + i, w), y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(x, reflect101(y + i, h));
      out(x, y) = acc;
    }
  }
  return out;
}

GrayImage canny(const GrayImage& gray, const CannyParams& params) {
  if (!(params.low > 0.0) || params.low > params.high) {
    throw InputDomainError("canny: thresholds must satisfy 0 < low <= high");
  }
  const int w = gray.width(), h = gray.height();
  const GrayImage blurred = gaussian_blur(gray, params.sigma);

  Image<double> magnitude(w, h), gx(w, h), gy(w, h);
  double max_magnitude = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto at = [&](int dx, int dy) { return blurred(reflect101(x + dx, w), reflect101(y + dy, h)); };
      const double sx = (at(1, -1) + 2.0 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2.0 * at(-1, 0) + at(-1, 1));
      const double sy = (at(-1, 1) + 2.0 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2.0 * at(0, -1) + at(1, -1));
      gx(x, y) = sx;
      gy(x, y) = sy;
      magnitude(x, y) = std::hypot(sx, sy);
      max_magnitude = std::max(max_magnitude, magnitude(x, y));
    }
  }

  // Ties along the gradient keep the pixel on the negative side; values equal
  // up to roundoff count as ties.
  const double tie = 1e-9 * max_magnitude;
  Image<double> thin(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = magnitude(x, y);
      if (m <= tie) continue;
      const auto [dx, dy] = step(quantize_direction(gx(x, y), gy(x, y)));
      auto neighbour = [&](int nx, int ny) { return magnitude.in_bounds(nx, ny) ? magnitude(nx, ny) : 0.0; };
      const double before = neighbour(x - dx, y - dy);
      const double after = neighbour(x + dx, y + dy);
      if (m > before + tie && m >= after - tie) thin(x, y) = m;
    }
  }

  GrayImage edges(w, h, 0.0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (thin(x, y) >= params.high && edges(x, y) == 0.0) {
        edges(x, y) = 255.0;
        stack.emplace_back(x, y);
      }
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int ny = cy - 1; ny <= cy + 1; ++ny) {
          for (int nx = cx - 1; nx <= cx + 1; ++nx) {
            if (!thin.in_bounds(nx, ny) || edges(nx, ny) != 0.0) continue;
            if (thin(nx, ny) >= params.low) {
              edges(nx, ny) = 255.0;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
    }
  }
  return edges;
}

BinaryMap binarize(const GrayImage& edge_strength, double tau_e) {
  BinaryMap b(edge_strength.width(), edge_strength.height());
  for (std::size_t i = 0; i < b.size(); ++i) b.pixels()[i] = edge_strength.pixels()[i] >= tau_e ? 1 : 0;
  return b;
}

BinaryMap dilate3x3(const BinaryMap& binary) {
  const int w = binary.width(), h = binary.height();
  BinaryMap out(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int ny = std::max(0, y - 1); ny <= std::min(h - 1, y + 1); ++ny)
        for (int nx = std::max(0, x - 1); nx <= std::min(w - 1, x + 1); ++nx) v = std::max(v, binary(nx, ny));
      out(x, y) = v;
    }
  }
  return out;
}

EdgeIndicatorMap to_indicator(const BinaryMap& dilated) {
  BinaryMap e(dilated.width(), dilated.height());
  for (std::size_t i = 0; i < e.size(); ++i) e.pixels()[i] = dilated.pixels()[i] ? 0 : 1;
  return EdgeIndicatorMap(std::move(e));
}

EdgeIndicatorMap indicator_from_edge_strength(const GrayImage& edge_strength, double tau_e) {
  return to_indicator(dilate3x3(binarize(edge_strength, tau_e)));
}

EdgeIndicatorMap compute_edge_indicator(const RgbImage& rgb, const EdgeConfig& config) {
  return indicator_from_edge_strength(canny(to_grayscale(rgb), config.canny), config.tau_e);
}

EdgeIndicatorMap load_external_edge_map(const std::filesystem::path& path, double tau_e,
                                        std::optional<std::pair<int, int>> expected_size) {
  const GrayImage strength = read_png_gray(path);
  if (expected_size && (strength.width() != expected_size->first || strength.height() != expected_size->second)) {
    throw ConfigError("edge map " + path.string() + " is " + std::to_string(strength.width()) + "x" +
                      std::to_string(strength.height()) + ", dataset images are " +
                      std::to_string(expected_size->first) + "x" + std::to_string(expected_size->second));
  }
  return indicator_from_edge_strength(strength, tau_e);
}

}  // namespace edgenerf
