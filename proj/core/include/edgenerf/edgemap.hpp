#pragma once

#include <filesystem>
#include <optional>

#include "edgenerf/image.hpp"

namespace edgenerf {

enum class EdgeMethod { Canny, External };

struct CannyParams {
  double sigma = 1.4;
  double low = 50.0;
  double high = 150.0;
};

struct EdgeConfig {
  EdgeMethod method = EdgeMethod::Canny;
  double tau_e = 125.0;
  CannyParams canny;
};

// Luma on the 0..255 scale from an RGB image in [0,1].
GrayImage to_grayscale(const RgbImage& rgb);

// Gaussian blur (radius ceil(3 sigma), reflected borders), Sobel gradients,
// 4-bin non-maximum suppression and 8-connected hysteresis. Output is 0/255.
GrayImage canny(const GrayImage& gray, const CannyParams& params);

// Separable Gaussian blur with reflect-101 borders; sigma <= 0 returns the input.
GrayImage gaussian_blur(const GrayImage& gray, double sigma);

// 1 where strength >= tau_e.
BinaryMap binarize(const GrayImage& edge_strength, double tau_e);

// Max over the 3x3 neighbourhood, clipped at the image border.
BinaryMap dilate3x3(const BinaryMap& binary);

// e = 1 - B'.
EdgeIndicatorMap to_indicator(const BinaryMap& dilated);

// binarize -> dilate -> indicator.
EdgeIndicatorMap indicator_from_edge_strength(const GrayImage& edge_strength, double tau_e);

// Canny pipeline on an RGB image.
EdgeIndicatorMap compute_edge_indicator(const RgbImage& rgb, const EdgeConfig& config);

// Reads an 8-bit grayscale edge map and runs binarize -> dilate -> indicator.
// Throws ConfigError when the size differs from `expected_width` x `expected_height`.
EdgeIndicatorMap load_external_edge_map(const std::filesystem::path& path, double tau_e,
                                        std::optional<std::pair<int, int>> expected_size = std::nullopt);

}  // namespace edgenerf
