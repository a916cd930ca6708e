#pragma once

#include <filesystem>

#include "edgenerf/image.hpp"

namespace edgenerf {

// 8-bit PNG. Colors are quantized with round-to-nearest on [0,1] * 255.
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);
void write_png_gray(const std::filesystem::path& path, const GrayImage& image);
void write_png_binary(const std::filesystem::path& path, const BinaryMap& map, int on_value = 255);

// Any PNG colour type is accepted; it is expanded to 8-bit RGB or gray.
RgbImage read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);

// Portable float map, little-endian (scale -1.0), rows stored bottom to top.
void write_pfm(const std::filesystem::path& path, const Image<double>& image);
void write_pfm(const std::filesystem::path& path, const Image<Vec3>& image);
Image<double> read_pfm_gray(const std::filesystem::path& path);
Image<Vec3> read_pfm_rgb(const std::filesystem::path& path);

std::uint8_t quantize_unit(double value);

}  // namespace edgenerf
