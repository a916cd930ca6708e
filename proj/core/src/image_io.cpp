#include "edgenerf/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "edgenerf/errors.hpp"

namespace edgenerf {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Returns 8-bit samples with the requested channel count (1 or 3).
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int channels, int& width, int& height) {
  FilePtr file = open_file(path, "rb");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool source_gray = !(color_type & PNG_COLOR_MASK_COLOR) && color_type != PNG_COLOR_TYPE_PALETTE;
  if (channels == 3 && source_gray) png_set_gray_to_rgb(png);
  if (channels == 1 && !source_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG layout in " + path.string());
  }
  std::vector<std::uint8_t> bytes(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = bytes.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return bytes;
}

void write_float_le(std::ostream& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  out.write(reinterpret_cast<const char*>(&bits), 4);
}

float read_float(std::istream& in, bool little_endian) {
  std::uint32_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), 4);
  const bool native_little = std::endian::native == std::endian::little;
  if (little_endian != native_little) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

struct PfmHeader {
  int channels = 0;
  int width = 0;
  int height = 0;
  bool little_endian = true;
};

PfmHeader read_pfm_header(std::istream& in, const std::filesystem::path& path) {
  std::string magic;
  PfmHeader header;
  double scale = 0.0;
  in >> magic >> header.width >> header.height >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || header.width <= 0 || header.height <= 0 || scale == 0.0) {
    throw IoError(path.string() + " is not a valid PFM file");
  }
  in.get();  // single whitespace byte before the raster
  header.channels = magic == "PF" ? 3 : 1;
  header.little_endian = scale < 0.0;
  return header;
}

template <int Channels, typename Pixel>
void write_pfm_impl(const std::filesystem::path& path, const Image<Pixel>& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out << (Channels == 3 ? "PF" : "Pf") << '\n' << image.width() << ' ' << image.height() << '\n' << "-1.0\n";
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      if constexpr (Channels == 3) {
        for (int c = 0; c < 3; ++c) write_float_le(out, static_cast<float>(image(x, y)[c]));
      } else {
        write_float_le(out, static_cast<float>(image(x, y)));
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::uint8_t quantize_unit(double value) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(image.size() * 3);
  for (const Vec3& p : image.pixels()) {
    for (int c = 0; c < 3; ++c) bytes.push_back(quantize_unit(p[c]));
  }
  write_png(path, image.width(), image.height(), 3, bytes);
}

void write_png_gray(const std::filesystem::path& path, const GrayImage& image) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(image.size());
  for (double v : image.pixels()) bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))));
  write_png(path, image.width(), image.height(), 1, bytes);
}

void write_png_binary(const std::filesystem::path& path, const BinaryMap& map, int on_value) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(map.size());
  for (auto v : map.pixels()) bytes.push_back(v ? static_cast<std::uint8_t>(on_value) : 0);
  write_png(path, map.width(), map.height(), 1, bytes);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_png(path, 3, w, h);
  RgbImage image(w, h);
  for (std::size_t i = 0; i < image.size(); ++i) {
    image.pixels()[i] = Vec3(bytes[3 * i], bytes[3 * i + 1], bytes[3 * i + 2]) / 255.0;
  }
  return image;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_png(path, 1, w, h);
  GrayImage image(w, h);
  std::copy(bytes.begin(), bytes.end(), image.pixels().begin());
  return image;
}

void write_pfm(const std::filesystem::path& path, const Image<double>& image) { write_pfm_impl<1>(path, image); }
void write_pfm(const std::filesystem::path& path, const Image<Vec3>& image) { write_pfm_impl<3>(path, image); }

Image<double> read_pfm_gray(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const PfmHeader header = read_pfm_header(in, path);
  if (header.channels != 1) throw IoError(path.string() + ": expected a 1-channel PFM");
  Image<double> image(header.width, header.height);
  for (int y = header.height - 1; y >= 0; --y)
    for (int x = 0; x < header.width; ++x) image(x, y) = read_float(in, header.little_endian);
  if (!in) throw IoError(path.string() + ": truncated PFM raster");
  return image;
}

Image<Vec3> read_pfm_rgb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const PfmHeader header = read_pfm_header(in, path);
  if (header.channels != 3) throw IoError(path.string() + ": expected a 3-channel PFM");
  Image<Vec3> image(header.width, header.height);
  for (int y = header.height - 1; y >= 0; --y) {
    for (int x = 0; x < header.width; ++x) {
      for (int c = 0; c < 3; ++c) image(x, y)[c] = read_float(in, header.little_endian);
    }
  }
  if (!in) throw IoError(path.string() + ": truncated PFM raster");
  return image;
}

}  // namespace edgenerf
