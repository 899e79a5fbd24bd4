#ifndef SIGSPP_IMAGE_HPP_
#define SIGSPP_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sigspp/errors.hpp"

namespace sigspp {

// 8-bit grayscale raster, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }

  bool operator==(const GrayImage&) const = default;
};

GrayImage read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const GrayImage& image);

}  // namespace sigspp

#endif  // SIGSPP_IMAGE_HPP_
