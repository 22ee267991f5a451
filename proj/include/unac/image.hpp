#pragma once

// PNG/JPEG decoding into an RGB raster and deterministic PNG encoding.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace unac {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ImageFormat { kPng, kJpeg, kUnknown };

ImageFormat sniff_format(std::string_view bytes);
std::string_view mime_type(ImageFormat format);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Interleaved 8-bit RGB pixels, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Raster() = default;
  Raster(int w, int h, Rgb fill = {});

  Rgb at(int x, int y) const {
    const auto* p = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  friend bool operator==(const Raster&, const Raster&) = default;
};

/// nullopt when the bytes are not a decodable PNG or JPEG.
std::optional<Raster> decode_image(std::string_view bytes);

/// Always produces the same bytes for the same raster.
std::string encode_png(const Raster& raster);

}  // namespace unac
