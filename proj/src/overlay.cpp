#include "unac/visprompt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace unac {
namespace {

// 3x5 digit glyphs, one row per entry, bit 2 is the left column.
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits = {{
    {7, 5, 5, 5, 7},
    {2, 6, 2, 2, 7},
    {7, 1, 7, 4, 7},
    {7, 1, 7, 1, 7},
    {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7},
    {7, 4, 7, 5, 7},
    {7, 1, 1, 1, 1},
    {7, 5, 7, 5, 7},
    {7, 5, 7, 1, 7},
}};

constexpr Rgb kWhite{255, 255, 255};

std::uint8_t blend(std::uint8_t base, std::uint8_t over, double alpha) {
  return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * base + alpha * over));
}

void tint_mask(Raster& r, const Region& region, Rgb hue, double alpha) {
  const auto& b = region.bbox;
  for (int y = b.y; y < b.y + b.h; ++y) {
    for (int x = b.x; x < b.x + b.w; ++x) {
      if (!region.mask->at(x, y)) continue;
      const auto c = r.at(x, y);
      r.set(x, y, {blend(c.r, hue.r, alpha), blend(c.g, hue.g, alpha), blend(c.b, hue.b, alpha)});
    }
  }
}

void outline(Raster& r, const BBox& b, Rgb hue, int width) {
  for (int y = b.y; y < b.y + b.h; ++y) {
    for (int x = b.x; x < b.x + b.w; ++x) {
      const bool edge = x < b.x + width || x >= b.x + b.w - width || y < b.y + width || y >= b.y + b.h - width;
      if (edge) r.set(x, y, hue);
    }
  }
}

void badge(Raster& r, Point c, int radius, Rgb hue, int id) {
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy > radius * radius) continue;
      if (r.contains(c.x + dx, c.y + dy)) r.set(c.x + dx, c.y + dy, hue);
    }
  }
  const auto digits = std::to_string(id);
  const int n = static_cast<int>(digits.size());
  const int side = 2 * radius + 1;
  const int units_w = 4 * n - 1;
  const int scale = std::max(1, std::min(side * 3 / 5 / 5, side * 3 / 4 / units_w));
  const int left = c.x - units_w * scale / 2;
  const int top = c.y - 5 * scale / 2;
  for (int i = 0; i < n; ++i) {
    const auto& glyph = kDigits[digits[i] - '0'];
    for (int row = 0; row < 5; ++row) {
      for (int col = 0; col < 3; ++col) {
        if (!(glyph[row] >> (2 - col) & 1)) continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const int x = left + (4 * i + col) * scale + sx;
            const int y = top + row * scale + sy;
            // Glyphs stay inside the badge square.
            if (std::abs(x - c.x) > radius || std::abs(y - c.y) > radius) continue;
            if (r.contains(x, y)) r.set(x, y, kWhite);
          }
        }
      }
    }
  }
}

bool mask_usable(const Region& region, int width, int height) {
  return region.mask && region.mask->width == width && region.mask->height == height &&
         region.mask->bits.size() == static_cast<std::size_t>(width) * height;
}

}  // namespace

void validate(const MarkerStyle& style) {
  if (style.hues.empty()) throw std::invalid_argument("marker.hues must not be empty");
  if (style.badge_min_px < 1) throw std::invalid_argument("marker.badge_min_px must be >= 1");
  if (!(style.badge_fraction >= 0.0 && style.badge_fraction <= 1.0)) {
    throw std::invalid_argument("marker.badge_fraction must be in [0,1]");
  }
  if (!(style.tint_alpha >= 0.0 && style.tint_alpha <= 1.0)) {
    throw std::invalid_argument("marker.tint_alpha must be in [0,1]");
  }
  if (style.outline_width < 1) throw std::invalid_argument("marker.outline_width must be >= 1");
}

int badge_diameter(int image_width, int image_height, const MarkerStyle& style) {
  const int scaled = static_cast<int>(std::lround(style.badge_fraction * std::min(image_width, image_height)));
  return std::max(style.badge_min_px, scaled);
}

Point badge_center(const Region& region, int image_width, int image_height, const MarkerStyle& style) {
  const auto& b = region.bbox;
  Point c{b.x + b.w / 2, b.y + b.h / 2};
  if (mask_usable(region, image_width, image_height)) {
    std::int64_t sx = 0, sy = 0, n = 0;
    for (int y = b.y; y < b.y + b.h; ++y) {
      for (int x = b.x; x < b.x + b.w; ++x) {
        if (region.mask->at(x, y)) {
          sx += x;
          sy += y;
          ++n;
        }
      }
    }
    if (n > 0) c = {static_cast<int>((2 * sx + n) / (2 * n)), static_cast<int>((2 * sy + n) / (2 * n))};
  }
  const int radius = badge_diameter(image_width, image_height, style) / 2;
  auto clamp = [radius](int v, int extent) {
    if (extent < 2 * radius + 1) return extent / 2;
    return std::clamp(v, radius, extent - 1 - radius);
  };
  return {clamp(c.x, image_width), clamp(c.y, image_height)};
}

MarkedImage overlay_markers(const ImageBlob& image, const std::vector<Region>& regions, const MarkerStyle& style) {
  validate(style);
  auto raster = decode_image(image.bytes());
  if (!raster) throw ImageError("overlay: image undecodable");
  const int w = raster->width;
  const int h = raster->height;

  std::vector<const Region*> by_id(regions.size(), nullptr);
  for (const auto& r : regions) {
    if (r.id < 1 || r.id > static_cast<int>(regions.size()) || by_id[r.id - 1]) {
      throw std::invalid_argument("overlay: region ids must be dense from 1");
    }
    if (!r.bbox.inside(w, h)) {
      throw std::invalid_argument("overlay: region " + std::to_string(r.id) + " bbox outside image");
    }
    by_id[r.id - 1] = &r;
  }

  auto hue = [&](int id) { return style.hues[static_cast<std::size_t>(id - 1) % style.hues.size()]; };

  // Segments first so text-box outlines stay on top.
  for (const auto* r : by_id) {
    if (r->kind != RegionKind::kSegment) continue;
    if (mask_usable(*r, w, h)) {
      tint_mask(*raster, *r, hue(r->id), style.tint_alpha);
    } else {
      outline(*raster, r->bbox, hue(r->id), style.outline_width);
    }
  }
  for (const auto* r : by_id) {
    if (r->kind == RegionKind::kTextBox) outline(*raster, r->bbox, hue(r->id), style.outline_width);
  }

  MarkedImage out;
  out.source_digest = image.digest();
  const int radius = badge_diameter(w, h, style) / 2;
  for (const auto* r : by_id) {
    const auto c = badge_center(*r, w, h, style);
    badge(*raster, c, radius, hue(r->id), r->id);
    out.legend.push_back(LegendEntry{r->id, r->kind, c, r->text.value_or("")});
  }
  out.image = ImageBlob::from_bytes(encode_png(*raster));
  return out;
}

}  // namespace unac
