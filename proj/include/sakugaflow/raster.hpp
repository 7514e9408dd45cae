#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sakugaflow/digest.hpp"
#include "sakugaflow/types.hpp"

namespace sakugaflow {

/// 8-bit RGBA, row-major.
struct Raster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> rgba;

  Raster() = default;
  Raster(std::uint32_t w, std::uint32_t h) : width(w), height(h), rgba(std::size_t{w} * h * 4, 0) {}

  Canvas size() const { return Canvas{width, height}; }
  bool operator==(const Raster&) const = default;
};

/// Largest edge accepted by the decoders.
inline constexpr std::uint32_t kMaxImageEdge = 8192;

/// PNG, 8-bit RGBA. Same pixels always give the same bytes.
std::string encode_png(const Raster& raster);

/// Any PNG the platform decoder understands, converted to 8-bit RGBA.
/// Throws Error(UndecodableImage).
Raster decode_png(std::string_view bytes);

Raster scale_to(const Raster& src, Canvas canvas);

/// Selection for localized regeneration, one bit per pixel (row-major), 1 = regenerate.
class MaskRegion {
 public:
  MaskRegion() = default;
  MaskRegion(std::uint32_t width, std::uint32_t height);

  /// Inclusive-exclusive rectangle, clipped to the mask.
  static MaskRegion rectangle(Canvas canvas, std::uint32_t x, std::uint32_t y, std::uint32_t w,
                              std::uint32_t h);
  /// Grayscale PNG; value >= 128 selects the pixel. Throws Error(UndecodableImage).
  static MaskRegion decode_png(std::string_view bytes);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  Canvas size() const { return Canvas{width_, height_}; }

  bool test(std::uint32_t x, std::uint32_t y) const;
  void set(std::uint32_t x, std::uint32_t y, bool on = true);
  std::size_t count() const;

  /// One byte per pixel (0 or 1), the layout the kernels take.
  std::vector<std::uint8_t> to_bytes() const;
  /// 8-bit grayscale PNG: 255 for set pixels, 0 otherwise.
  std::string encode_png() const;

  bool operator==(const MaskRegion&) const = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint8_t> bits_;  // MSB-first within each byte
};

struct ImageBlob {
  Digest digest;
  std::string bytes;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  static ImageBlob from_raster(const Raster& raster);
};

}  // namespace sakugaflow
