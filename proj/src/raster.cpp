#include "sakugaflow/raster.hpp"

#include <png.h>

#include <cstring>

#include "sakugaflow/errors.hpp"
#include "sakugaflow/kernels.hpp"

namespace sakugaflow {

namespace {

std::string write_png(const std::uint8_t* pixels, std::uint32_t width, std::uint32_t height,
                      png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = format;

  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, pixels, 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::Internal, "png encode failed: " + msg);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::Internal, "png encode failed: " + msg);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> read_png(std::string_view bytes, png_uint_32 format,
                                   std::uint32_t& width, std::uint32_t& height) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (bytes.empty() ||
      !png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = bytes.empty() ? "empty input" : image.message;
    png_image_free(&image);
    throw Error(ErrorCode::UndecodableImage, "cannot decode image: " + msg);
  }
  if (image.width == 0 || image.height == 0 || image.width > kMaxImageEdge ||
      image.height > kMaxImageEdge) {
    png_image_free(&image);
    throw Error(ErrorCode::UndecodableImage, "image dimensions out of range");
  }
  image.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  // Composite any alpha onto black when the target has none.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&image, &background, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::UndecodableImage, "cannot decode image: " + msg);
  }
  width = image.width;
  height = image.height;
  return pixels;
}

}  // namespace

std::string encode_png(const Raster& raster) {
  return write_png(raster.rgba.data(), raster.width, raster.height, PNG_FORMAT_RGBA);
}

Raster decode_png(std::string_view bytes) {
  Raster out;
  out.rgba = read_png(bytes, PNG_FORMAT_RGBA, out.width, out.height);
  return out;
}

Raster scale_to(const Raster& src, Canvas canvas) {
  if (src.size() == canvas) return src;
  Raster out(canvas.width, canvas.height);
  kernels::scale_nearest(src.rgba, src.width, src.height, out.rgba, canvas.width, canvas.height);
  return out;
}

MaskRegion::MaskRegion(std::uint32_t width, std::uint32_t height)
    : width_(width), height_(height), bits_((std::size_t{width} * height + 7) / 8, 0) {}

MaskRegion MaskRegion::rectangle(Canvas canvas, std::uint32_t x, std::uint32_t y,
                                 std::uint32_t w, std::uint32_t h) {
  MaskRegion m(canvas.width, canvas.height);
  for (std::uint32_t yy = y; yy < y + h && yy < canvas.height; ++yy)
    for (std::uint32_t xx = x; xx < x + w && xx < canvas.width; ++xx) m.set(xx, yy);
  return m;
}

MaskRegion MaskRegion::decode_png(std::string_view bytes) {
  std::uint32_t w = 0, h = 0;
  auto gray = read_png(bytes, PNG_FORMAT_GRAY, w, h);
  MaskRegion m(w, h);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x)
      if (gray[std::size_t{y} * w + x] >= 128) m.set(x, y);
  return m;
}

bool MaskRegion::test(std::uint32_t x, std::uint32_t y) const {
  std::size_t i = std::size_t{y} * width_ + x;
  return (bits_[i / 8] >> (7 - i % 8)) & 1;
}

void MaskRegion::set(std::uint32_t x, std::uint32_t y, bool on) {
  std::size_t i = std::size_t{y} * width_ + x;
  auto bit = static_cast<std::uint8_t>(1u << (7 - i % 8));
  if (on)
    bits_[i / 8] |= bit;
  else
    bits_[i / 8] &= static_cast<std::uint8_t>(~bit);
}

std::size_t MaskRegion::count() const {
  std::size_t n = 0;
  for (auto b : bits_) n += static_cast<std::size_t>(__builtin_popcount(b));
  return n;
}

std::vector<std::uint8_t> MaskRegion::to_bytes() const {
  std::vector<std::uint8_t> out(std::size_t{width_} * height_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (bits_[i / 8] >> (7 - i % 8)) & 1;
  return out;
}

std::string MaskRegion::encode_png() const {
  auto bytes = to_bytes();
  for (auto& b : bytes) b = b ? 255 : 0;
  return write_png(bytes.data(), width_, height_, PNG_FORMAT_GRAY);
}

ImageBlob ImageBlob::from_raster(const Raster& raster) {
  ImageBlob blob;
  blob.bytes = encode_png(raster);
  blob.digest = Digest::of(blob.bytes);
  blob.width = raster.width;
  blob.height = raster.height;
  return blob;
}

}  // namespace sakugaflow
