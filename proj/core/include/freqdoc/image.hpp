#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace freqdoc {

/// Row-major 8-bit RGB image, 3 interleaved samples per pixel.
class RgbImage {
 public:
  /// Throws ValidationError unless width, height >= 8 and the buffer size matches.
  RgbImage(int width, int height, std::vector<std::uint8_t> data);
  RgbImage(int width, int height, std::array<std::uint8_t, 3> fill);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  const std::uint8_t* pixel(int x, int y) const { return &data_[(static_cast<std::size_t>(y) * width_ + x) * 3]; }
  std::uint8_t* pixel(int x, int y) { return &data_[(static_cast<std::size_t>(y) * width_ + x) * 3]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

/// Single-channel float plane, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Plane() = default;
  Plane(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Mapping from original image pixels onto the square training canvas.
struct CanvasTransform {
  int orig_width = 0;
  int orig_height = 0;
  int target_side = 0;
  double scale = 1.0;  // target_side / max(orig_width, orig_height)
  int content_width = 0;
  int content_height = 0;
  int pad_right = 0;
  int pad_bottom = 0;
  std::uint8_t fill_value = 255;
};

/// Computes the transform without touching pixels. Content sides follow the
/// resize rule: longest side = target_side, shorter side scaled and rounded to
/// the nearest even integer.
CanvasTransform make_canvas_transform(int orig_width, int orig_height, int target_side,
                                      std::uint8_t fill = 255);

struct CanvasResult {
  RgbImage canvas;
  CanvasTransform transform;
};

/// Aspect-preserving bilinear resize (half-pixel centers) into the top-left of
/// a target_side x target_side canvas, padding right/bottom with `fill`.
/// target_side must be a positive multiple of 16.
CanvasResult resize_and_pad(const RgbImage& img, int target_side, std::uint8_t fill = 255);

/// Normalized box on the canvas, each coordinate in [0, 1].
struct NormBox {
  std::array<double, 4> coords{};  // x1, y1, x2, y2
};

/// Pixel box in the original image -> canvas-normalized box rounded to 3
/// decimals. Throws ValidationError for degenerate or out-of-bounds boxes.
NormBox map_box(const std::array<double, 4>& box, const CanvasTransform& t);

/// "[x1,y1,x2,y2]" with exactly three decimals, no spaces.
std::string format_box(const NormBox& box);

/// Y at full resolution plus Cb/Cr planes (full or half resolution).
struct YcbcrPlanes {
  Plane y;
  Plane cb;
  Plane cr;
};

/// Full-range BT.601 (JFIF) conversion; chroma clamped to [0, 255].
/// Dimensions must be multiples of 16.
YcbcrPlanes rgb_to_ycbcr(const RgbImage& img);

/// Inverse JFIF conversion of a single sample triple, unclamped.
std::array<float, 3> ycbcr_to_rgb(float y, float cb, float cr);

/// 4:2:0 subsampling by 2x2 averaging of both chroma planes; Y untouched.
YcbcrPlanes subsample_chroma(const YcbcrPlanes& planes);

/// Bilinear resampling of a float plane to a new size (half-pixel centers,
/// edge clamped).
Plane resize_plane_bilinear(const Plane& src, int out_width, int out_height);

// -- file I/O --

/// Decodes PNG or baseline JPEG into 8-bit RGB; alpha is composited over
/// `fill`. Throws IoError if unreadable, FormatError if undecodable.
RgbImage load_image(const std::filesystem::path& path, std::uint8_t fill = 255);

/// Writes an 8-bit RGB PNG.
void save_png(const std::filesystem::path& path, const RgbImage& img);

/// Encodes to an in-memory baseline JPEG (4:2:0) at the given quality.
std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality);

/// Decodes an in-memory PNG or JPEG buffer.
RgbImage decode_image(std::span<const std::uint8_t> bytes, std::uint8_t fill = 255);

}  // namespace freqdoc
