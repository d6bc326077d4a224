#include "freqdoc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "freqdoc/error.hpp"

namespace freqdoc {

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 8 || height < 8) {
    throw ValidationError("image must be at least 8x8, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ValidationError("image buffer size does not match width*height*3");
  }
}

RgbImage::RgbImage(int width, int height, std::array<std::uint8_t, 3> fill)
    : RgbImage(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                                            std::max(height, 0) * 3)) {
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill[0];
    data_[i + 1] = fill[1];
    data_[i + 2] = fill[2];
  }
}

namespace {

int round_to_even(double v) { return 2 * static_cast<int>(std::lround(v / 2.0)); }

struct AxisTap {
  int i0;
  int i1;
  double w1;
};

// Half-pixel-center source taps for one output axis.
std::vector<AxisTap> axis_taps(int in_size, int out_size) {
  std::vector<AxisTap> taps(out_size);
  const double ratio = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double s = (o + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in_size - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

CanvasTransform make_canvas_transform(int orig_width, int orig_height, int target_side, std::uint8_t fill) {
  if (target_side <= 0 || target_side % 16 != 0) {
    throw ValidationError("target_side must be a positive multiple of 16");
  }
  if (orig_width <= 0 || orig_height <= 0) {
    throw ValidationError("image dimensions must be positive");
  }
  CanvasTransform t;
  t.orig_width = orig_width;
  t.orig_height = orig_height;
  t.target_side = target_side;
  t.fill_value = fill;
  t.scale = static_cast<double>(target_side) / std::max(orig_width, orig_height);
  if (orig_width >= orig_height) {
    t.content_width = target_side;
    t.content_height = orig_width == orig_height ? target_side
                                                 : std::clamp(round_to_even(orig_height * t.scale), 2, target_side);
  } else {
    t.content_height = target_side;
    t.content_width = std::clamp(round_to_even(orig_width * t.scale), 2, target_side);
  }
  t.pad_right = target_side - t.content_width;
  t.pad_bottom = target_side - t.content_height;
  return t;
}

CanvasResult resize_and_pad(const RgbImage& img, int target_side, std::uint8_t fill) {
  const CanvasTransform t = make_canvas_transform(img.width(), img.height(), target_side, fill);
  RgbImage canvas(target_side, target_side, std::array<std::uint8_t, 3>{fill, fill, fill});

  if (t.content_width == img.width() && t.content_height == img.height()) {
    for (int y = 0; y < img.height(); ++y) {
      std::copy_n(img.pixel(0, y), static_cast<std::size_t>(img.width()) * 3, canvas.pixel(0, y));
    }
    return {std::move(canvas), t};
  }

  const auto xs = axis_taps(img.width(), t.content_width);
  const auto ys = axis_taps(img.height(), t.content_height);
  for (int y = 0; y < t.content_height; ++y) {
    const AxisTap& ty = ys[y];
    for (int x = 0; x < t.content_width; ++x) {
      const AxisTap& tx = xs[x];
      const std::uint8_t* p00 = img.pixel(tx.i0, ty.i0);
      const std::uint8_t* p01 = img.pixel(tx.i1, ty.i0);
      const std::uint8_t* p10 = img.pixel(tx.i0, ty.i1);
      const std::uint8_t* p11 = img.pixel(tx.i1, ty.i1);
      std::uint8_t* out = canvas.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] + (p01[c] - p00[c]) * tx.w1;
        const double bottom = p10[c] + (p11[c] - p10[c]) * tx.w1;
        const double v = top + (bottom - top) * ty.w1;
        out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return {std::move(canvas), t};
}

NormBox map_box(const std::array<double, 4>& box, const CanvasTransform& t) {
  const auto [x1, y1, x2, y2] = box;
  if (!(x1 < x2) || !(y1 < y2)) {
    throw ValidationError("degenerate box");
  }
  if (x1 < 0 || y1 < 0 || x2 > t.orig_width || y2 > t.orig_height) {
    throw ValidationError("box outside image bounds");
  }
  NormBox out;
  for (int i = 0; i < 4; ++i) {
    const double v = std::clamp(box[i] * t.scale / t.target_side, 0.0, 1.0);
    out.coords[i] = std::round(v * 1000.0) / 1000.0;
  }
  return out;
}

std::string format_box(const NormBox& box) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "[%.3f,%.3f,%.3f,%.3f]", box.coords[0], box.coords[1], box.coords[2],
                box.coords[3]);
  return buf;
}

YcbcrPlanes rgb_to_ycbcr(const RgbImage& img) {
  if (img.width() % 16 != 0 || img.height() % 16 != 0) {
    throw ValidationError("colorspace conversion expects canvas dimensions that are multiples of 16");
  }
  YcbcrPlanes p{Plane(img.width(), img.height()), Plane(img.width(), img.height()),
                Plane(img.width(), img.height())};
  const auto src = img.data();
  for (std::size_t i = 0, n = p.y.data.size(); i < n; ++i) {
    const float r = src[3 * i];
    const float g = src[3 * i + 1];
    const float b = src[3 * i + 2];
    p.y.data[i] = 0.299f * r + 0.587f * g + 0.114f * b;
    p.cb.data[i] = std::clamp(-0.168736f * r - 0.331264f * g + 0.5f * b + 128.0f, 0.0f, 255.0f);
    p.cr.data[i] = std::clamp(0.5f * r - 0.418688f * g - 0.081312f * b + 128.0f, 0.0f, 255.0f);
  }
  return p;
}

std::array<float, 3> ycbcr_to_rgb(float y, float cb, float cr) {
  const float db = cb - 128.0f;
  const float dr = cr - 128.0f;
  return {y + 1.402f * dr, y - 0.344136f * db - 0.714136f * dr, y + 1.772f * db};
}

namespace {

Plane average_2x2(const Plane& in) {
  Plane out(in.width / 2, in.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const float s = in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) +
                      in.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = s * 0.25f;
    }
  }
  return out;
}

}  // namespace

YcbcrPlanes subsample_chroma(const YcbcrPlanes& planes) {
  if (planes.cb.width % 2 != 0 || planes.cb.height % 2 != 0) {
    throw ValidationError("chroma subsampling needs even plane dimensions");
  }
  return {planes.y, average_2x2(planes.cb), average_2x2(planes.cr)};
}

Plane resize_plane_bilinear(const Plane& src, int out_width, int out_height) {
  Plane out(out_width, out_height);
  const auto xs = axis_taps(src.width, out_width);
  const auto ys = axis_taps(src.height, out_height);
  for (int y = 0; y < out_height; ++y) {
    const AxisTap& ty = ys[y];
    for (int x = 0; x < out_width; ++x) {
      const AxisTap& tx = xs[x];
      const double top = src.at(tx.i0, ty.i0) + (src.at(tx.i1, ty.i0) - src.at(tx.i0, ty.i0)) * tx.w1;
      const double bottom = src.at(tx.i0, ty.i1) + (src.at(tx.i1, ty.i1) - src.at(tx.i0, ty.i1)) * tx.w1;
      out.at(x, y) = static_cast<float>(top + (bottom - top) * ty.w1);
    }
  }
  return out;
}

}  // namespace freqdoc
