#include "freqdoc/frequency_cube.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "freqdoc/error.hpp"
#include "freqdoc/rng.hpp"

namespace freqdoc {

std::string_view to_string(CubeMode m) {
  switch (m) {
    case CubeMode::kRaw:
      return "raw";
    case CubeMode::kQuantized:
      return "quantized";
    case CubeMode::kDequantized:
      return "dequantized";
  }
  return "?";
}

std::string_view to_string(ChannelOrder o) { return o == ChannelOrder::kZigzag ? "zigzag" : "row_major"; }

CubeMode parse_cube_mode(std::string_view s) {
  if (s == "raw") return CubeMode::kRaw;
  if (s == "quantized") return CubeMode::kQuantized;
  if (s == "dequantized") return CubeMode::kDequantized;
  throw ValidationError("unknown cube mode '" + std::string(s) + "'");
}

ChannelOrder parse_channel_order(std::string_view s) {
  if (s == "zigzag") return ChannelOrder::kZigzag;
  if (s == "row_major") return ChannelOrder::kRowMajor;
  throw ValidationError("unknown channel order '" + std::string(s) + "'");
}

int coefficient_index(ChannelOrder order, int channel) {
  return order == ChannelOrder::kZigzag ? kZigzagToNatural[channel] : channel;
}

namespace {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One plane -> 64 coefficient planes at 1/8 scale.
std::vector<Plane> plane_coefficients(const Plane& plane, const IntBlock& table, CubeMode mode,
                                      ChannelOrder order) {
  const int gw = plane.width / 8;
  const int gh = plane.height / 8;
  std::vector<Plane> out(kCoeffsPerPlane, Plane(gw, gh));
  std::array<double, 64> pixels;
  for (int by = 0; by < gh; ++by) {
    for (int bx = 0; bx < gw; ++bx) {
      for (int m = 0; m < 8; ++m) {
        for (int n = 0; n < 8; ++n) {
          pixels[m * 8 + n] = plane.at(bx * 8 + n, by * 8 + m);
        }
      }
      DctBlock block = forward_dct_block(pixels);
      if (mode != CubeMode::kRaw) {
        const IntBlock q = quantize_block(block, table);
        if (mode == CubeMode::kQuantized) {
          for (int i = 0; i < 64; ++i) block.coeffs[i] = q[i];
        } else {
          block = dequantize_block(q, table);
        }
      }
      for (int k = 0; k < kCoeffsPerPlane; ++k) {
        out[k].at(bx, by) = static_cast<float>(block.coeffs[coefficient_index(order, k)]);
      }
    }
  }
  return out;
}

void copy_channel(Tensor& dst, int channel, const Plane& src) {
  std::copy(src.data.begin(), src.data.end(), dst.data.begin() + static_cast<std::ptrdiff_t>(channel) * src.data.size());
}

Plane channel_plane(const Tensor& t, int channel) {
  const int side = static_cast<int>(t.dims[1]);
  Plane p(side, side);
  const auto begin = t.data.begin() + static_cast<std::ptrdiff_t>(channel) * side * side;
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(side) * side, p.data.begin());
  return p;
}

Plane inverse_plane(const std::vector<Plane>& coeffs, const IntBlock* scale, ChannelOrder order) {
  const int gw = coeffs[0].width;
  const int gh = coeffs[0].height;
  Plane out(gw * 8, gh * 8);
  DctBlock block;
  for (int by = 0; by < gh; ++by) {
    for (int bx = 0; bx < gw; ++bx) {
      for (int k = 0; k < kCoeffsPerPlane; ++k) {
        const int idx = coefficient_index(order, k);
        block.coeffs[idx] = coeffs[k].at(bx, by) * (scale ? (*scale)[idx] : 1);
      }
      const PixelBlock px = inverse_dct_block(block);
      for (int m = 0; m < 8; ++m) {
        for (int n = 0; n < 8; ++n) {
          out.at(bx * 8 + n, by * 8 + m) = static_cast<float>(px[m * 8 + n]);
        }
      }
    }
  }
  return out;
}

}  // namespace

FrequencyCube extract_frequency_cube(const YcbcrPlanes& planes, const QuantTables& tables, CubeMode mode,
                                     ChannelOrder order) {
  const int h = planes.y.height;
  const int w = planes.y.width;
  if (h != w) {
    throw ValidationError("frequency cube expects a square canvas");
  }
  if (h % 16 != 0) {
    throw ValidationError("canvas side must be a multiple of 16 so chroma blocks tile exactly");
  }
  for (const Plane* c : {&planes.cb, &planes.cr}) {
    if (c->width * 2 != w || c->height * 2 != h) {
      throw ValidationError("chroma planes must be 4:2:0 subsampled relative to Y");
    }
  }
  const int side = w / 8;
  FrequencyCube cube{Tensor({kCubeChannels, static_cast<std::uint32_t>(side), static_cast<std::uint32_t>(side)}),
                     mode, order};

  const auto y = plane_coefficients(planes.y, tables.luma, mode, order);
  for (int k = 0; k < kCoeffsPerPlane; ++k) {
    copy_channel(cube.tensor, k, y[k]);
  }
  int base = kCoeffsPerPlane;
  for (const Plane* c : {&planes.cb, &planes.cr}) {
    const auto coeffs = plane_coefficients(*c, tables.chroma, mode, order);
    for (int k = 0; k < kCoeffsPerPlane; ++k) {
      copy_channel(cube.tensor, base + k, resize_plane_bilinear(coeffs[k], side, side));
    }
    base += kCoeffsPerPlane;
  }
  return cube;
}

FrequencyCube canvas_to_cube(const RgbImage& canvas, const QuantTables& tables, CubeMode mode, ChannelOrder order) {
  return extract_frequency_cube(subsample_chroma(rgb_to_ycbcr(canvas)), tables, mode, order);
}

Tensor rgb_flatten_cube(const RgbImage& canvas) {
  if (canvas.width() != canvas.height()) {
    throw ValidationError("rgb flattening expects a square canvas");
  }
  if (canvas.width() % 8 != 0) {
    throw ValidationError("rgb flattening expects a side that is a multiple of 8");
  }
  const int side = canvas.width() / 8;
  Tensor out({kCubeChannels, static_cast<std::uint32_t>(side), static_cast<std::uint32_t>(side)});
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  for (int by = 0; by < side; ++by) {
    for (int bx = 0; bx < side; ++bx) {
      const std::size_t cell = static_cast<std::size_t>(by) * side + bx;
      for (int py = 0; py < 8; ++py) {
        for (int px = 0; px < 8; ++px) {
          const std::uint8_t* p = canvas.pixel(bx * 8 + px, by * 8 + py);
          for (int c = 0; c < 3; ++c) {
            const int channel = (py * 8 + px) * 3 + c;
            out.data[channel * plane + cell] = p[c] / 255.0f;
          }
        }
      }
    }
  }
  return out;
}

AdapterWeights AdapterWeights::init(int out_dim, std::uint64_t seed) {
  if (out_dim < 1) {
    throw ValidationError("adapter output dimension must be >= 1");
  }
  AdapterWeights w;
  w.out_dim = out_dim;
  w.projection.resize(static_cast<std::size_t>(out_dim) * kCubeChannels);
  w.bias.assign(out_dim, 0.0f);
  Rng rng(splitmix64(seed ^ fnv1a("adapter")));
  for (auto& v : w.projection) {
    v = static_cast<float>(rng.truncated_normal(0.02));
  }
  return w;
}

Tensor adapter_project(const Tensor& cube, const AdapterWeights& w) {
  if (cube.dims.size() != 3) {
    throw ValidationError("adapter expects a {C, S, S} tensor");
  }
  const auto channels = static_cast<Eigen::Index>(cube.dims[0]);
  if (w.out_dim < 1 || w.projection.size() != static_cast<std::size_t>(w.out_dim) * channels ||
      w.bias.size() != static_cast<std::size_t>(w.out_dim)) {
    throw ValidationError("adapter weights do not match the cube's channel count");
  }
  const auto cells = static_cast<Eigen::Index>(cube.dims[1]) * cube.dims[2];
  Tensor out({static_cast<std::uint32_t>(w.out_dim), cube.dims[1], cube.dims[2]});
  Eigen::Map<const RowMatrixXf> x(cube.data.data(), channels, cells);
  Eigen::Map<const RowMatrixXf> p(w.projection.data(), w.out_dim, channels);
  Eigen::Map<const Eigen::VectorXf> b(w.bias.data(), w.out_dim);
  Eigen::Map<RowMatrixXf> y(out.data.data(), w.out_dim, cells);
  y.noalias() = p * x;
  y.colwise() += b;
  return out;
}

ChannelStats compute_channel_stats(std::span<const Tensor> cubes) {
  if (cubes.empty()) {
    throw ValidationError("channel statistics need at least one cube");
  }
  const std::size_t channels = cubes.front().dims.at(0);
  std::vector<double> sum(channels, 0.0);
  std::vector<double> sumsq(channels, 0.0);
  std::size_t count = 0;
  for (const Tensor& t : cubes) {
    if (t.dims.size() != 3 || t.dims[0] != channels) {
      throw ValidationError("calibration cubes must share a channel count");
    }
    const std::size_t cells = static_cast<std::size_t>(t.dims[1]) * t.dims[2];
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < cells; ++i) {
        const double v = t.data[c * cells + i];
        sum[c] += v;
        sumsq[c] += v * v;
      }
    }
    count += cells;
  }
  ChannelStats s{std::vector<double>(channels), std::vector<double>(channels)};
  for (std::size_t c = 0; c < channels; ++c) {
    s.mean[c] = sum[c] / count;
    s.stddev[c] = std::sqrt(std::max(0.0, sumsq[c] / count - s.mean[c] * s.mean[c]));
  }
  return s;
}

Tensor standardize(const Tensor& cube, const ChannelStats& stats) {
  if (cube.dims.size() != 3 || stats.mean.size() != cube.dims[0] || stats.stddev.size() != cube.dims[0]) {
    throw ValidationError("statistics do not match the cube's channel count");
  }
  Tensor out = cube;
  const std::size_t cells = static_cast<std::size_t>(cube.dims[1]) * cube.dims[2];
  for (std::size_t c = 0; c < cube.dims[0]; ++c) {
    const double sd = stats.stddev[c] > 0 ? stats.stddev[c] : 1.0;
    for (std::size_t i = 0; i < cells; ++i) {
      float& v = out.data[c * cells + i];
      v = static_cast<float>((v - stats.mean[c]) / sd);
    }
  }
  return out;
}

YcbcrPlanes reconstruct_planes(const FrequencyCube& cube, const std::optional<QuantTables>& tables) {
  const Tensor& t = cube.tensor;
  if (t.dims.size() != 3 || t.dims[0] != kCubeChannels || t.dims[1] != t.dims[2]) {
    throw ValidationError("reconstruction expects a {192, S, S} cube");
  }
  if (t.dims[1] % 2 != 0) {
    throw ValidationError("reconstruction expects an even cube side");
  }
  if (cube.mode == CubeMode::kQuantized && !tables) {
    throw ValidationError("quantized-integer cube cannot be reconstructed without quantization tables");
  }
  const bool rescale = cube.mode == CubeMode::kQuantized;
  const int side = cube.side();

  std::vector<Plane> coeffs;
  coeffs.reserve(kCoeffsPerPlane);
  for (int k = 0; k < kCoeffsPerPlane; ++k) {
    coeffs.push_back(channel_plane(t, k));
  }
  YcbcrPlanes out;
  out.y = inverse_plane(coeffs, rescale ? &tables->luma : nullptr, cube.order);

  for (int p = 1; p <= 2; ++p) {
    coeffs.clear();
    for (int k = 0; k < kCoeffsPerPlane; ++k) {
      const Plane up = channel_plane(t, p * kCoeffsPerPlane + k);
      Plane down(side / 2, side / 2);
      for (int y = 0; y < down.height; ++y) {
        for (int x = 0; x < down.width; ++x) {
          down.at(x, y) = 0.25f * (up.at(2 * x, 2 * y) + up.at(2 * x + 1, 2 * y) + up.at(2 * x, 2 * y + 1) +
                                   up.at(2 * x + 1, 2 * y + 1));
        }
      }
      coeffs.push_back(std::move(down));
    }
    Plane plane = inverse_plane(coeffs, rescale ? &tables->chroma : nullptr, cube.order);
    (p == 1 ? out.cb : out.cr) = std::move(plane);
  }
  return out;
}

RgbImage reconstruct_canvas(const FrequencyCube& cube, const std::optional<QuantTables>& tables) {
  const YcbcrPlanes planes = reconstruct_planes(cube, tables);
  const int w = planes.y.width;
  const int h = planes.y.height;
  const Plane cb = resize_plane_bilinear(planes.cb, w, h);
  const Plane cr = resize_plane_bilinear(planes.cr, w, h);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0, n = planes.y.data.size(); i < n; ++i) {
    const auto px = ycbcr_to_rgb(planes.y.data[i], cb.data[i], cr.data[i]);
    for (int c = 0; c < 3; ++c) {
      rgb[3 * i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(px[c]), 0L, 255L));
    }
  }
  return RgbImage(w, h, std::move(rgb));
}

}  // namespace freqdoc
