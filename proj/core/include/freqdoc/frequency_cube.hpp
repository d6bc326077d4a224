#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "freqdoc/dct.hpp"
#include "freqdoc/image.hpp"
#include "freqdoc/tensor.hpp"

namespace freqdoc {

inline constexpr int kCoeffsPerPlane = 64;
inline constexpr int kCubeChannels = 3 * kCoeffsPerPlane;

enum class CubeMode { kRaw, kQuantized, kDequantized };
enum class ChannelOrder { kZigzag, kRowMajor };

std::string_view to_string(CubeMode m);
std::string_view to_string(ChannelOrder o);
/// Throws ValidationError for unknown names.
CubeMode parse_cube_mode(std::string_view s);
ChannelOrder parse_channel_order(std::string_view s);

/// 192 x side x side coefficient volume. Channels 0-63 Y, 64-127 Cb
/// (upsampled to 1/8 scale), 128-191 Cr.
struct FrequencyCube {
  Tensor tensor;  // dims {192, side, side}
  CubeMode mode = CubeMode::kDequantized;
  ChannelOrder order = ChannelOrder::kZigzag;

  int side() const { return static_cast<int>(tensor.dims.at(1)); }
  float at(int c, int y, int x) const {
    return tensor.data[(static_cast<std::size_t>(c) * side() + y) * side() + x];
  }
};

/// Channel k of a plane -> natural coefficient index under `order`.
int coefficient_index(ChannelOrder order, int channel);

/// Tiles the 4:2:0 planes into 8x8 blocks, transforms (and quantizes per mode),
/// upsamples the 1/16-scale chroma volumes bilinearly to 1/8 scale and stacks
/// Y, Cb, Cr along channels. Throws ValidationError on dimension mismatch.
FrequencyCube extract_frequency_cube(const YcbcrPlanes& planes, const QuantTables& tables, CubeMode mode,
                                     ChannelOrder order = ChannelOrder::kZigzag);

/// Convenience: canvas -> YCbCr -> 4:2:0 -> cube.
FrequencyCube canvas_to_cube(const RgbImage& canvas, const QuantTables& tables, CubeMode mode,
                             ChannelOrder order = ChannelOrder::kZigzag);

/// RGB-flattening baseline: each 8x8x3 patch unfolded (pixel-major, RGB
/// interleaved) into 192 values scaled by 1/255. Same shape as the DCT cube.
Tensor rgb_flatten_cube(const RgbImage& canvas);

/// 1x1 channel projection from the 192-channel cube to the backbone width.
struct AdapterWeights {
  int out_dim = 0;                 // D
  std::vector<float> projection;   // D x 192, row-major
  std::vector<float> bias;         // D

  /// Truncated-normal(0.02) projection, zero bias.
  static AdapterWeights init(int out_dim, std::uint64_t seed);
};

/// out[d][y][x] = sum_c projection[d][c] * in[c][y][x] + bias[d].
/// Input is any {C, S, S} tensor with C matching the projection width.
Tensor adapter_project(const Tensor& cube, const AdapterWeights& w);

/// Per-channel standardization statistics (off by default in the pipeline).
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Statistics over every spatial cell of every cube in the calibration set.
ChannelStats compute_channel_stats(std::span<const Tensor> cubes);
/// (x - mean) / stddev per channel; channels with zero spread are only centered.
Tensor standardize(const Tensor& cube, const ChannelStats& stats);

/// Inverse pipeline for inspection: IDCT of Y; chroma volumes are reduced
/// back to 1/16 scale by 2x2 averaging before IDCT; planes are returned at
/// Y full resolution and chroma half resolution.
/// Quantized-integer cubes need `tables` to restore coefficient scale.
YcbcrPlanes reconstruct_planes(const FrequencyCube& cube, const std::optional<QuantTables>& tables);

/// reconstruct_planes followed by bilinear chroma upsampling and YCbCr->RGB.
RgbImage reconstruct_canvas(const FrequencyCube& cube, const std::optional<QuantTables>& tables);

}  // namespace freqdoc
