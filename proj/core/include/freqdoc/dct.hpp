#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace freqdoc {

/// 8x8 coefficients, row-major: index u*8 + v (u row frequency, v column).
struct DctBlock {
  std::array<double, 64> coeffs{};

  double& at(int u, int v) { return coeffs[u * 8 + v]; }
  double at(int u, int v) const { return coeffs[u * 8 + v]; }
};

using PixelBlock = std::array<double, 64>;
using IntBlock = std::array<int, 64>;

/// Zigzag position k -> natural (row-major) index.
extern const std::array<int, 64> kZigzagToNatural;

/// Level shift by -128 then orthonormal 8x8 DCT-II:
///   X[u][v] = (a_u a_v / 4) sum_{m,n} x[m][n] cos(pi(2m+1)u/16) cos(pi(2n+1)v/16)
/// with a_0 = 1/sqrt(2), a_i = 1 otherwise. Evaluated separably.
DctBlock forward_dct_block(std::span<const double, 64> pixels);

/// Exact inverse including the +128 restoration.
PixelBlock inverse_dct_block(const DctBlock& block);

/// ITU-T T.81 Annex K tables scaled with the libjpeg quality rule.
struct QuantTables {
  IntBlock luma{};
  IntBlock chroma{};
  int quality = 50;
};

/// Annex K base tables in natural order.
extern const IntBlock kAnnexKLuma;
extern const IntBlock kAnnexKChroma;

/// Throws ValidationError unless 1 <= quality <= 100.
QuantTables build_quant_tables(int quality);

/// q = round_half_away_from_zero(X / table).
IntBlock quantize_block(const DctBlock& block, const IntBlock& table);
DctBlock dequantize_block(const IntBlock& q, const IntBlock& table);

}  // namespace freqdoc
