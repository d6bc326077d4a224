#include "freqdoc/dct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "freqdoc/error.hpp"

namespace freqdoc {

const std::array<int, 64> kZigzagToNatural = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,  12, 19, 26, 33, 40, 48,
    41, 34, 27, 20, 13, 6,  7,  14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23,
    30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
};

const IntBlock kAnnexKLuma = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

const IntBlock kAnnexKChroma = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,
};

namespace {

// basis[u][m] = (a_u / 2) cos(pi (2m+1) u / 16); X = B x B^T.
struct Basis {
  double b[8][8];

  Basis() {
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
      for (int m = 0; m < 8; ++m) {
        b[u][m] = 0.5 * a * std::cos(std::numbers::pi * (2 * m + 1) * u / 16.0);
      }
    }
  }
};

const Basis& basis() {
  static const Basis kBasis;
  return kBasis;
}

}  // namespace

DctBlock forward_dct_block(std::span<const double, 64> pixels) {
  const auto& B = basis().b;
  double tmp[8][8];  // tmp[u][n] = sum_m B[u][m] x[m][n]
  for (int u = 0; u < 8; ++u) {
    for (int n = 0; n < 8; ++n) {
      double s = 0.0;
      for (int m = 0; m < 8; ++m) {
        s += B[u][m] * (pixels[m * 8 + n] - 128.0);
      }
      tmp[u][n] = s;
    }
  }
  DctBlock out;
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) {
        s += tmp[u][n] * B[v][n];
      }
      out.at(u, v) = s;
    }
  }
  return out;
}

PixelBlock inverse_dct_block(const DctBlock& block) {
  const auto& B = basis().b;
  double tmp[8][8];  // tmp[m][v] = sum_u B[u][m] X[u][v]
  for (int m = 0; m < 8; ++m) {
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) {
        s += B[u][m] * block.at(u, v);
      }
      tmp[m][v] = s;
    }
  }
  PixelBlock out;
  for (int m = 0; m < 8; ++m) {
    for (int n = 0; n < 8; ++n) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) {
        s += tmp[m][v] * B[v][n];
      }
      out[m * 8 + n] = s + 128.0;
    }
  }
  return out;
}

QuantTables build_quant_tables(int quality) {
  if (quality < 1 || quality > 100) {
    throw ValidationError("quality must be in [1, 100], got " + std::to_string(quality));
  }
  const int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  auto scale = [s](const IntBlock& base) {
    IntBlock out;
    for (int i = 0; i < 64; ++i) {
      out[i] = std::clamp((base[i] * s + 50) / 100, 1, 255);
    }
    return out;
  };
  return {scale(kAnnexKLuma), scale(kAnnexKChroma), quality};
}

IntBlock quantize_block(const DctBlock& block, const IntBlock& table) {
  IntBlock q;
  for (int i = 0; i < 64; ++i) {
    // std::round rounds halves away from zero.
    q[i] = static_cast<int>(std::round(block.coeffs[i] / table[i]));
  }
  return q;
}

DctBlock dequantize_block(const IntBlock& q, const IntBlock& table) {
  DctBlock out;
  for (int i = 0; i < 64; ++i) {
    out.coeffs[i] = static_cast<double>(q[i]) * table[i];
  }
  return out;
}

}  // namespace freqdoc
