#pragma once

// Independent reference implementations used only by tests.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "freqdoc/encoder.hpp"

namespace oracle {

// Direct quadruple-sum DCT-II with the level shift, in long double.
inline std::array<double, 64> naive_dct(const std::array<double, 64>& pixels) {
  std::array<double, 64> out{};
  const long double pi = std::numbers::pi_v<long double>;
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      const long double au = u == 0 ? 1.0L / std::sqrt(2.0L) : 1.0L;
      const long double av = v == 0 ? 1.0L / std::sqrt(2.0L) : 1.0L;
      long double sum = 0.0L;
      for (int m = 0; m < 8; ++m) {
        for (int n = 0; n < 8; ++n) {
          sum += (pixels[m * 8 + n] - 128.0L) * std::cos(pi * (2 * m + 1) * u / 16.0L) *
                 std::cos(pi * (2 * n + 1) * v / 16.0L);
        }
      }
      out[u * 8 + v] = static_cast<double>(au * av / 4.0L * sum);
    }
  }
  return out;
}

// Zigzag by walking anti-diagonals, alternating direction.
inline std::array<int, 64> zigzag_walk() {
  std::array<int, 64> out{};
  int k = 0;
  for (int s = 0; s < 15; ++s) {
    if (s % 2 == 0) {
      for (int r = std::min(s, 7); r >= std::max(0, s - 7); --r) out[k++] = r * 8 + (s - r);
    } else {
      for (int r = std::max(0, s - 7); r <= std::min(s, 7); ++r) out[k++] = r * 8 + (s - r);
    }
  }
  return out;
}

inline std::array<double, 64> random_block(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(0.0, 255.0);
  std::array<double, 64> b{};
  for (double& v : b) v = dist(gen);
  return b;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("freqdoc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// -- reference backbone, plain loops over a token-major grid --

using Tokens = std::vector<std::vector<double>>;  // N x C
using freqdoc::Matrix;

inline Tokens layer_norm(const Tokens& x, const Matrix<double>& g, const Matrix<double>& b) {
  Tokens out = x;
  for (auto& row : out) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= row.size();
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= row.size();
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean) * inv * g(0, c) + b(0, c);
  }
  return out;
}

inline Tokens linear(const Tokens& x, const Matrix<double>& w, const Matrix<double>* b) {
  Tokens out(x.size(), std::vector<double>(w.rows(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int o = 0; o < w.rows(); ++o) {
      double s = b ? (*b)(0, o) : 0.0;
      for (int c = 0; c < w.cols(); ++c) s += w(o, c) * x[i][c];
      out[i][o] = s;
    }
  }
  return out;
}

inline int region(int coord, int side, int w, int s) {
  if (s == 0) return 0;
  if (coord < side - w) return 0;
  if (coord < side - s) return 1;
  return 2;
}

// Swin block: roll by -shift, partition, masked attention, reverse roll.
inline void block(Tokens& x, int side, const freqdoc::ParamSet<double>& p, const std::string& pre, int heads,
                  int cfg_window, int w, int s) {
  const int c = static_cast<int>(x[0].size());
  const int d = c / heads;
  const Tokens a = layer_norm(x, p[pre + "norm1.weight"], p[pre + "norm1.bias"]);
  Tokens rolled(a.size());
  for (int h = 0; h < side; ++h) {
    for (int v = 0; v < side; ++v) rolled[h * side + v] = a[((h + s) % side) * side + (v + s) % side];
  }
  const Tokens qkv = linear(rolled, p[pre + "attn.qkv.weight"], &p[pre + "attn.qkv.bias"]);
  const auto& table = p[pre + "attn.rel_pos_bias"];
  Tokens attn(rolled.size(), std::vector<double>(c, 0.0));
  const int span = 2 * cfg_window - 1;
  for (int wy = 0; wy < side / w; ++wy) {
    for (int wx = 0; wx < side / w; ++wx) {
      std::vector<int> pos;
      std::vector<int> label;
      std::vector<std::pair<int, int>> local;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) {
          const int h = wy * w + i;
          const int v = wx * w + j;
          pos.push_back(h * side + v);
          label.push_back(region(h, side, w, s) * 3 + region(v, side, w, s));
          local.push_back({i, j});
        }
      }
      const int m = w * w;
      for (int hd = 0; hd < heads; ++hd) {
        for (int qi = 0; qi < m; ++qi) {
          std::vector<double> score(m, -std::numeric_limits<double>::infinity());
          double mx = -std::numeric_limits<double>::infinity();
          for (int ki = 0; ki < m; ++ki) {
            if (label[qi] != label[ki]) continue;
            double dot = 0.0;
            for (int e = 0; e < d; ++e) dot += qkv[pos[qi]][hd * d + e] * qkv[pos[ki]][c + hd * d + e];
            const int idx = (local[qi].first - local[ki].first + cfg_window - 1) * span +
                            (local[qi].second - local[ki].second + cfg_window - 1);
            score[ki] = dot / std::sqrt(static_cast<double>(d)) + table(idx, hd);
            mx = std::max(mx, score[ki]);
          }
          double z = 0.0;
          for (int ki = 0; ki < m; ++ki) {
            score[ki] = label[qi] == label[ki] ? std::exp(score[ki] - mx) : 0.0;
            z += score[ki];
          }
          for (int ki = 0; ki < m; ++ki) {
            for (int e = 0; e < d; ++e) attn[pos[qi]][hd * d + e] += score[ki] / z * qkv[pos[ki]][2 * c + hd * d + e];
          }
        }
      }
    }
  }
  const Tokens proj = linear(attn, p[pre + "attn.proj.weight"], &p[pre + "attn.proj.bias"]);
  for (int h = 0; h < side; ++h) {
    for (int v = 0; v < side; ++v) {
      auto& dst = x[((h + s) % side) * side + (v + s) % side];
      for (int e = 0; e < c; ++e) dst[e] += proj[h * side + v][e];
    }
  }
  const Tokens a2 = layer_norm(x, p[pre + "norm2.weight"], p[pre + "norm2.bias"]);
  Tokens hidden = linear(a2, p[pre + "mlp.fc1.weight"], &p[pre + "mlp.fc1.bias"]);
  for (auto& row : hidden) {
    for (double& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  }
  const Tokens mlp = linear(hidden, p[pre + "mlp.fc2.weight"], &p[pre + "mlp.fc2.bias"]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int e = 0; e < c; ++e) x[i][e] += mlp[i][e];
  }
}

inline Tokens encoder(const Matrix<double>& input, int side, const freqdoc::ParamSet<double>& p,
                      const freqdoc::EncoderConfig& cfg) {
  Tokens x(static_cast<std::size_t>(side) * side, std::vector<double>(input.rows()));
  for (int c = 0; c < input.rows(); ++c) {
    for (int i = 0; i < side * side; ++i) x[i][c] = input(c, i);
  }
  int grid = side;
  for (int st = 0; st < 4; ++st) {
    for (int b = 0; b < cfg.depths[st]; ++b) {
      int w = cfg.window;
      int s = b % 2 ? w / 2 : 0;
      if (grid <= cfg.window) {
        w = grid;
        s = 0;
      } else {
        while (grid % w) --w;
        s = b % 2 ? w / 2 : 0;
      }
      block(x, grid, p, "stages." + std::to_string(st) + ".blocks." + std::to_string(b) + ".", cfg.heads[st],
            cfg.window, w, s);
    }
    if (st < 3) {
      const int half = grid / 2;
      const std::size_t c = x[0].size();
      Tokens merged(static_cast<std::size_t>(half) * half);
      for (int i = 0; i < half; ++i) {
        for (int j = 0; j < half; ++j) {
          auto& row = merged[i * half + j];
          for (auto [di, dj] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}}) {
            const auto& src = x[(2 * i + di) * grid + 2 * j + dj];
            row.insert(row.end(), src.begin(), src.begin() + c);
          }
        }
      }
      const std::string pre = "stages." + std::to_string(st) + ".downsample.";
      x = linear(layer_norm(merged, p[pre + "norm.weight"], p[pre + "norm.bias"]), p[pre + "reduction.weight"],
                 nullptr);
      grid = half;
    }
  }
  return layer_norm(x, p["norm.weight"], p["norm.bias"]);
}

}  // namespace oracle
