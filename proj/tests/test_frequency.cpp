#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "freqdoc/error.hpp"
#include "freqdoc/frequency_cube.hpp"
#include "oracles.hpp"

using namespace freqdoc;

namespace {

RgbImage random_image(int side, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(side) * side * 3);
  for (auto& v : data) v = static_cast<std::uint8_t>(gen() & 0xff);
  return RgbImage(side, side, std::move(data));
}

// Smooth content so that chroma upsampling and quantization stay meaningful.
RgbImage gradient_image(int side) {
  std::vector<std::uint8_t> data(static_cast<std::size_t>(side) * side * 3);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      std::uint8_t* p = &data[(static_cast<std::size_t>(y) * side + x) * 3];
      p[0] = static_cast<std::uint8_t>(x * 255 / (side - 1));
      p[1] = static_cast<std::uint8_t>(y * 255 / (side - 1));
      p[2] = static_cast<std::uint8_t>(128 + 100 * std::sin(0.05 * (x + y)));
    }
  }
  return RgbImage(side, side, std::move(data));
}

double bilinear_oracle(const std::vector<double>& src, int n, int out, int x, int y) {
  auto coord = [&](int o) {
    const double s = (o + 0.5) * n / out - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(n - 1));
  };
  const double sx = coord(x);
  const double sy = coord(y);
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, n - 1);
  const int y1 = std::min(y0 + 1, n - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  auto at = [&](int xx, int yy) { return src[yy * n + xx]; };
  return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1 - fx) * at(x0, y1) + fx * at(x1, y1));
}

}  // namespace

TEST(Cube, Shapes) {
  const QuantTables t = build_quant_tables(50);
  for (auto [canvas, side] : {std::pair{2560, 320}, std::pair{1280, 160}, std::pair{64, 8}}) {
    const RgbImage img(canvas, canvas, std::array<std::uint8_t, 3>{10, 200, 30});
    const FrequencyCube cube = canvas_to_cube(img, t, CubeMode::kDequantized);
    EXPECT_EQ(cube.tensor.dims, (std::vector<std::uint32_t>{192, static_cast<std::uint32_t>(side),
                                                            static_cast<std::uint32_t>(side)}));
    EXPECT_EQ(cube.side(), side);
  }
}

TEST(Cube, MidGrayIsAllZero) {
  const RgbImage img(64, 64, std::array<std::uint8_t, 3>{128, 128, 128});
  for (CubeMode mode : {CubeMode::kRaw, CubeMode::kQuantized, CubeMode::kDequantized}) {
    const FrequencyCube cube = canvas_to_cube(img, build_quant_tables(50), mode);
    for (float v : cube.tensor.data) ASSERT_NEAR(v, 0.0f, 1e-4f);
  }
}

TEST(Cube, LumaChannelsAreBlockDctInZigzagOrder) {
  const RgbImage img = random_image(32, 21);
  const YcbcrPlanes planes = rgb_to_ycbcr(img);
  const FrequencyCube cube = canvas_to_cube(img, build_quant_tables(50), CubeMode::kRaw);
  const FrequencyCube rm = canvas_to_cube(img, build_quant_tables(50), CubeMode::kRaw, ChannelOrder::kRowMajor);
  const auto zz = oracle::zigzag_walk();
  for (int by = 0; by < 4; ++by) {
    for (int bx = 0; bx < 4; ++bx) {
      std::array<double, 64> px{};
      for (int m = 0; m < 8; ++m) {
        for (int n = 0; n < 8; ++n) px[m * 8 + n] = planes.y.at(bx * 8 + n, by * 8 + m);
      }
      const auto ref = oracle::naive_dct(px);
      for (int k = 0; k < 64; ++k) {
        EXPECT_NEAR(cube.at(k, by, bx), ref[zz[k]], 1e-3);
        EXPECT_NEAR(rm.at(k, by, bx), ref[k], 1e-3);
      }
    }
  }
}

TEST(Cube, ChromaIsBilinearUpsampleOfHalfScaleDct) {
  const RgbImage img = random_image(64, 22);
  const YcbcrPlanes sub = subsample_chroma(rgb_to_ycbcr(img));
  const FrequencyCube cube = canvas_to_cube(img, build_quant_tables(50), CubeMode::kRaw);
  const int n = 4;  // 32 / 8 chroma blocks per side
  const int side = 8;
  const auto zz = oracle::zigzag_walk();
  for (int p = 0; p < 2; ++p) {
    const Plane& chroma = p == 0 ? sub.cb : sub.cr;
    std::vector<std::array<double, 64>> blocks;
    for (int by = 0; by < n; ++by) {
      for (int bx = 0; bx < n; ++bx) {
        std::array<double, 64> px{};
        for (int m = 0; m < 8; ++m) {
          for (int q = 0; q < 8; ++q) px[m * 8 + q] = chroma.at(bx * 8 + q, by * 8 + m);
        }
        blocks.push_back(oracle::naive_dct(px));
      }
    }
    for (int k = 0; k < 64; ++k) {
      std::vector<double> grid(n * n);
      for (int i = 0; i < n * n; ++i) grid[i] = blocks[i][zz[k]];
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          EXPECT_NEAR(cube.at(64 + 64 * p + k, y, x), bilinear_oracle(grid, n, side, x, y), 1e-3);
        }
      }
    }
  }
}

TEST(Cube, QuantizedAndDequantizedModes) {
  const RgbImage img = random_image(32, 23);
  const QuantTables t = build_quant_tables(50);
  const FrequencyCube raw = canvas_to_cube(img, t, CubeMode::kRaw);
  const FrequencyCube q = canvas_to_cube(img, t, CubeMode::kQuantized);
  const FrequencyCube dq = canvas_to_cube(img, t, CubeMode::kDequantized);
  const auto zz = oracle::zigzag_walk();
  for (int k = 0; k < 64; ++k) {
    const int step = t.luma[zz[k]];
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const float qv = q.at(k, y, x);
        EXPECT_EQ(qv, std::round(qv));
        EXPECT_FLOAT_EQ(dq.at(k, y, x), qv * step);
        EXPECT_LE(std::abs(dq.at(k, y, x) - raw.at(k, y, x)), step / 2.0 + 1e-3);
      }
    }
  }
}

TEST(RgbFlatten, WhiteIsOne) {
  const Tensor t = rgb_flatten_cube(RgbImage(64, 64, std::array<std::uint8_t, 3>{255, 255, 255}));
  EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{192, 8, 8}));
  for (float v : t.data) ASSERT_EQ(v, 1.0f);
}

TEST(RgbFlatten, SinglePatchLayout) {
  const RgbImage img = random_image(8, 24);
  const Tensor t = rgb_flatten_cube(img);
  EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{192, 1, 1}));
  for (int py = 0; py < 8; ++py) {
    for (int px = 0; px < 8; ++px) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_FLOAT_EQ(t.data[(py * 8 + px) * 3 + c], img.pixel(px, py)[c] / 255.0f);
      }
    }
  }
}

TEST(RgbFlatten, ShapesMatchCube) {
  for (int canvas : {1920, 2560}) {
    const Tensor t = rgb_flatten_cube(RgbImage(canvas, canvas, std::array<std::uint8_t, 3>{1, 2, 3}));
    EXPECT_EQ(t.dims[0], 192u);
    EXPECT_EQ(t.dims[1], static_cast<std::uint32_t>(canvas / 8));
  }
}

TEST(Adapter, Examples) {
  AdapterWeights w;
  w.out_dim = 2;
  w.projection.assign(2 * 192, 0.0f);
  w.bias = {0.5f, -1.0f};
  for (int c = 0; c < 192; ++c) w.projection[c] = 1.0f;
  w.projection[192 + 3] = 2.0f;
  Tensor x({192, 2, 2}, 1.0f);
  const Tensor y = adapter_project(x, w);
  EXPECT_EQ(y.dims, (std::vector<std::uint32_t>{2, 2, 2}));
  for (int i = 0; i < 4; ++i) {
    EXPECT_FLOAT_EQ(y.data[i], 192.5f);
    EXPECT_FLOAT_EQ(y.data[4 + i], 1.0f);
  }
  Tensor zero({192, 2, 2}, 0.0f);
  const Tensor yz = adapter_project(zero, w);
  EXPECT_FLOAT_EQ(yz.data[0], 0.5f);
  EXPECT_FLOAT_EQ(yz.data[4], -1.0f);
}

TEST(Adapter, MatchesLoopOracleAndIsLinear) {
  const AdapterWeights w = AdapterWeights::init(16, 5);
  EXPECT_EQ(w.projection.size(), 16u * 192);
  for (float v : w.projection) EXPECT_LE(std::abs(v), 0.04f + 1e-6f);
  std::mt19937_64 gen(25);
  std::normal_distribution<float> dist;
  Tensor a({192, 3, 3});
  Tensor b({192, 3, 3});
  for (auto& v : a.data) v = dist(gen);
  for (auto& v : b.data) v = dist(gen);
  const Tensor ya = adapter_project(a, w);
  for (int d = 0; d < 16; ++d) {
    for (int i = 0; i < 9; ++i) {
      double s = w.bias[d];
      for (int c = 0; c < 192; ++c) s += static_cast<double>(w.projection[d * 192 + c]) * a.data[c * 9 + i];
      EXPECT_NEAR(ya.data[d * 9 + i], s, 1e-4);
    }
  }
  Tensor sum = a;
  for (std::size_t i = 0; i < sum.size(); ++i) sum.data[i] = 2.0f * a.data[i] + 3.0f * b.data[i];
  const Tensor yb = adapter_project(b, w);
  const Tensor ys = adapter_project(sum, w);
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(ys.data[i], 2.0f * ya.data[i] + 3.0f * yb.data[i], 1e-4);
}

TEST(Adapter, RejectsMismatch) {
  const AdapterWeights w = AdapterWeights::init(4, 1);
  EXPECT_THROW(adapter_project(Tensor({100, 2, 2}), w), ValidationError);
  EXPECT_THROW(AdapterWeights::init(0, 1), ValidationError);
}

TEST(Standardize, CentersAndScales) {
  Tensor a({192, 2, 2});
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] = static_cast<float>(i % 4);
  const std::vector<Tensor> set{a};
  const ChannelStats s = compute_channel_stats(set);
  EXPECT_DOUBLE_EQ(s.mean[0], 1.5);
  const Tensor z = standardize(a, s);
  double m = 0.0;
  for (int i = 0; i < 4; ++i) m += z.data[i];
  EXPECT_NEAR(m, 0.0, 1e-6);
}

TEST(Fqc, RoundTripAndErrors) {
  Tensor t({192, 3, 5});
  std::mt19937_64 gen(26);
  std::normal_distribution<float> dist;
  for (auto& v : t.data) v = dist(gen);
  const auto bytes = encode_fqc(t);
  EXPECT_EQ(bytes.size(), 12 + 3 * 4 + t.size() * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FQC1");
  EXPECT_TRUE(decode_fqc(bytes) == t);

  const auto dir = oracle::temp_dir("fqc");
  write_tensor(dir / "t.fqc", t);
  EXPECT_TRUE(read_tensor(dir / "t.fqc") == t);
  EXPECT_THROW(read_tensor(dir / "missing.fqc"), IoError);

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_fqc(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(decode_fqc(bad), FormatError);
  bad = bytes;
  bad[5] = 1;
  EXPECT_THROW(decode_fqc(bad), FormatError);
  bad.assign(bytes.begin(), bytes.end() - 4);
  EXPECT_THROW(decode_fqc(bad), FormatError);
  bad.assign(bytes.begin(), bytes.begin() + 6);
  EXPECT_THROW(decode_fqc(bad), FormatError);
}

TEST(Reconstruct, MidGrayCanvas) {
  const RgbImage img(64, 64, std::array<std::uint8_t, 3>{128, 128, 128});
  const FrequencyCube cube = canvas_to_cube(img, build_quant_tables(50), CubeMode::kDequantized);
  const RgbImage back = reconstruct_canvas(cube, std::nullopt);
  EXPECT_TRUE(back == img);
}

TEST(Reconstruct, RawLumaWithinOneLevel) {
  const RgbImage img = random_image(64, 27);
  const YcbcrPlanes ref = rgb_to_ycbcr(img);
  const FrequencyCube cube = canvas_to_cube(img, build_quant_tables(50), CubeMode::kRaw);
  const YcbcrPlanes back = reconstruct_planes(cube, std::nullopt);
  for (std::size_t i = 0; i < ref.y.data.size(); ++i) {
    ASSERT_LE(std::abs(std::round(back.y.data[i]) - std::round(ref.y.data[i])), 1.0f);
  }
}

TEST(Reconstruct, QuantizedNeedsTables) {
  const RgbImage img = gradient_image(64);
  const QuantTables t = build_quant_tables(50);
  const FrequencyCube q = canvas_to_cube(img, t, CubeMode::kQuantized);
  EXPECT_THROW(reconstruct_planes(q, std::nullopt), ValidationError);
  const FrequencyCube dq = canvas_to_cube(img, t, CubeMode::kDequantized);
  const YcbcrPlanes a = reconstruct_planes(q, t);
  const YcbcrPlanes b = reconstruct_planes(dq, std::nullopt);
  for (std::size_t i = 0; i < a.y.data.size(); ++i) ASSERT_NEAR(a.y.data[i], b.y.data[i], 1e-3);
}

TEST(Reconstruct, RowMajorCubeRoundTrips) {
  const RgbImage img = random_image(32, 28);
  const FrequencyCube cube =
      canvas_to_cube(img, build_quant_tables(50), CubeMode::kRaw, ChannelOrder::kRowMajor);
  const YcbcrPlanes back = reconstruct_planes(cube, std::nullopt);
  const YcbcrPlanes ref = rgb_to_ycbcr(img);
  for (std::size_t i = 0; i < ref.y.data.size(); ++i) ASSERT_NEAR(back.y.data[i], ref.y.data[i], 1e-2);
}

TEST(Cube, RejectsBadGeometry) {
  const QuantTables t = build_quant_tables(50);
  YcbcrPlanes p{Plane(32, 16), Plane(16, 8), Plane(16, 8)};
  EXPECT_THROW(extract_frequency_cube(p, t, CubeMode::kRaw), ValidationError);
  YcbcrPlanes full{Plane(32, 32), Plane(32, 32), Plane(32, 32)};
  EXPECT_THROW(extract_frequency_cube(full, t, CubeMode::kRaw), ValidationError);
  EXPECT_THROW(parse_cube_mode("jpeg"), ValidationError);
  EXPECT_THROW(parse_channel_order("snake"), ValidationError);
}
