#include "freqdoc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <nlohmann/json.hpp>

#include "freqdoc/rng.hpp"

namespace freqdoc {

namespace {

void fill_rect(std::vector<float>& lum, std::vector<std::array<float, 3>>& tint, int width, int x0, int y0, int x1,
               int y1, float value, std::array<float, 3> color) {
  const int height = static_cast<int>(lum.size()) / width;
  for (int y = std::max(0, y0); y < std::min(height, y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(width, x1); ++x) {
      lum[static_cast<std::size_t>(y) * width + x] = value;
      tint[static_cast<std::size_t>(y) * width + x] = color;
    }
  }
}

constexpr std::array<const char*, 24> kVocabulary{
    "invoice", "total",   "date",   "amount", "account", "summary", "report", "page",
    "table",   "figure",  "note",   "item",   "price",   "quantity", "name",  "address",
    "section", "results", "method", "data",   "value",   "number",  "order", "balance"};

}  // namespace

RgbImage synthetic_document(int width, int height, std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  const std::array<float, 3> white{255, 255, 255};
  std::vector<float> lum(static_cast<std::size_t>(width) * height, 1.0f);
  std::vector<std::array<float, 3>> tint(lum.size(), white);

  const int margin = std::max(2, width / 12);
  const int line_h = std::max(6, height / 40);
  const int glyph_w = std::max(3, line_h / 2);

  // header band
  const std::array<float, 3> header{40.0f + 60.0f * static_cast<float>(rng.uniform01()), 80, 150};
  fill_rect(lum, tint, width, 0, 0, width, line_h * 2, 0.0f, header);

  // figure block
  const int fig_x = width / 2 + static_cast<int>(rng.uniform_index(std::max(1, width / 6)));
  const int fig_y = height / 3;
  fill_rect(lum, tint, width, fig_x, fig_y, std::min(width - margin, fig_x + width / 4),
            fig_y + height / 6, 0.0f, {200, 120, 60});

  for (int y = line_h * 3; y + line_h < height - margin; y += line_h * 2) {
    int x = margin;
    const int right = (y >= fig_y - line_h && y <= fig_y + height / 6) ? fig_x - glyph_w : width - margin;
    while (x + glyph_w < right) {
      const int word_len = 2 + static_cast<int>(rng.uniform_index(7));
      for (int g = 0; g < word_len && x + glyph_w < right; ++g) {
        // a glyph is one or two vertical strokes and a horizontal bar
        const int strokes = 1 + static_cast<int>(rng.uniform_index(2));
        for (int s = 0; s < strokes; ++s) {
          const int sx = x + static_cast<int>(rng.uniform_index(glyph_w - 1));
          fill_rect(lum, tint, width, sx, y, sx + 1, y + line_h, 0.1f, {20, 20, 30});
        }
        const int by = y + static_cast<int>(rng.uniform_index(line_h));
        fill_rect(lum, tint, width, x, by, x + glyph_w - 1, by + 1, 0.1f, {20, 20, 30});
        x += glyph_w + 1;
      }
      x += glyph_w * 2;
    }
  }

  // 3x3 box blur stands in for anti-aliasing
  std::vector<std::uint8_t> data(lum.size() * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::array<float, 3> acc{0, 0, 0};
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = std::clamp(y + dy, 0, height - 1);
          const int xx = std::clamp(x + dx, 0, width - 1);
          const std::size_t i = static_cast<std::size_t>(yy) * width + xx;
          for (int c = 0; c < 3; ++c) acc[c] += lum[i] == 1.0f ? 255.0f : tint[i][c];
          ++n;
        }
      }
      for (int c = 0; c < 3; ++c) {
        data[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(acc[c] / n + 0.5f, 0.0f, 255.0f));
      }
    }
  }
  return RgbImage(width, height, std::move(data));
}

std::vector<std::string> synthetic_annotations(std::size_t count, std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x616e6e6fULL));
  std::vector<std::string> lines;
  lines.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int width = 400 + static_cast<int>(rng.uniform_index(1600));
    const int height = 400 + static_cast<int>(rng.uniform_index(1600));
    nlohmann::ordered_json j;
    j["id"] = "doc-" + std::to_string(i);
    j["image"] = "images/doc_" + std::to_string(i) + ".png";
    j["width"] = width;
    j["height"] = height;

    const int kind = static_cast<int>(rng.uniform_index(4));
    const int line_h = height / 30;
    nlohmann::ordered_json words = nlohmann::ordered_json::array();
    if (kind != 1) {
      const int rows = 1 + static_cast<int>(rng.uniform_index(5));
      for (int r = 0; r < rows; ++r) {
        int x = 20 + static_cast<int>(rng.uniform_index(40));
        const int y = 40 + r * line_h * 2 + static_cast<int>(rng.uniform_index(4));
        const int n = 1 + static_cast<int>(rng.uniform_index(5));
        for (int w = 0; w < n && x + 80 < width; ++w) {
          const int len = 30 + static_cast<int>(rng.uniform_index(50));
          words.push_back({{"text", kVocabulary[rng.uniform_index(kVocabulary.size())]},
                           {"box", {x, y, x + len, y + line_h}}});
          x += len + 10 + static_cast<int>(rng.uniform_index(20));
        }
      }
      j["words"] = words;
    }
    if (kind == 1 || kind == 2) {
      const int y = height / 2;
      j["paragraphs"] = {{{"text", "The quarterly summary lists every account balance."},
                          {"box", {30, y, width - 30, y + line_h * 3}}}};
    }
    if (kind == 3 || rng.uniform_index(3) == 0) {
      nlohmann::ordered_json qa = nlohmann::ordered_json::array();
      const int n = 1 + static_cast<int>(rng.uniform_index(3));
      for (int q = 0; q < n; ++q) {
        qa.push_back({{"question", "What is the value of item " + std::to_string(q + 1) + "?"},
                      {"answer", std::to_string(10 + rng.uniform_index(990))}});
      }
      j["qa"] = qa;
    }
    if (rng.uniform_index(2) == 0) j["caption"] = "A scanned business document with printed text.";
    lines.push_back(j.dump());
  }
  return lines;
}

}  // namespace freqdoc
