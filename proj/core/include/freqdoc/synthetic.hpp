#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "freqdoc/image.hpp"

namespace freqdoc {

/// Seeded page-like test image: white background, rows of dark anti-aliased
/// glyph strokes, a tinted header band and a colored figure block.
RgbImage synthetic_document(int width, int height, std::uint64_t seed);

/// Seeded annotation JSONL lines with words in text rows, plus paragraphs,
/// qa pairs and captions on a subset.
std::vector<std::string> synthetic_annotations(std::size_t count, std::uint64_t seed);

}  // namespace freqdoc
