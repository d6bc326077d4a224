#pragma once

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <vector>

namespace freqdoc {

/// Dense row-major float32 tensor.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::uint32_t> d, float fill = 0.0f)
      : dims(std::move(d)), data(element_count(dims), fill) {}

  static std::size_t element_count(std::span<const std::uint32_t> d) {
    return std::accumulate(d.begin(), d.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t b) { return a * b; });
  }

  std::size_t size() const { return data.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// FQC1 layout (little-endian):
//   0..3  magic "FQC1"
//   4     version (1)
//   5     dtype (0 = float32)
//   6..7  reserved, zero
//   8..11 ndim (u32), then ndim x u32 dims, then the row-major payload.
inline constexpr std::uint8_t kFqcVersion = 1;
inline constexpr std::uint8_t kFqcDtypeF32 = 0;

std::vector<std::uint8_t> encode_fqc(const Tensor& t);
/// Throws FormatError on bad magic, version, dtype or truncation.
Tensor decode_fqc(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace freqdoc
