#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "freqdoc/error.hpp"
#include "freqdoc/tensor.hpp"

namespace freqdoc {

namespace {

static_assert(std::endian::native == std::endian::little, "FQC1 I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_fqc(const Tensor& t) {
  if (t.data.size() != Tensor::element_count(t.dims)) {
    throw ValidationError("tensor data size does not match its dims");
  }
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * t.dims.size() + 4 * t.data.size());
  out.insert(out.end(), {'F', 'Q', 'C', '1', kFqcVersion, kFqcDtypeF32, 0, 0});
  put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) {
    put_u32(out, d);
  }
  const std::size_t header = out.size();
  out.resize(header + 4 * t.data.size());
  std::memcpy(out.data() + header, t.data.data(), 4 * t.data.size());
  return out;
}

Tensor decode_fqc(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) {
    throw FormatError("FQC1: truncated header");
  }
  if (std::memcmp(bytes.data(), "FQC1", 4) != 0) {
    throw FormatError("FQC1: bad magic");
  }
  if (bytes[4] != kFqcVersion) {
    throw FormatError("FQC1: unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes[5] != kFqcDtypeF32) {
    throw FormatError("FQC1: unsupported dtype " + std::to_string(bytes[5]));
  }
  const std::uint32_t ndim = get_u32(bytes, 8);
  if (bytes.size() < 12 + 4ULL * ndim) {
    throw FormatError("FQC1: truncated dims");
  }
  Tensor t;
  const std::size_t header = 12 + 4ULL * ndim;
  const std::size_t available = (bytes.size() - header) / 4;
  t.dims.resize(ndim);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.dims[i] = get_u32(bytes, 12 + 4 * i);
    if (t.dims[i] != 0 && count > available / t.dims[i] + 1) {
      throw FormatError("FQC1: header declares more elements than the payload holds");
    }
    count *= t.dims[i];
  }
  if ((bytes.size() - header) % 4 != 0 || count != available) {
    throw FormatError("FQC1: payload length does not match dims");
  }
  t.data.resize(count);
  std::memcpy(t.data.data(), bytes.data() + header, 4 * t.data.size());
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_fqc(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_fqc(bytes);
}

}  // namespace freqdoc
