#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freqdoc/encoder.hpp"
#include "freqdoc/frequency_cube.hpp"

namespace freqdoc::cli {

enum class ExitCode : int { kOk = 0, kValidation = 1, kPartial = 2 };

enum class InputMode { kDct, kRgbFlatten };
std::string_view to_string(InputMode m);
InputMode parse_input_mode(std::string_view s);

/// Settings shared by every subcommand. Loaded from an INI-style file with
/// [pipeline], [encoder] and [dataset] sections; flags override.
struct RunConfig {
  int canvas_side = 2560;
  int quality = 50;
  CubeMode cube_mode = CubeMode::kDequantized;
  ChannelOrder channel_order = ChannelOrder::kZigzag;
  InputMode input_mode = InputMode::kDct;
  EncoderConfig encoder;
  std::uint64_t seed = 0;
  int workers = 1;
  int batch_size = 8;
  double perception_fraction = 0.5;

  /// Throws ValidationError.
  void validate() const;

  /// Sorted key=value pairs that determine outputs (worker count excluded).
  std::vector<std::pair<std::string, std::string>> canonical() const;
};

/// Throws ValidationError for unknown sections/keys or bad values.
RunConfig parse_config(std::string_view ini_text);
RunConfig load_config(const std::filesystem::path& path);

/// 16 hex digits over the canonical pairs plus any command-specific extras.
std::string config_hash(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& extra = {});

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv);

/// Convenience for tests: args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace freqdoc::cli
