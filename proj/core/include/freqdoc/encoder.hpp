#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "freqdoc/tensor.hpp"

namespace freqdoc {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kNumStages = 4;

/// Hyperparameters of the hierarchical windowed-attention backbone. Stage s
/// runs at width embed_dim * 2^s; three patch mergings take the grid from S
/// to S/8, so tokens come out with dimension 8 * embed_dim.
struct EncoderConfig {
  int embed_dim = 128;
  std::array<int, kNumStages> depths{2, 2, 2, 2};
  std::array<int, kNumStages> heads{4, 8, 16, 32};
  int window = 8;
  double mlp_ratio = 4.0;
  int llm_dim = 32;
  std::uint64_t seed = 0;

  /// Throws ValidationError.
  void validate() const;

  int stage_dim(int stage) const { return embed_dim << stage; }
  int hidden_dim(int stage) const;
  int token_dim() const { return 8 * embed_dim; }
};

/// Window size and cyclic shift actually used on a stage grid. A grid no
/// larger than the window is attended as one unshifted window; otherwise the
/// window is the largest divisor of the grid side not exceeding the
/// configured window.
struct WindowGeometry {
  int window;
  int shift;
};
WindowGeometry window_geometry(int grid_side, int window, bool shifted_block);

template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;  // vectors are stored as 1 x n
};

/// Named, ordered parameter tensors.
template <typename T>
class ParamSet {
 public:
  void add(std::string name, Eigen::Index rows, Eigen::Index cols);

  Matrix<T>& operator[](std::string_view name);
  const Matrix<T>& operator[](std::string_view name) const;
  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

  std::vector<Param<T>>& items() { return items_; }
  const std::vector<Param<T>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& p : items_) {
      out.add(p.name, p.value.rows(), p.value.cols());
      out[p.name] = p.value.template cast<U>();
    }
    return out;
  }

 private:
  std::vector<Param<T>> items_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Parameter layout for a config: backbone blocks, patch mergings, final
/// norm and the linear projector to the language model width. Truncated
/// normal (std 0.02) weights, zero biases, unit norm gains. Deterministic in
/// cfg.seed.
ParamSet<double> init_params(const EncoderConfig& cfg);

/// Backbone forward. `input` is a {E, S*S} channel-major feature map (the
/// adapter output flattened over space) with S divisible by 8. Returns
/// (S/8)^2 x 8E tokens in row-major grid order.
template <typename T>
Matrix<T> encoder_forward(const Matrix<T>& input, int side, const ParamSet<T>& params, const EncoderConfig& cfg);

/// Linear projection of every token to cfg.llm_dim.
template <typename T>
Matrix<T> project_tokens(const Matrix<T>& tokens, const ParamSet<T>& params);

/// Visual rows first, then instruction rows.
template <typename T>
Matrix<T> concat_with_instruction(const Matrix<T>& visual, const Matrix<T>& instruction);

template <typename T>
struct EncoderGradients {
  Matrix<T> input;      // same shape as the forward input
  ParamSet<T> params;   // backbone entries filled; projector entries zero
};

/// Reverse-mode gradients of <upstream, encoder_forward(input)> with respect
/// to the input and every backbone parameter.
template <typename T>
EncoderGradients<T> encoder_backward(const Matrix<T>& input, int side, const ParamSet<T>& params,
                                     const EncoderConfig& cfg, const Matrix<T>& upstream);

template <typename T>
struct ProjectorGradients {
  Matrix<T> tokens;
  Matrix<T> weight;
  Matrix<T> bias;
};

template <typename T>
ProjectorGradients<T> project_tokens_backward(const Matrix<T>& tokens, const ParamSet<T>& params,
                                              const Matrix<T>& upstream);

/// Encoder output plus its projection into the language model space.
struct VisualTokens {
  int count = 0;
  int dim = 0;
  Matrix<float> data;
  Matrix<float> projected;
};

/// Float pipeline entry point: {E, S, S} adapter output -> tokens.
VisualTokens encode(const Tensor& feature_map, const ParamSet<float>& params, const EncoderConfig& cfg);

enum class TokenMode { kDct, kRgb };

/// Visual tokens produced for a square input of the given resolution:
/// (r/64)^2 for DCT input, (r/32)^2 for RGB input into a stock backbone.
/// Throws ValidationError if r is not divisible.
int token_count(int resolution, TokenMode mode);

/// Checkpoint: one FQC1 tensor per parameter plus an `index.txt` with one
/// "name<TAB>file" line per entry.
void save_params(const std::filesystem::path& dir, const ParamSet<float>& params);
ParamSet<float> load_params(const std::filesystem::path& dir);

/// Tensor {rows, cols} <-> Matrix conversions.
Tensor to_tensor(const Matrix<float>& m);
Matrix<float> to_matrix(const Tensor& t);

}  // namespace freqdoc
