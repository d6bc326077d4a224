#include "freqdoc/encoder.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "freqdoc/error.hpp"
#include "freqdoc/rng.hpp"

namespace freqdoc {

void EncoderConfig::validate() const {
  if (embed_dim < 1) throw ValidationError("embed_dim must be >= 1");
  if (window < 1) throw ValidationError("window must be >= 1");
  if (!(mlp_ratio > 0.0)) throw ValidationError("mlp_ratio must be positive");
  if (llm_dim < 1) throw ValidationError("llm_dim must be >= 1");
  for (int s = 0; s < kNumStages; ++s) {
    if (depths[s] < 1) throw ValidationError("every stage depth must be >= 1");
    if (heads[s] < 1) throw ValidationError("every stage needs at least one head");
    if (stage_dim(s) % heads[s] != 0) {
      throw ValidationError("stage " + std::to_string(s) + " width " + std::to_string(stage_dim(s)) +
                            " is not divisible by its head count " + std::to_string(heads[s]));
    }
  }
}

int EncoderConfig::hidden_dim(int stage) const {
  return std::max(1, static_cast<int>(std::lround(stage_dim(stage) * mlp_ratio)));
}

WindowGeometry window_geometry(int grid_side, int window, bool shifted_block) {
  if (grid_side <= window) {
    return {grid_side, 0};
  }
  int w = window;
  while (grid_side % w != 0) {
    --w;
  }
  return {w, shifted_block && w >= 2 ? w / 2 : 0};
}

// -- ParamSet --

template <typename T>
void ParamSet<T>::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (contains(name)) {
    throw ValidationError("duplicate parameter name " + name);
  }
  index_.emplace(name, items_.size());
  items_.push_back({std::move(name), Matrix<T>::Zero(rows, cols)});
}

template <typename T>
Matrix<T>& ParamSet<T>::operator[](std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter " + std::string(name));
  return items_[it->second].value;
}

template <typename T>
const Matrix<T>& ParamSet<T>::operator[](std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter " + std::string(name));
  return items_[it->second].value;
}

template <typename T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out;
  for (const auto& p : items_) out.add(p.name, p.value.rows(), p.value.cols());
  return out;
}

template class ParamSet<float>;
template class ParamSet<double>;

namespace {

enum class Init { kWeight, kZero, kOne };

struct ParamSpec {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  Init init;
};

std::string block_prefix(int s, int b) {
  return "stages." + std::to_string(s) + ".blocks." + std::to_string(b) + ".";
}

std::string merge_prefix(int s) { return "stages." + std::to_string(s) + ".downsample."; }

std::vector<ParamSpec> param_layout(const EncoderConfig& cfg) {
  std::vector<ParamSpec> specs;
  const int table_rows = (2 * cfg.window - 1) * (2 * cfg.window - 1);
  for (int s = 0; s < kNumStages; ++s) {
    const int c = cfg.stage_dim(s);
    const int h = cfg.hidden_dim(s);
    for (int b = 0; b < cfg.depths[s]; ++b) {
      const std::string pre = block_prefix(s, b);
      specs.push_back({pre + "norm1.weight", 1, c, Init::kOne});
      specs.push_back({pre + "norm1.bias", 1, c, Init::kZero});
      specs.push_back({pre + "attn.qkv.weight", 3 * c, c, Init::kWeight});
      specs.push_back({pre + "attn.qkv.bias", 1, 3 * c, Init::kZero});
      specs.push_back({pre + "attn.rel_pos_bias", table_rows, cfg.heads[s], Init::kWeight});
      specs.push_back({pre + "attn.proj.weight", c, c, Init::kWeight});
      specs.push_back({pre + "attn.proj.bias", 1, c, Init::kZero});
      specs.push_back({pre + "norm2.weight", 1, c, Init::kOne});
      specs.push_back({pre + "norm2.bias", 1, c, Init::kZero});
      specs.push_back({pre + "mlp.fc1.weight", h, c, Init::kWeight});
      specs.push_back({pre + "mlp.fc1.bias", 1, h, Init::kZero});
      specs.push_back({pre + "mlp.fc2.weight", c, h, Init::kWeight});
      specs.push_back({pre + "mlp.fc2.bias", 1, c, Init::kZero});
    }
    if (s + 1 < kNumStages) {
      const std::string pre = merge_prefix(s);
      specs.push_back({pre + "norm.weight", 1, 4 * c, Init::kOne});
      specs.push_back({pre + "norm.bias", 1, 4 * c, Init::kZero});
      specs.push_back({pre + "reduction.weight", 2 * c, 4 * c, Init::kWeight});
    }
  }
  specs.push_back({"norm.weight", 1, cfg.token_dim(), Init::kOne});
  specs.push_back({"norm.bias", 1, cfg.token_dim(), Init::kZero});
  specs.push_back({"projector.weight", cfg.llm_dim, cfg.token_dim(), Init::kWeight});
  specs.push_back({"projector.bias", 1, cfg.llm_dim, Init::kZero});
  return specs;
}

template <typename T>
void check_params(const ParamSet<T>& params, const EncoderConfig& cfg) {
  for (const auto& spec : param_layout(cfg)) {
    if (!params.contains(spec.name)) {
      throw ValidationError("parameter set is missing " + spec.name);
    }
    const auto& m = params[spec.name];
    if (m.rows() != spec.rows || m.cols() != spec.cols) {
      throw ValidationError("parameter " + spec.name + " has the wrong shape for this config");
    }
  }
}

constexpr double kLnEps = 1e-5;

template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct LnCache {
  Matrix<T> xhat;
  ColVec<T> rstd;
};

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& g, const Matrix<T>& b, LnCache<T>* cache) {
  const Eigen::Index n = x.rows();
  Matrix<T> y(n, x.cols());
  if (cache) {
    cache->xhat.resize(n, x.cols());
    cache->rstd.resize(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().mean();
    const T rstd = T(1) / std::sqrt(var + T(kLnEps));
    const auto xhat = ((x.row(i).array() - mu) * rstd).eval();
    y.row(i) = (xhat * g.row(0).array() + b.row(0).array()).matrix();
    if (cache) {
      cache->xhat.row(i) = xhat.matrix();
      cache->rstd(i) = rstd;
    }
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const LnCache<T>& cache, const Matrix<T>& g, Matrix<T>& dg,
                              Matrix<T>& db) {
  dg.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  Matrix<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const auto dxhat = (dy.row(i).array() * g.row(0).array()).eval();
    const auto xhat = cache.xhat.row(i).array();
    const T m1 = dxhat.mean();
    const T m2 = (dxhat * xhat).mean();
    dx.row(i) = (cache.rstd(i) * (dxhat - m1 - xhat * m2)).matrix();
  }
  return dx;
}

template <typename T>
Matrix<T> linear(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>* b) {
  Matrix<T> y(x.rows(), w.rows());
  y.noalias() = x * w.transpose();
  if (b) y.rowwise() += b->row(0);
  return y;
}

template <typename T>
Matrix<T> linear_backward(const Matrix<T>& dy, const Matrix<T>& x, const Matrix<T>& w, Matrix<T>& dw, Matrix<T>* db) {
  dw.noalias() += dy.transpose() * x;
  if (db) db->row(0) += dy.colwise().sum();
  Matrix<T> dx(dy.rows(), w.cols());
  dx.noalias() = dy * w;
  return dx;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

// Window partition of one stage grid. Position p of window k reads token
// source[k*M + p] of the unshifted grid; the cyclic shift is folded into
// this permutation.
struct WindowPlan {
  int side = 0;
  int window = 0;
  int shift = 0;
  int per_window = 0;  // M
  int num_windows = 0;
  std::vector<int> source;
  std::vector<int> region;          // shifted-window region label per position
  std::vector<std::uint8_t> mixed;  // window contains more than one region
  std::vector<int> rel_index;       // M*M entries into the bias table
};

WindowPlan build_plan(int side, int cfg_window, bool shifted) {
  const WindowGeometry geo = window_geometry(side, cfg_window, shifted);
  WindowPlan plan;
  plan.side = side;
  plan.window = geo.window;
  plan.shift = geo.shift;
  const int w = geo.window;
  const int s = geo.shift;
  const int per_side = side / w;
  plan.per_window = w * w;
  plan.num_windows = per_side * per_side;
  plan.source.resize(static_cast<std::size_t>(plan.num_windows) * plan.per_window);
  plan.region.resize(plan.source.size());
  plan.mixed.assign(plan.num_windows, 0);

  auto band = [&](int coord) { return coord < side - w ? 0 : (coord < side - s ? 1 : 2); };
  for (int wy = 0; wy < per_side; ++wy) {
    for (int wx = 0; wx < per_side; ++wx) {
      const int k = wy * per_side + wx;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) {
          const int hy = wy * w + i;
          const int hx = wx * w + j;
          const std::size_t pos = static_cast<std::size_t>(k) * plan.per_window + i * w + j;
          plan.source[pos] = ((hy + s) % side) * side + (hx + s) % side;
          plan.region[pos] = s > 0 ? band(hy) * 3 + band(hx) : 0;
          if (plan.region[pos] != plan.region[static_cast<std::size_t>(k) * plan.per_window]) {
            plan.mixed[k] = 1;
          }
        }
      }
    }
  }

  const int span = 2 * cfg_window - 1;
  plan.rel_index.resize(static_cast<std::size_t>(plan.per_window) * plan.per_window);
  for (int p = 0; p < plan.per_window; ++p) {
    for (int q = 0; q < plan.per_window; ++q) {
      const int dy = p / w - q / w + cfg_window - 1;
      const int dx = p % w - q % w + cfg_window - 1;
      plan.rel_index[static_cast<std::size_t>(p) * plan.per_window + q] = dy * span + dx;
    }
  }
  return plan;
}

template <typename T>
std::vector<Matrix<T>> head_biases(const WindowPlan& plan, const Matrix<T>& table, int heads) {
  const int m = plan.per_window;
  std::vector<Matrix<T>> out(heads, Matrix<T>(m, m));
  for (int h = 0; h < heads; ++h) {
    for (int p = 0; p < m; ++p) {
      for (int q = 0; q < m; ++q) {
        out[h](p, q) = table(plan.rel_index[static_cast<std::size_t>(p) * m + q], h);
      }
    }
  }
  return out;
}

template <typename T>
struct AttnCache {
  std::vector<Matrix<T>> probs;  // window * heads + head
};

template <typename T>
Matrix<T> window_attention(const Matrix<T>& qkv, const WindowPlan& plan, const Matrix<T>& table, int heads,
                           AttnCache<T>* cache) {
  const Eigen::Index c = qkv.cols() / 3;
  const Eigen::Index d = c / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  const int m = plan.per_window;
  const auto bias = head_biases(plan, table, heads);

  Matrix<T> out(qkv.rows(), c);
  Matrix<T> win(m, 3 * c);
  Matrix<T> scores(m, m);
  Matrix<T> o(m, d);
  if (cache) cache->probs.reserve(static_cast<std::size_t>(plan.num_windows) * heads);

  for (int k = 0; k < plan.num_windows; ++k) {
    const int* src = &plan.source[static_cast<std::size_t>(k) * m];
    const int* region = &plan.region[static_cast<std::size_t>(k) * m];
    for (int p = 0; p < m; ++p) win.row(p) = qkv.row(src[p]);
    for (int h = 0; h < heads; ++h) {
      scores.noalias() = win.middleCols(h * d, d) * win.middleCols(c + h * d, d).transpose();
      scores = scores * scale + bias[h];
      if (plan.mixed[k]) {
        for (int p = 0; p < m; ++p) {
          for (int q = 0; q < m; ++q) {
            if (region[p] != region[q]) scores(p, q) = -std::numeric_limits<T>::infinity();
          }
        }
      }
      for (int p = 0; p < m; ++p) {
        auto row = scores.row(p);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp().matrix();
        row /= row.sum();
      }
      o.noalias() = scores * win.middleCols(2 * c + h * d, d);
      for (int p = 0; p < m; ++p) out.row(src[p]).segment(h * d, d) = o.row(p);
      if (cache) cache->probs.push_back(scores);
    }
  }
  return out;
}

template <typename T>
Matrix<T> window_attention_backward(const Matrix<T>& d_out, const Matrix<T>& qkv, const WindowPlan& plan,
                                    int heads, const AttnCache<T>& cache, Matrix<T>& d_table) {
  const Eigen::Index c = qkv.cols() / 3;
  const Eigen::Index d = c / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  const int m = plan.per_window;

  Matrix<T> d_qkv(qkv.rows(), 3 * c);
  Matrix<T> win(m, 3 * c);
  Matrix<T> dwin(m, c);
  Matrix<T> dp(m, m);
  Matrix<T> dq(m, d), dk(m, d), dv(m, d);

  for (int k = 0; k < plan.num_windows; ++k) {
    const int* src = &plan.source[static_cast<std::size_t>(k) * m];
    for (int p = 0; p < m; ++p) {
      win.row(p) = qkv.row(src[p]);
      dwin.row(p) = d_out.row(src[p]);
    }
    for (int h = 0; h < heads; ++h) {
      const Matrix<T>& prob = cache.probs[static_cast<std::size_t>(k) * heads + h];
      const auto q = win.middleCols(h * d, d);
      const auto key = win.middleCols(c + h * d, d);
      const auto v = win.middleCols(2 * c + h * d, d);
      const auto dout = dwin.middleCols(h * d, d);

      dp.noalias() = dout * v.transpose();
      dv.noalias() = prob.transpose() * dout;
      const ColVec<T> rowdot = (dp.array() * prob.array()).rowwise().sum();
      Matrix<T> ds = (prob.array() * (dp.colwise() - rowdot).array()).matrix();
      for (int p = 0; p < m; ++p) {
        for (int r = 0; r < m; ++r) {
          d_table(plan.rel_index[static_cast<std::size_t>(p) * m + r], h) += ds(p, r);
        }
      }
      ds *= scale;
      dq.noalias() = ds * key;
      dk.noalias() = ds.transpose() * q;
      for (int p = 0; p < m; ++p) {
        d_qkv.row(src[p]).segment(h * d, d) = dq.row(p);
        d_qkv.row(src[p]).segment(c + h * d, d) = dk.row(p);
        d_qkv.row(src[p]).segment(2 * c + h * d, d) = dv.row(p);
      }
    }
  }
  return d_qkv;
}

template <typename T>
struct BlockCache {
  LnCache<T> ln1;
  LnCache<T> ln2;
  Matrix<T> ln1_out;
  Matrix<T> qkv;
  Matrix<T> attn;
  Matrix<T> ln2_out;
  Matrix<T> h_pre;
  Matrix<T> h_act;
  AttnCache<T> attn_cache;
};

template <typename T>
void block_forward(Matrix<T>& x, const ParamSet<T>& p, const std::string& pre, const WindowPlan& plan, int heads,
                   BlockCache<T>* cache) {
  Matrix<T> a = layer_norm(x, p[pre + "norm1.weight"], p[pre + "norm1.bias"], cache ? &cache->ln1 : nullptr);
  Matrix<T> qkv = linear(a, p[pre + "attn.qkv.weight"], &p[pre + "attn.qkv.bias"]);
  Matrix<T> o = window_attention(qkv, plan, p[pre + "attn.rel_pos_bias"], heads, cache ? &cache->attn_cache : nullptr);
  x += linear(o, p[pre + "attn.proj.weight"], &p[pre + "attn.proj.bias"]);

  Matrix<T> a2 = layer_norm(x, p[pre + "norm2.weight"], p[pre + "norm2.bias"], cache ? &cache->ln2 : nullptr);
  Matrix<T> h_pre = linear(a2, p[pre + "mlp.fc1.weight"], &p[pre + "mlp.fc1.bias"]);
  Matrix<T> h_act = h_pre.unaryExpr([](T v) { return gelu(v); });
  x += linear(h_act, p[pre + "mlp.fc2.weight"], &p[pre + "mlp.fc2.bias"]);

  if (cache) {
    cache->ln1_out = std::move(a);
    cache->qkv = std::move(qkv);
    cache->attn = std::move(o);
    cache->ln2_out = std::move(a2);
    cache->h_pre = std::move(h_pre);
    cache->h_act = std::move(h_act);
  }
}

template <typename T>
Matrix<T> block_backward(const Matrix<T>& dy, const ParamSet<T>& p, ParamSet<T>& g, const std::string& pre,
                         const WindowPlan& plan, int heads, const BlockCache<T>& c) {
  Matrix<T> d_x1 = dy;
  Matrix<T> d_hact = linear_backward(dy, c.h_act, p[pre + "mlp.fc2.weight"], g[pre + "mlp.fc2.weight"],
                                     &g[pre + "mlp.fc2.bias"]);
  const Matrix<T> d_hpre = (d_hact.array() * c.h_pre.unaryExpr([](T v) { return gelu_grad(v); }).array()).matrix();
  const Matrix<T> d_a2 = linear_backward(d_hpre, c.ln2_out, p[pre + "mlp.fc1.weight"], g[pre + "mlp.fc1.weight"],
                                         &g[pre + "mlp.fc1.bias"]);
  d_x1 += layer_norm_backward(d_a2, c.ln2, p[pre + "norm2.weight"], g[pre + "norm2.weight"], g[pre + "norm2.bias"]);

  const Matrix<T> d_o = linear_backward(d_x1, c.attn, p[pre + "attn.proj.weight"], g[pre + "attn.proj.weight"],
                                        &g[pre + "attn.proj.bias"]);
  const Matrix<T> d_qkv = window_attention_backward(d_o, c.qkv, plan, heads, c.attn_cache, g[pre + "attn.rel_pos_bias"]);
  const Matrix<T> d_a = linear_backward(d_qkv, c.ln1_out, p[pre + "attn.qkv.weight"], g[pre + "attn.qkv.weight"],
                                        &g[pre + "attn.qkv.bias"]);
  return d_x1 + layer_norm_backward(d_a, c.ln1, p[pre + "norm1.weight"], g[pre + "norm1.weight"], g[pre + "norm1.bias"]);
}

// 2x2 neighbourhood concat: [x(2i,2j), x(2i+1,2j), x(2i,2j+1), x(2i+1,2j+1)].
template <typename T>
Matrix<T> merge_gather(const Matrix<T>& x, int side) {
  const int half = side / 2;
  const Eigen::Index c = x.cols();
  Matrix<T> out(static_cast<Eigen::Index>(half) * half, 4 * c);
  for (int i = 0; i < half; ++i) {
    for (int j = 0; j < half; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * half + j;
      out.row(r).segment(0, c) = x.row((2 * i) * side + 2 * j);
      out.row(r).segment(c, c) = x.row((2 * i + 1) * side + 2 * j);
      out.row(r).segment(2 * c, c) = x.row((2 * i) * side + 2 * j + 1);
      out.row(r).segment(3 * c, c) = x.row((2 * i + 1) * side + 2 * j + 1);
    }
  }
  return out;
}

template <typename T>
Matrix<T> merge_scatter(const Matrix<T>& d, int side) {
  const int half = side / 2;
  const Eigen::Index c = d.cols() / 4;
  Matrix<T> out(static_cast<Eigen::Index>(side) * side, c);
  for (int i = 0; i < half; ++i) {
    for (int j = 0; j < half; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * half + j;
      out.row((2 * i) * side + 2 * j) = d.row(r).segment(0, c);
      out.row((2 * i + 1) * side + 2 * j) = d.row(r).segment(c, c);
      out.row((2 * i) * side + 2 * j + 1) = d.row(r).segment(2 * c, c);
      out.row((2 * i + 1) * side + 2 * j + 1) = d.row(r).segment(3 * c, c);
    }
  }
  return out;
}

template <typename T>
struct ForwardCache {
  std::vector<BlockCache<T>> blocks;
  std::vector<LnCache<T>> merge_ln;
  std::vector<Matrix<T>> merge_ln_out;
  LnCache<T> final_ln;
};

void check_input_shape(Eigen::Index rows, Eigen::Index cols, int side, const EncoderConfig& cfg) {
  if (side < 8 || side % 8 != 0) {
    throw ValidationError("encoder input side must be a positive multiple of 8, got " + std::to_string(side));
  }
  if (rows != cfg.embed_dim || cols != static_cast<Eigen::Index>(side) * side) {
    throw ValidationError("encoder input must be {embed_dim, side*side}; got {" + std::to_string(rows) + ", " +
                          std::to_string(cols) + "}");
  }
}

template <typename T>
Matrix<T> run_forward(const Matrix<T>& input, int side, const ParamSet<T>& params, const EncoderConfig& cfg,
                      ForwardCache<T>* cache) {
  cfg.validate();
  check_input_shape(input.rows(), input.cols(), side, cfg);
  check_params(params, cfg);

  Matrix<T> x = input.transpose();
  int grid = side;
  for (int s = 0; s < kNumStages; ++s) {
    const WindowPlan plain = build_plan(grid, cfg.window, false);
    const WindowPlan shifted = build_plan(grid, cfg.window, true);
    for (int b = 0; b < cfg.depths[s]; ++b) {
      BlockCache<T>* bc = nullptr;
      if (cache) bc = &cache->blocks.emplace_back();
      block_forward(x, params, block_prefix(s, b), b % 2 ? shifted : plain, cfg.heads[s], bc);
    }
    if (s + 1 < kNumStages) {
      const std::string pre = merge_prefix(s);
      LnCache<T>* lc = cache ? &cache->merge_ln.emplace_back() : nullptr;
      Matrix<T> normed = layer_norm(merge_gather(x, grid), params[pre + "norm.weight"], params[pre + "norm.bias"], lc);
      x = linear<T>(normed, params[pre + "reduction.weight"], nullptr);
      if (cache) cache->merge_ln_out.push_back(std::move(normed));
      grid /= 2;
    }
  }
  return layer_norm(x, params["norm.weight"], params["norm.bias"], cache ? &cache->final_ln : nullptr);
}

}  // namespace

ParamSet<double> init_params(const EncoderConfig& cfg) {
  cfg.validate();
  ParamSet<double> params;
  Rng rng(splitmix64(cfg.seed));
  for (const auto& spec : param_layout(cfg)) {
    params.add(spec.name, spec.rows, spec.cols);
    auto& m = params[spec.name];
    switch (spec.init) {
      case Init::kWeight:
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.truncated_normal(0.02);
        break;
      case Init::kOne:
        m.setOnes();
        break;
      case Init::kZero:
        break;
    }
  }
  return params;
}

template <typename T>
Matrix<T> encoder_forward(const Matrix<T>& input, int side, const ParamSet<T>& params, const EncoderConfig& cfg) {
  return run_forward<T>(input, side, params, cfg, nullptr);
}

template <typename T>
Matrix<T> project_tokens(const Matrix<T>& tokens, const ParamSet<T>& params) {
  const auto& w = params["projector.weight"];
  if (tokens.cols() != w.cols()) {
    throw ValidationError("token dim " + std::to_string(tokens.cols()) + " does not match projector input " +
                          std::to_string(w.cols()));
  }
  return linear(tokens, w, &params["projector.bias"]);
}

template <typename T>
Matrix<T> concat_with_instruction(const Matrix<T>& visual, const Matrix<T>& instruction) {
  if (instruction.rows() > 0 && instruction.cols() != visual.cols()) {
    throw ValidationError("instruction embedding dim does not match visual token dim");
  }
  Matrix<T> out(visual.rows() + instruction.rows(), visual.cols());
  out.topRows(visual.rows()) = visual;
  if (instruction.rows() > 0) out.bottomRows(instruction.rows()) = instruction;
  return out;
}

template <typename T>
EncoderGradients<T> encoder_backward(const Matrix<T>& input, int side, const ParamSet<T>& params,
                                     const EncoderConfig& cfg, const Matrix<T>& upstream) {
  ForwardCache<T> cache;
  const Matrix<T> out = run_forward<T>(input, side, params, cfg, &cache);
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw ValidationError("upstream gradient shape does not match the encoder output");
  }
  EncoderGradients<T> grads{Matrix<T>(), params.zeros_like()};
  ParamSet<T>& g = grads.params;

  Matrix<T> dx = layer_norm_backward(upstream, cache.final_ln, params["norm.weight"], g["norm.weight"], g["norm.bias"]);
  std::size_t block_index = cache.blocks.size();
  for (int s = kNumStages - 1; s >= 0; --s) {
    const int grid = side >> s;
    if (s + 1 < kNumStages) {
      const std::string pre = merge_prefix(s);
      const Matrix<T> d_norm = linear_backward<T>(dx, cache.merge_ln_out[s], params[pre + "reduction.weight"],
                                                  g[pre + "reduction.weight"], nullptr);
      const Matrix<T> d_cat =
          layer_norm_backward(d_norm, cache.merge_ln[s], params[pre + "norm.weight"], g[pre + "norm.weight"],
                              g[pre + "norm.bias"]);
      dx = merge_scatter(d_cat, grid);
    }
    const WindowPlan plain = build_plan(grid, cfg.window, false);
    const WindowPlan shifted = build_plan(grid, cfg.window, true);
    for (int b = cfg.depths[s] - 1; b >= 0; --b) {
      --block_index;
      dx = block_backward(dx, params, g, block_prefix(s, b), b % 2 ? shifted : plain, cfg.heads[s],
                          cache.blocks[block_index]);
    }
  }
  grads.input = dx.transpose();
  return grads;
}

template <typename T>
ProjectorGradients<T> project_tokens_backward(const Matrix<T>& tokens, const ParamSet<T>& params,
                                              const Matrix<T>& upstream) {
  const auto& w = params["projector.weight"];
  if (upstream.rows() != tokens.rows() || upstream.cols() != w.rows()) {
    throw ValidationError("upstream gradient shape does not match the projector output");
  }
  ProjectorGradients<T> g{Matrix<T>(), Matrix<T>::Zero(w.rows(), w.cols()), Matrix<T>::Zero(1, w.rows())};
  g.tokens = linear_backward(upstream, tokens, w, g.weight, &g.bias);
  return g;
}

VisualTokens encode(const Tensor& feature_map, const ParamSet<float>& params, const EncoderConfig& cfg) {
  if (feature_map.dims.size() != 3 || feature_map.dims[1] != feature_map.dims[2]) {
    throw ValidationError("encoder expects a square {E, S, S} feature map");
  }
  const int side = static_cast<int>(feature_map.dims[1]);
  const Eigen::Map<const Matrix<float>> input(feature_map.data.data(), feature_map.dims[0],
                                              static_cast<Eigen::Index>(side) * side);
  VisualTokens out;
  out.data = encoder_forward<float>(input, side, params, cfg);
  out.projected = project_tokens<float>(out.data, params);
  out.count = static_cast<int>(out.data.rows());
  out.dim = static_cast<int>(out.data.cols());
  return out;
}

int token_count(int resolution, TokenMode mode) {
  const int factor = mode == TokenMode::kDct ? 64 : 32;
  if (resolution <= 0 || resolution % factor != 0) {
    throw ValidationError("resolution " + std::to_string(resolution) + " is not divisible by " +
                          std::to_string(factor));
  }
  const int g = resolution / factor;
  return g * g;
}

Tensor to_tensor(const Matrix<float>& m) {
  Tensor t({static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())});
  std::copy(m.data(), m.data() + m.size(), t.data.begin());
  return t;
}

Matrix<float> to_matrix(const Tensor& t) {
  if (t.dims.size() != 2) {
    throw ValidationError("expected a 2-D tensor");
  }
  Matrix<float> m(t.dims[0], t.dims[1]);
  std::copy(t.data.begin(), t.data.end(), m.data());
  return m;
}

void save_params(const std::filesystem::path& dir, const ParamSet<float>& params) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.txt", std::ios::trunc);
  if (!index) throw IoError("cannot write " + (dir / "index.txt").string());
  for (const auto& p : params.items()) {
    const std::string file = p.name + ".fqc";
    write_tensor(dir / file, to_tensor(p.value));
    index << p.name << '\t' << file << '\n';
  }
}

ParamSet<float> load_params(const std::filesystem::path& dir) {
  std::ifstream index(dir / "index.txt");
  if (!index) throw IoError("cannot open " + (dir / "index.txt").string());
  ParamSet<float> params;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("malformed checkpoint index line: " + line);
    const std::string name = line.substr(0, tab);
    const Matrix<float> m = to_matrix(read_tensor(dir / line.substr(tab + 1)));
    params.add(name, m.rows(), m.cols());
    params[name] = m;
  }
  return params;
}

#define FREQDOC_INSTANTIATE(T)                                                                                    \
  template Matrix<T> encoder_forward<T>(const Matrix<T>&, int, const ParamSet<T>&, const EncoderConfig&);         \
  template Matrix<T> project_tokens<T>(const Matrix<T>&, const ParamSet<T>&);                                     \
  template Matrix<T> concat_with_instruction<T>(const Matrix<T>&, const Matrix<T>&);                              \
  template EncoderGradients<T> encoder_backward<T>(const Matrix<T>&, int, const ParamSet<T>&, const EncoderConfig&, \
                                                   const Matrix<T>&);                                             \
  template ProjectorGradients<T> project_tokens_backward<T>(const Matrix<T>&, const ParamSet<T>&, const Matrix<T>&);

FREQDOC_INSTANTIATE(float)
FREQDOC_INSTANTIATE(double)

#undef FREQDOC_INSTANTIATE

}  // namespace freqdoc
