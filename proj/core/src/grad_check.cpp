#include "freqdoc/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "freqdoc/error.hpp"
#include "freqdoc/rng.hpp"

namespace freqdoc {
namespace {

double loss(const Matrix<double>& input, int side, const ParamSet<double>& params, const EncoderConfig& cfg) {
  return project_tokens(encoder_forward(input, side, params, cfg), params).sum();
}

std::vector<Eigen::Index> pick_coords(Eigen::Index size, int count, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (size <= count) return idx;
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(size - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

}  // namespace

GradCheckReport grad_check(const EncoderConfig& cfg, const GradCheckOptions& opts) {
  if (opts.trials < 1) throw ValidationError("grad_check needs at least one trial");
  GradCheckReport report;
  report.trials = opts.trials;
  Rng rng(splitmix64(opts.seed ^ 0x6772616463686bULL));

  for (int trial = 0; trial < opts.trials; ++trial) {
    EncoderConfig trial_cfg = cfg;
    trial_cfg.seed = cfg.seed + static_cast<std::uint64_t>(trial);
    ParamSet<double> params = init_params(trial_cfg);
    for (auto& p : params.items()) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += opts.jitter * rng.normal();
    }
    Matrix<double> input(cfg.embed_dim, opts.side * opts.side);
    for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();

    const Matrix<double> tokens = encoder_forward(input, opts.side, params, cfg);
    const Matrix<double> ones = Matrix<double>::Ones(tokens.rows(), cfg.llm_dim);
    ProjectorGradients<double> pg = project_tokens_backward(tokens, params, ones);
    EncoderGradients<double> eg = encoder_backward(input, opts.side, params, cfg, pg.tokens);
    eg.params["projector.weight"] = pg.weight;
    eg.params["projector.bias"] = pg.bias;
    if (opts.backward_override) opts.backward_override(eg.params, eg.input);

    auto check = [&](const std::string& name, Matrix<double>& value, const Matrix<double>& grad) {
      GradCheckEntry* entry = nullptr;
      for (auto& e : report.entries) {
        if (e.name == name) entry = &e;
      }
      if (!entry) entry = &report.entries.emplace_back(GradCheckEntry{name, 0.0, 0});
      for (Eigen::Index i : pick_coords(value.size(), opts.coords_per_tensor, rng)) {
        const double saved = value.data()[i];
        value.data()[i] = saved + opts.eps;
        const double up = loss(input, opts.side, params, cfg);
        value.data()[i] = saved - opts.eps;
        const double down = loss(input, opts.side, params, cfg);
        value.data()[i] = saved;
        const double numeric = (up - down) / (2.0 * opts.eps);
        const double err = rel_error(grad.data()[i], numeric);
        entry->max_rel_error = std::max(entry->max_rel_error, err);
        report.max_rel_error = std::max(report.max_rel_error, err);
        ++entry->checked;
      }
    };

    check("input", input, eg.input);
    for (auto& p : params.items()) check(p.name, p.value, eg.params[p.name]);
  }
  return report;
}

}  // namespace freqdoc
