#pragma once
// Finite-difference verification of the full training objective on a
// small fixed configuration. Used by the gradcheck command and the
// acceptance suite.

#include <sedkit/event_graph.hpp>
#include <sedkit/model.hpp>
#include <sedkit/training.hpp>

#include <string>
#include <vector>

namespace sedkit {

struct GradCheckResult {
  double alpha = 0.0;
  double max_rel_error = 0.0;
  std::string worst_param;
  bool pass = false;
};

inline ModelConfig gradcheck_toy_model() {
  ModelConfig cfg;
  cfg.input_bands = 9;
  cfg.conv_channels = {2, 2, 2};
  cfg.gru_units = 3;
  cfg.num_events = 3;
  return cfg;
}

// Checks every parameter gradient of the regularized objective against
// central finite differences on the toy model (9 bands, [2,2,2] channels,
// 3 GRU units, 3 events, 5 frames) for each alpha.
inline std::vector<GradCheckResult> gradcheck_toy_suite(const std::vector<double>& alphas = {0.0, 1e-5,
                                                                                            1e-2},
                                                        double tolerance = 1e-5, double step = 1e-5,
                                                        std::uint64_t seed = 12345) {
  const ModelConfig cfg = gradcheck_toy_model();
  const std::size_t frames = 5;

  Rng rng(seed);
  std::vector<double> fv(cfg.input_bands * frames);
  for (auto& v : fv) v = rng.uniform(-1.0, 1.0);
  const Tensor features = Tensor::from_vector({cfg.input_bands, frames}, fv);

  EventRoll roll(cfg.num_events, frames, 0.020);
  for (auto& z : roll.z) z = rng.bernoulli(0.5) ? 1 : 0;

  AdjacencyMatrix a(cfg.num_events);
  for (std::size_t i = 0; i < a.m; ++i)
    for (std::size_t j = i + 1; j < a.m; ++j) a.at(i, j) = a.at(j, i) = rng.uniform();
  const GraphLaplacian lap = laplacian(a);

  std::vector<GradCheckResult> results;
  for (double alpha : alphas) {
    ModelParams params = init_params(cfg, seed + 7);
    auto loss_value = [&]() {
      Tensor y = model_forward(features, cfg, params);
      return total_loss_graph(y, roll, &lap, alpha);
    };

    LossGraph loss = loss_value();
    zero_all_grads(params);
    backward(loss.total);

    GradCheckResult r;
    r.alpha = alpha;
    for_each_param(params, [&](const std::string& name, Tensor& t) {
      for (std::size_t i = 0; i < t.numel(); ++i) {
        const double saved = t.data()[i];
        t.data()[i] = saved + step;
        const double fp = loss_value().values.total;
        t.data()[i] = saved - step;
        const double fm = loss_value().values.total;
        t.data()[i] = saved;
        const double fd = (fp - fm) / (2.0 * step);
        const double err = std::abs(t.grad()[i] - fd) / std::max(1.0, std::abs(t.grad()[i]));
        if (err > r.max_rel_error) {
          r.max_rel_error = err;
          r.worst_param = name + "[" + std::to_string(i) + "]";
        }
      }
    });
    r.pass = r.max_rel_error < tolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace sedkit
