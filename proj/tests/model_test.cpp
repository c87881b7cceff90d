#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sedkit/model.hpp>
#include <sedkit/rng.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace sedkit;

namespace {

// Deliberately naive per-timestep GRU written against plain double
// vectors; shares no code with the tensor ops it checks.
struct NaiveGru {
  static std::vector<double> matvec(const Tensor& w, const std::vector<double>& x) {
    const std::size_t rows = w.dim(0), cols = w.dim(1);
    std::vector<double> out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[i] += w.data()[i * cols + j] * x[j];
    return out;
  }

  static std::vector<double> step(const GruParams& g, const std::vector<double>& x,
                                  const std::vector<double>& h_prev) {
    const std::size_t u = g.b_update.dim(0);
    auto wx_u = matvec(g.w_update, x);
    auto uh_u = matvec(g.u_update, h_prev);
    auto wx_r = matvec(g.w_reset, x);
    auto uh_r = matvec(g.u_reset, h_prev);
    std::vector<double> update(u), reset(u);
    for (std::size_t i = 0; i < u; ++i) {
      update[i] = 1.0 / (1.0 + std::exp(-(wx_u[i] + uh_u[i] + g.b_update.data()[i])));
      reset[i] = 1.0 / (1.0 + std::exp(-(wx_r[i] + uh_r[i] + g.b_reset.data()[i])));
    }
    std::vector<double> gated(u);
    for (std::size_t i = 0; i < u; ++i) gated[i] = reset[i] * h_prev[i];
    auto wx_c = matvec(g.w_cand, x);
    auto uh_c = matvec(g.u_cand, gated);
    std::vector<double> h(u);
    for (std::size_t i = 0; i < u; ++i) {
      const double cand = std::tanh(wx_c[i] + uh_c[i] + g.b_cand.data()[i]);
      h[i] = (1.0 - update[i]) * h_prev[i] + update[i] * cand;
    }
    return h;
  }

  // Full bidirectional pass returning [h_fwd; h_bwd] per frame.
  static std::vector<std::vector<double>> run(const ModelConfig& cfg, const ModelParams& p,
                                              const std::vector<std::vector<double>>& xs) {
    const std::size_t t = xs.size(), u = cfg.gru_units;
    std::vector<std::vector<double>> fwd(t), bwd(t), out(t);
    std::vector<double> h(u, 0.0);
    for (std::size_t i = 0; i < t; ++i) {
      h = step(p.forward_gru, xs[i], h);
      fwd[i] = h;
    }
    h.assign(u, 0.0);
    for (std::size_t i = t; i-- > 0;) {
      h = step(p.backward_gru, xs[i], h);
      bwd[i] = h;
    }
    for (std::size_t i = 0; i < t; ++i) {
      out[i] = fwd[i];
      out[i].insert(out[i].end(), bwd[i].begin(), bwd[i].end());
    }
    return out;
  }
};

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.input_bands = 9;
  cfg.conv_channels = {2, 2, 2};
  cfg.gru_units = 3;
  cfg.num_events = 3;
  return cfg;
}

void fill_params(ModelParams& p, double value) {
  for_each_param(p, [value](const std::string&, Tensor& t) {
    std::fill(t.data().begin(), t.data().end(), value);
  });
}

Tensor random_features(std::size_t bands, std::size_t frames, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(bands * frames);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector({bands, frames}, std::move(v));
}

}  // namespace

TEST_CASE("conv_out_bands follows repeated floor division") {
  ModelConfig cfg;
  cfg.num_events = 4;
  CHECK(cfg.conv_out_bands() == 2);  // 64 -> 21 -> 7 -> 2
  CHECK(cfg.gru_input_dim() == 256);

  ModelConfig toy = toy_config();
  CHECK(toy.conv_out_bands() == 1);  // 9 -> 3 -> 1, last stage skips pooling
  CHECK(toy.gru_input_dim() == 2);
}

TEST_CASE("conv_stack zero parameters give zero output") {
  ModelConfig cfg = toy_config();
  ModelParams p = init_params(cfg, 1);
  fill_params(p, 0.0);
  Rng rng(3);
  Tensor v = random_features(9, 4, rng);
  Tensor out = conv_stack(v, cfg, p);
  REQUIRE(out.shape() == Shape{2, 1, 4});
  for (double x : out.data()) CHECK(x == 0.0);
}

TEST_CASE("conv_stack output shape is (C, 2, T) for 64 bands") {
  ModelConfig cfg;
  cfg.num_events = 2;
  ModelParams p = init_params(cfg, 5);
  Rng rng(7);
  Tensor v = random_features(64, 2, rng);
  Tensor out = conv_stack(v, cfg, p);
  CHECK(out.shape() == Shape{128, 2, 2});
  CHECK_THROWS_AS(conv_stack(random_features(32, 2, rng), cfg, p), std::invalid_argument);
}

TEST_CASE("conv_stack is time-shift equivariant away from the edges") {
  ModelConfig cfg = toy_config();
  cfg.conv_channels = {4, 4, 4};
  ModelParams p = init_params(cfg, 11);
  Rng rng(13);
  const std::size_t t = 16, shift = 3;
  Tensor v1 = random_features(9, t, rng);
  Tensor v2 = Tensor::zeros({9, t});
  for (std::size_t d = 0; d < 9; ++d) {
    for (std::size_t i = 0; i + shift < t; ++i) v2.at(d, i + shift) = v1.at(d, i);
    for (std::size_t i = 0; i < shift; ++i) v2.at(d, i) = rng.uniform(-1.0, 1.0);
  }
  Tensor o1 = conv_stack(v1, cfg, p);
  Tensor o2 = conv_stack(v2, cfg, p);
  // receptive field spans 3 frames either side after three 3x3 convs
  const std::size_t margin = 3;
  for (std::size_t c = 0; c < o1.dim(0); ++c)
    for (std::size_t d = 0; d < o1.dim(1); ++d)
      for (std::size_t i = margin; i + shift + margin < t; ++i) {
        const double a = o1.data()[(c * o1.dim(1) + d) * t + i];
        const double b = o2.data()[(c * o2.dim(1) + d) * t + i + shift];
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
      }
}

TEST_CASE("flatten_time ordering and round trip") {
  const std::size_t c = 2, d = 3, t = 2;
  Tensor conv_out = Tensor::zeros({c, d, t});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t row = 0; row < d; ++row)
      for (std::size_t i = 0; i < t; ++i) conv_out.data()[(ch * d + row) * t + i] = 10.0 * ch + row;
  auto frames = flatten_time(conv_out);
  REQUIRE(frames.size() == t);
  REQUIRE(frames[0].numel() == d * c);
  for (std::size_t row = 0; row < d; ++row)
    for (std::size_t ch = 0; ch < c; ++ch)
      CHECK(frames[0].data()[row * c + ch] == doctest::Approx(10.0 * ch + row));

  // unflatten: scatter frame vectors back into a [C x D x T] block
  Tensor rebuilt = Tensor::zeros({c, d, t});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t row = 0; row < d; ++row)
      for (std::size_t ch = 0; ch < c; ++ch)
        rebuilt.data()[(ch * d + row) * t + i] = frames[i].data()[row * c + ch];
  CHECK(rebuilt.data() == conv_out.data());
}

TEST_CASE("bigru with zero parameters decays to zero states") {
  ModelConfig cfg = toy_config();
  ModelParams p = init_params(cfg, 17);
  fill_params(p, 0.0);
  std::vector<Tensor> xs;
  Rng rng(19);
  for (int i = 0; i < 4; ++i) {
    std::vector<double> v(cfg.gru_input_dim());
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    xs.push_back(Tensor::from_vector({cfg.gru_input_dim(), 1}, std::move(v)));
  }
  auto hs = bigru_forward(xs, cfg, p);
  for (const auto& h : hs)
    for (double v : h.data()) CHECK(v == 0.0);
}

TEST_CASE("bigru matches the naive per-step reference") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg = toy_config();
    cfg.gru_units = 1 + rng.uniform_index(4);
    const std::size_t t = 1 + rng.uniform_index(6);
    ModelParams p = init_params(cfg, 100 + static_cast<std::uint64_t>(trial));

    std::vector<Tensor> xs;
    std::vector<std::vector<double>> xs_plain;
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> v(cfg.gru_input_dim());
      for (auto& x : v) x = rng.uniform(-2.0, 2.0);
      xs_plain.push_back(v);
      xs.push_back(Tensor::from_vector({cfg.gru_input_dim(), 1}, std::move(v)));
    }

    auto hs = bigru_forward(xs, cfg, p);
    auto naive = NaiveGru::run(cfg, p, xs_plain);
    REQUIRE(hs.size() == t);
    for (std::size_t i = 0; i < t; ++i) {
      REQUIRE(hs[i].numel() == naive[i].size());
      for (std::size_t j = 0; j < naive[i].size(); ++j)
        CHECK(std::abs(hs[i].data()[j] - naive[i][j]) < 1e-10);
    }
  }
}

TEST_CASE("bigru single step matches the reference to 1e-12") {
  ModelConfig cfg = toy_config();
  ModelParams p = init_params(cfg, 401);
  Rng rng(403);
  std::vector<double> v(cfg.gru_input_dim());
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  std::vector<Tensor> xs{Tensor::from_vector({cfg.gru_input_dim(), 1}, v)};

  auto hs = bigru_forward(xs, cfg, p);
  auto naive = NaiveGru::run(cfg, p, {v});
  for (std::size_t j = 0; j < naive[0].size(); ++j)
    CHECK(std::abs(hs[0].data()[j] - naive[0][j]) < 1e-12);
}

TEST_CASE("bigru reversal symmetry") {
  ModelConfig cfg = toy_config();
  ModelParams p = init_params(cfg, 29);
  Rng rng(31);
  const std::size_t t = 5, u = cfg.gru_units;
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < t; ++i) {
    std::vector<double> v(cfg.gru_input_dim());
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    xs.push_back(Tensor::from_vector({cfg.gru_input_dim(), 1}, std::move(v)));
  }
  auto hs = bigru_forward(xs, cfg, p);

  ModelParams swapped = init_params(cfg, 29);
  std::swap(swapped.forward_gru, swapped.backward_gru);
  std::vector<Tensor> reversed(xs.rbegin(), xs.rend());
  auto hs2 = bigru_forward(reversed, cfg, swapped);

  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < u; ++j) {
      CHECK(hs2[i].data()[j] == doctest::Approx(hs[t - 1 - i].data()[u + j]).epsilon(1e-12));
      CHECK(hs2[i].data()[u + j] == doctest::Approx(hs[t - 1 - i].data()[j]).epsilon(1e-12));
    }
}

TEST_CASE("output layer saturations and range") {
  ModelConfig cfg = toy_config();
  Tensor h = Tensor::from_vector({2 * cfg.gru_units, 1}, std::vector<double>(2 * cfg.gru_units, 0.3));

  Tensor w0 = Tensor::zeros({cfg.num_events, 2 * cfg.gru_units});
  Tensor b0 = Tensor::zeros({cfg.num_events, 1});
  Tensor y = output_layer(h, w0, b0);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.5));

  Tensor b_hi = Tensor::full({cfg.num_events, 1}, 10.0);
  Tensor y_hi = output_layer(h, w0, b_hi);
  for (double v : y_hi.data()) CHECK(v > 0.9999);

  Rng rng(37);
  Tensor w = Tensor::from_vector({cfg.num_events, 2 * cfg.gru_units},
                                 [&] {
                                   std::vector<double> v(cfg.num_events * 2 * cfg.gru_units);
                                   for (auto& x : v) x = rng.uniform(-3.0, 3.0);
                                   return v;
                                 }());
  Tensor y_rand = output_layer(h, w, b_hi);
  for (double v : y_rand.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("model_forward shape, determinism, and the all-zero case") {
  ModelConfig cfg = toy_config();
  ModelParams p = init_params(cfg, 41);
  Rng rng(43);
  Tensor v = random_features(9, 6, rng);

  Tensor y1 = model_forward(v, cfg, p);
  REQUIRE(y1.shape() == Shape{3, 6});
  Tensor y2 = model_forward(v, cfg, p);
  CHECK(y1.data() == y2.data());
  for (double x : y1.data()) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    CHECK(std::isfinite(x));
  }

  fill_params(p, 0.0);
  Tensor y0 = model_forward(v, cfg, p);
  for (double x : y0.data()) CHECK(x == doctest::Approx(0.5));
}

TEST_CASE("model gradients match finite differences on the toy config") {
  ModelConfig cfg = toy_config();
  ModelParams p = init_params(cfg, 47);
  Rng rng(53);
  Tensor v = random_features(9, 5, rng);

  auto loss_value = [&]() {
    Tensor y = model_forward(v, cfg, p);
    return sum_all(hadamard(y, y));
  };

  Tensor loss = loss_value();
  zero_all_grads(p);
  backward(loss);

  const double step = 1e-5;
  double worst = 0.0;
  for_each_param(p, [&](const std::string&, Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + step;
      const double fp = loss_value().item();
      t.data()[i] = saved - step;
      const double fm = loss_value().item();
      t.data()[i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      worst = std::max(worst, std::abs(t.grad()[i] - fd) / std::max(1.0, std::abs(t.grad()[i])));
    }
  });
  CHECK(worst < 1e-5);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  ModelConfig cfg = toy_config();
  ModelParams p = init_params(cfg, 59);
  EventVocabulary vocab({"bird", "car", "wind"});
  const auto path = std::filesystem::temp_directory_path() / "sedkit_ckpt_test.bin";
  save_checkpoint(path.string(), cfg, vocab, p);

  Checkpoint ck = load_checkpoint(path.string());
  CHECK(ck.config.input_bands == cfg.input_bands);
  CHECK(ck.config.conv_channels == cfg.conv_channels);
  CHECK(ck.config.gru_units == cfg.gru_units);
  CHECK(ck.vocab.labels() == vocab.labels());

  bool identical = true;
  for_each_param(p, [&](const std::string& name, Tensor& t) {
    for_each_param(ck.params, [&](const std::string& name2, Tensor& t2) {
      if (name == name2) identical = identical && t.data() == t2.data();
    });
  });
  CHECK(identical);

  const auto path2 = std::filesystem::temp_directory_path() / "sedkit_ckpt_test2.bin";
  save_checkpoint(path2.string(), ck.config, ck.vocab, ck.params);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}
