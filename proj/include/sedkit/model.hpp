#pragma once
// CNN-BiGRU sound event detector: three blocks of (3x3 conv, ReLU, 3x1
// frequency max-pooling), one bidirectional GRU layer, and a fully
// connected sigmoid output giving frame-wise event activations.

#include <sedkit/events.hpp>
#include <sedkit/features.hpp>
#include <sedkit/rng.hpp>
#include <sedkit/tensor.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

struct ModelConfig {
  std::size_t input_bands = 64;
  std::vector<std::size_t> conv_channels{128, 128, 128};
  std::size_t kernel = 3;  // 3x3
  std::size_t pool = 3;    // 3x1 along frequency
  std::size_t gru_units = 32;
  std::size_t num_events = 0;  // M

  // Frequency extent left after the conv stack. Pooling applies only
  // while the extent still holds a full window, so small band counts
  // (e.g. the 9-band toy) remain usable.
  std::size_t conv_out_bands() const {
    std::size_t d = input_bands;
    for (std::size_t i = 0; i < conv_channels.size(); ++i)
      if (d >= pool) d /= pool;
    return d;
  }

  std::size_t gru_input_dim() const { return conv_out_bands() * conv_channels.back(); }

  void validate() const {
    if (input_bands == 0 || conv_channels.empty() || gru_units == 0 || num_events == 0)
      throw std::invalid_argument("ModelConfig: all extents must be positive");
    if (kernel != 3) throw std::invalid_argument("ModelConfig: only 3x3 kernels are supported");
    if (pool == 0) throw std::invalid_argument("ModelConfig: pool must be positive");
    if (conv_out_bands() == 0)
      throw std::invalid_argument("ModelConfig: conv stack reduces frequency extent to zero");
  }
};

struct ConvBlockParams {
  Tensor kernels;  // [C_out x C_in x 3 x 3]
  Tensor bias;     // [C_out]
};

struct GruParams {
  Tensor w_update, u_update, b_update;
  Tensor w_reset, u_reset, b_reset;
  Tensor w_cand, u_cand, b_cand;
};

struct ModelParams {
  std::vector<ConvBlockParams> conv;
  GruParams forward_gru;
  GruParams backward_gru;
  Tensor w_out;  // [M x 2*units]
  Tensor b_out;  // [M x 1]
};

namespace detail {

inline Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-s, s);
  Tensor t = Tensor::from_vector(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

inline GruParams init_gru(std::size_t units, std::size_t input_dim, Rng& rng) {
  GruParams g;
  g.w_update = init_uniform({units, input_dim}, input_dim, rng);
  g.u_update = init_uniform({units, units}, units, rng);
  g.b_update = init_uniform({units, 1}, input_dim, rng);
  g.w_reset = init_uniform({units, input_dim}, input_dim, rng);
  g.u_reset = init_uniform({units, units}, units, rng);
  g.b_reset = init_uniform({units, 1}, input_dim, rng);
  g.w_cand = init_uniform({units, input_dim}, input_dim, rng);
  g.u_cand = init_uniform({units, units}, units, rng);
  g.b_cand = init_uniform({units, 1}, input_dim, rng);
  return g;
}

}  // namespace detail

inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  std::size_t cin = 1;
  for (std::size_t cout : cfg.conv_channels) {
    ConvBlockParams block;
    block.kernels = detail::init_uniform({cout, cin, 3, 3}, cin * 9, rng);
    block.bias = detail::init_uniform({cout}, cin * 9, rng);
    p.conv.push_back(std::move(block));
    cin = cout;
  }
  const std::size_t xdim = cfg.gru_input_dim();
  p.forward_gru = detail::init_gru(cfg.gru_units, xdim, rng);
  p.backward_gru = detail::init_gru(cfg.gru_units, xdim, rng);
  p.w_out = detail::init_uniform({cfg.num_events, 2 * cfg.gru_units}, 2 * cfg.gru_units, rng);
  p.b_out = detail::init_uniform({cfg.num_events, 1}, 2 * cfg.gru_units, rng);
  return p;
}

// Visits every parameter tensor with a stable name; the enumeration order
// fixes checkpoint layout and optimizer state keys.
inline void for_each_param(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t i = 0; i < p.conv.size(); ++i) {
    const std::string prefix = "conv" + std::to_string(i + 1) + ".";
    fn(prefix + "kernels", p.conv[i].kernels);
    fn(prefix + "bias", p.conv[i].bias);
  }
  const auto visit_gru = [&fn](const std::string& prefix, GruParams& g) {
    fn(prefix + "w_update", g.w_update);
    fn(prefix + "u_update", g.u_update);
    fn(prefix + "b_update", g.b_update);
    fn(prefix + "w_reset", g.w_reset);
    fn(prefix + "u_reset", g.u_reset);
    fn(prefix + "b_reset", g.b_reset);
    fn(prefix + "w_cand", g.w_cand);
    fn(prefix + "u_cand", g.u_cand);
    fn(prefix + "b_cand", g.b_cand);
  };
  visit_gru("gru.fwd.", p.forward_gru);
  visit_gru("gru.bwd.", p.backward_gru);
  fn("out.weight", p.w_out);
  fn("out.bias", p.b_out);
}

inline void zero_all_grads(ModelParams& p) {
  for_each_param(p, [](const std::string&, Tensor& t) { t.zero_grad(); });
}

inline Tensor feature_tensor(const FeatureMap& map) {
  return Tensor::from_vector({map.bands, map.frames}, map.values);
}

// Three rounds of conv2d -> ReLU -> frequency max-pooling. Time extent is
// preserved throughout; pooling is skipped once the frequency extent no
// longer holds a full window.
inline Tensor conv_stack(const Tensor& features, const ModelConfig& cfg, const ModelParams& params) {
  if (features.rank() != 2 || features.dim(0) != cfg.input_bands)
    throw std::invalid_argument("conv_stack: expected [" + std::to_string(cfg.input_bands) +
                                " x T] features, got " + shape_str(features.shape()));
  Tensor x = reshape(features, {1, features.dim(0), features.dim(1)});
  for (const auto& block : params.conv) {
    x = relu(conv2d(x, block.kernels, block.bias));
    if (x.dim(1) >= cfg.pool) x = maxpool_freq(x, cfg.pool);
  }
  return x;
}

// Per-frame input vectors for the recurrent layer, each of length D'*C in
// the frequency-major, channel-minor order.
inline std::vector<Tensor> flatten_time(const Tensor& conv_out) {
  std::vector<Tensor> frames;
  frames.reserve(conv_out.dim(2));
  for (std::size_t t = 0; t < conv_out.dim(2); ++t) frames.push_back(frame_column(conv_out, t));
  return frames;
}

namespace detail {

// One GRU step: update/reset gates from the input and the neighboring
// state, candidate mixed in proportion to the update gate.
inline Tensor gru_step(const GruParams& g, const Tensor& x, const Tensor& h_prev, const Tensor& ones) {
  Tensor update = sigmoid(add(add(matmul(g.w_update, x), matmul(g.u_update, h_prev)), g.b_update));
  Tensor reset = sigmoid(add(add(matmul(g.w_reset, x), matmul(g.u_reset, h_prev)), g.b_reset));
  Tensor cand = sedkit::tanh(
      add(add(matmul(g.w_cand, x), matmul(g.u_cand, hadamard(reset, h_prev))), g.b_cand));
  return add(hadamard(sub(ones, update), h_prev), hadamard(update, cand));
}

}  // namespace detail

// Runs the forward recurrence left to right and the backward recurrence
// right to left, both from zero initial states, and concatenates the two
// states per frame.
inline std::vector<Tensor> bigru_forward(const std::vector<Tensor>& xs, const ModelConfig& cfg,
                                         const ModelParams& params) {
  const std::size_t units = cfg.gru_units;
  for (const auto& x : xs)
    if (x.numel() != cfg.gru_input_dim())
      throw std::invalid_argument("bigru_forward: frame vector of length " + std::to_string(x.numel()) +
                                  " does not match input dim " + std::to_string(cfg.gru_input_dim()));
  const std::size_t t = xs.size();
  Tensor ones = Tensor::full({units, 1}, 1.0);

  std::vector<Tensor> fwd(t), bwd(t);
  Tensor h = Tensor::zeros({units, 1});
  for (std::size_t i = 0; i < t; ++i) {
    h = detail::gru_step(params.forward_gru, xs[i], h, ones);
    fwd[i] = h;
  }
  h = Tensor::zeros({units, 1});
  for (std::size_t i = t; i-- > 0;) {
    h = detail::gru_step(params.backward_gru, xs[i], h, ones);
    bwd[i] = h;
  }

  std::vector<Tensor> out;
  out.reserve(t);
  for (std::size_t i = 0; i < t; ++i) out.push_back(concat_rows(fwd[i], bwd[i]));
  return out;
}

inline Tensor output_layer(const Tensor& h, const Tensor& w_out, const Tensor& b_out) {
  return sigmoid(add(matmul(w_out, h), b_out));
}

// Full network: conv stack, per-frame flattening, BiGRU, sigmoid output.
// Returns the M x T activation matrix.
inline Tensor model_forward(const Tensor& features, const ModelConfig& cfg, const ModelParams& params) {
  Tensor conv_out = conv_stack(features, cfg, params);
  std::vector<Tensor> xs = flatten_time(conv_out);
  std::vector<Tensor> hs = bigru_forward(xs, cfg, params);
  std::vector<Tensor> ys;
  ys.reserve(hs.size());
  for (const auto& h : hs) ys.push_back(output_layer(h, params.w_out, params.b_out));
  return hstack(ys);
}

inline ActivationMatrix to_activation(const Tensor& y) {
  ActivationMatrix a(y.dim(0), y.dim(1));
  a.values = y.data();
  return a;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "SEDCKPT\0", u32 version, model geometry, the
// vocabulary labels, then each named parameter (name, shape, raw doubles).
// Round-trips bit-exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace detail

struct Checkpoint {
  ModelConfig config;
  EventVocabulary vocab;
  ModelParams params;
};

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg, const EventVocabulary& vocab,
                            ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
  out.write("SEDCKPT\0", 8);
  detail::write_u32(out, 1);  // version
  detail::write_u32(out, static_cast<std::uint32_t>(cfg.input_bands));
  detail::write_u32(out, static_cast<std::uint32_t>(cfg.conv_channels.size()));
  for (auto c : cfg.conv_channels) detail::write_u32(out, static_cast<std::uint32_t>(c));
  detail::write_u32(out, static_cast<std::uint32_t>(cfg.gru_units));
  detail::write_u32(out, static_cast<std::uint32_t>(cfg.num_events));
  for (const auto& label : vocab.labels()) detail::write_string(out, label);

  std::uint32_t count = 0;
  for_each_param(params, [&count](const std::string&, Tensor&) { ++count; });
  detail::write_u32(out, count);
  for_each_param(params, [&out](const std::string& name, Tensor& t) {
    detail::write_string(out, name);
    detail::write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) detail::write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "SEDCKPT\0", 8) != 0)
    throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint");
  const std::uint32_t version = detail::read_u32(in);
  if (version != 1) throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  ck.config.input_bands = detail::read_u32(in);
  const std::uint32_t blocks = detail::read_u32(in);
  ck.config.conv_channels.clear();
  for (std::uint32_t i = 0; i < blocks; ++i) ck.config.conv_channels.push_back(detail::read_u32(in));
  ck.config.gru_units = detail::read_u32(in);
  ck.config.num_events = detail::read_u32(in);
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < ck.config.num_events; ++i) labels.push_back(detail::read_string(in));
  ck.vocab = EventVocabulary(std::move(labels));

  ck.params = init_params(ck.config, 0);  // shapes only; data overwritten below
  const std::uint32_t count = detail::read_u32(in);
  std::uint32_t expected = 0;
  for_each_param(ck.params, [&expected](const std::string&, Tensor&) { ++expected; });
  if (count != expected)
    throw std::runtime_error("load_checkpoint: parameter count mismatch in '" + path + "'");

  for_each_param(ck.params, [&in, &path](const std::string& name, Tensor& t) {
    const std::string stored = detail::read_string(in);
    if (stored != name)
      throw std::runtime_error("load_checkpoint: expected parameter '" + name + "', found '" + stored +
                               "' in '" + path + "'");
    const std::uint32_t rank = detail::read_u32(in);
    Shape shape(rank);
    for (auto& d : shape) d = detail::read_u32(in);
    if (shape != t.shape())
      throw std::runtime_error("load_checkpoint: shape mismatch for '" + name + "' in '" + path + "'");
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
  });
  if (!in) throw std::runtime_error("load_checkpoint: truncated file '" + path + "'");
  return ck;
}

}  // namespace sedkit
