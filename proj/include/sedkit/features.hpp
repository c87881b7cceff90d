#pragma once
// Log mel-band energy extraction: Hann-windowed framing, power spectrum
// via a direct real DFT, and a triangular mel filterbank (HTK mel scale).
// Also the flat binary feature-file format.

#include <sedkit/wav.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

struct FeatureConfig {
  std::size_t mel_bands = 64;
  double frame_length = 0.040;  // seconds
  double frame_shift = 0.020;   // seconds
  double energy_floor = 1e-10;
};

// D x T matrix of log mel-band energies, row-major, one column per frame.
struct FeatureMap {
  std::size_t bands = 0;
  std::size_t frames = 0;
  double frame_length = 0.040;
  double frame_shift = 0.020;
  std::vector<double> values;

  double& at(std::size_t d, std::size_t t) { return values[d * frames + t]; }
  double at(std::size_t d, std::size_t t) const { return values[d * frames + t]; }
};

// T = floor((N - L) / H) + 1 for N samples, frame length L, hop H.
inline std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t hop) {
  if (n_samples < frame_len) return 0;
  return (n_samples - frame_len) / hop + 1;
}

inline std::size_t samples_for(double seconds, unsigned sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

// Splits a clip into Hann-windowed frames.
inline std::vector<std::vector<double>> frame_signal(const AudioClip& clip, double frame_length,
                                                     double frame_shift) {
  const std::size_t len = samples_for(frame_length, clip.sample_rate);
  const std::size_t hop = samples_for(frame_shift, clip.sample_rate);
  if (len == 0 || hop == 0) throw std::invalid_argument("frame_signal: frame length/shift too small");
  if (clip.samples.size() < len)
    throw std::invalid_argument("frame_signal: clip of " + std::to_string(clip.samples.size()) +
                                " samples is shorter than one " + std::to_string(len) + "-sample frame");
  std::vector<double> window(len);
  for (std::size_t n = 0; n < len; ++n)
    window[n] = len == 1 ? 1.0 : 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / (len - 1)));

  const std::size_t t = frame_count(clip.samples.size(), len, hop);
  std::vector<std::vector<double>> frames(t);
  for (std::size_t i = 0; i < t; ++i) {
    frames[i].resize(len);
    const double* src = clip.samples.data() + i * hop;
    for (std::size_t n = 0; n < len; ++n) frames[i][n] = src[n] * window[n];
  }
  return frames;
}

// Squared DFT magnitudes for bins 0..floor(L/2). Direct evaluation with a
// shared twiddle table indexed by (k*n) mod L; frame lengths at desk scale
// make this fast enough without an FFT.
inline std::vector<double> power_spectrum(const std::vector<double>& frame) {
  const std::size_t len = frame.size();
  if (len == 0) return {};
  std::vector<double> cos_tab(len), sin_tab(len);
  for (std::size_t j = 0; j < len; ++j) {
    const double arg = 2.0 * std::numbers::pi * j / static_cast<double>(len);
    cos_tab[j] = std::cos(arg);
    sin_tab[j] = std::sin(arg);
  }
  const std::size_t bins = len / 2 + 1;
  std::vector<double> power(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    std::size_t j = 0;
    for (std::size_t n = 0; n < len; ++n) {
      re += frame[n] * cos_tab[j];
      im -= frame[n] * sin_tab[j];
      j += k;
      if (j >= len) j -= len;
    }
    power[k] = re * re + im * im;
  }
  return power;
}

// Triangular mel filterbank between 0 Hz and sample_rate/2, HTK mel scale.
struct MelFilterbank {
  std::size_t bands = 0;
  std::size_t bins = 0;
  std::vector<double> weights;  // row-major bands x bins

  static double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
  static double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

  static MelFilterbank build(std::size_t bands, unsigned sample_rate, std::size_t frame_len) {
    MelFilterbank fb;
    fb.bands = bands;
    fb.bins = frame_len / 2 + 1;
    fb.weights.assign(bands * fb.bins, 0.0);

    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(bands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(bands + 1));

    for (std::size_t b = 0; b < bands; ++b) {
      const double lo = edges[b], center = edges[b + 1], hi = edges[b + 2];
      for (std::size_t k = 0; k < fb.bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(frame_len);
        double w = 0.0;
        if (f > lo && f < center)
          w = (f - lo) / (center - lo);
        else if (f >= center && f < hi)
          w = (hi - f) / (hi - center);
        fb.weights[b * fb.bins + k] = w;
      }
    }
    return fb;
  }

  std::vector<double> apply(const std::vector<double>& spectrum) const {
    if (spectrum.size() != bins)
      throw std::invalid_argument("MelFilterbank: spectrum has " + std::to_string(spectrum.size()) +
                                  " bins, filterbank expects " + std::to_string(bins));
    std::vector<double> out(bands, 0.0);
    for (std::size_t b = 0; b < bands; ++b) {
      const double* row = &weights[b * bins];
      double acc = 0.0;
      for (std::size_t k = 0; k < bins; ++k) acc += row[k] * spectrum[k];
      out[b] = acc;
    }
    return out;
  }
};

inline std::vector<double> log_mel_energy(const std::vector<double>& spectrum, const MelFilterbank& fb,
                                          double floor = 1e-10) {
  std::vector<double> mel = fb.apply(spectrum);
  for (auto& v : mel) v = std::log(std::max(v, floor));
  return mel;
}

inline FeatureMap extract_features(const AudioClip& clip, const FeatureConfig& cfg = {}) {
  const auto frames = frame_signal(clip, cfg.frame_length, cfg.frame_shift);
  const std::size_t len = samples_for(cfg.frame_length, clip.sample_rate);
  const auto fb = MelFilterbank::build(cfg.mel_bands, clip.sample_rate, len);

  FeatureMap map;
  map.bands = cfg.mel_bands;
  map.frames = frames.size();
  map.frame_length = cfg.frame_length;
  map.frame_shift = cfg.frame_shift;
  map.values.resize(map.bands * map.frames);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto mel = log_mel_energy(power_spectrum(frames[t]), fb, cfg.energy_floor);
    for (std::size_t d = 0; d < map.bands; ++d) map.at(d, t) = mel[d];
  }
  return map;
}

// ---------------------------------------------------------------------------
// Feature file: 16-byte header (magic "SEDF", u32 D, u32 T, u32 float
// width in bits), then D*T little-endian doubles, row-major.
// ---------------------------------------------------------------------------

inline void write_feature_file(const std::string& path, const FeatureMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_feature_file: cannot open '" + path + "'");
  out.write("SEDF", 4);
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(map.bands),
                                   static_cast<std::uint32_t>(map.frames), 64u};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(map.values.data()),
            static_cast<std::streamsize>(map.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_feature_file: write failed for '" + path + "'");
}

inline FeatureMap read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_feature_file: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SEDF", 4) != 0)
    throw std::runtime_error("read_feature_file: '" + path + "' has wrong magic");
  std::uint32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[2] != 64) throw std::runtime_error("read_feature_file: unsupported float width");
  FeatureMap map;
  map.bands = header[0];
  map.frames = header[1];
  map.values.resize(static_cast<std::size_t>(header[0]) * header[1]);
  in.read(reinterpret_cast<char*>(map.values.data()),
          static_cast<std::streamsize>(map.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("read_feature_file: truncated data in '" + path + "'");
  return map;
}

}  // namespace sedkit
