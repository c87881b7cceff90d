#pragma once
// RIFF/WAVE reading (16-bit PCM and 32-bit IEEE float) and 16-bit PCM
// writing. Multi-channel input is averaged to mono.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

struct AudioClip {
  std::vector<double> samples;  // mono, in [-1, 1]
  unsigned sample_rate = 0;

  double duration() const {
    return sample_rate ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

namespace detail {

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace detail

inline AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open '" + path + "'");

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav: '" + path + "' is not RIFF");
  detail::read_u32(in);  // overall size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav: '" + path + "' is not WAVE");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> data;
  bool have_fmt = false, have_data = false;

  while (in && !(have_fmt && have_data)) {
    in.read(tag, 4);
    if (!in) break;
    const std::uint32_t size = detail::read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = detail::read_u16(in);
      channels = detail::read_u16(in);
      rate = detail::read_u32(in);
      detail::read_u32(in);  // byte rate
      detail::read_u16(in);  // block align
      bits = detail::read_u16(in);
      if (size > 16) in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
      have_data = true;
    } else {
      in.ignore(size + (size & 1));  // chunks are word-aligned
    }
  }
  if (!have_fmt || !have_data) throw std::runtime_error("read_wav: '" + path + "' missing fmt or data chunk");
  if (channels == 0 || rate == 0) throw std::runtime_error("read_wav: '" + path + "' has invalid format");

  AudioClip clip;
  clip.sample_rate = rate;
  if (format == 1 && bits == 16) {
    const std::size_t frames = data.size() / (2 * channels);
    clip.samples.resize(frames);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data());
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (std::uint16_t c = 0; c < channels; ++c) {
        const std::size_t off = (i * channels + c) * 2;
        const std::int16_t s = static_cast<std::int16_t>(p[off] | (p[off + 1] << 8));
        acc += static_cast<double>(s) / 32768.0;
      }
      clip.samples[i] = acc / channels;
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t frames = data.size() / (4 * channels);
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (std::uint16_t c = 0; c < channels; ++c) {
        float f;
        std::memcpy(&f, data.data() + (i * channels + c) * 4, 4);
        acc += f;
      }
      clip.samples[i] = acc / channels;
    }
  } else {
    throw std::runtime_error("read_wav: '" + path + "' has unsupported format (PCM16 and float32 only)");
  }
  return clip;
}

inline void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                            unsigned sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav_pcm16: cannot open '" + path + "'");
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  detail::write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_u32(out, 16);
  detail::write_u16(out, 1);  // PCM
  detail::write_u16(out, 1);  // mono
  detail::write_u32(out, sample_rate);
  detail::write_u32(out, sample_rate * 2);
  detail::write_u16(out, 2);
  detail::write_u16(out, 16);
  out.write("data", 4);
  detail::write_u32(out, data_size);
  for (double s : samples) {
    const double clipped = std::max(-1.0, std::min(1.0, s));
    const auto q = static_cast<std::int16_t>(std::lrint(clipped * 32767.0));
    detail::write_u16(out, static_cast<std::uint16_t>(q));
  }
  if (!out) throw std::runtime_error("write_wav_pcm16: write failed for '" + path + "'");
}

}  // namespace sedkit
