#pragma once
// Annotation parsing and serialization, event-roll construction, k-fold
// splits, and a seeded generator of synthetic clips with correlated
// event pairs for desk-scale experiments.

#include <sedkit/events.hpp>
#include <sedkit/features.hpp>
#include <sedkit/rng.hpp>
#include <sedkit/wav.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

struct AnnotatedClip {
  std::string audio_path;
  std::string scene_label;
  EventList events;
  double duration = 0.0;  // seconds; max event offset until audio is loaded
};

// ---------------------------------------------------------------------------
// Annotation TSV: audio_path <tab> scene <tab> onset_s <tab> offset_s
// <tab> label, UTF-8, times with 6 decimal places. Rows are grouped by
// audio_path in first-seen order.
// ---------------------------------------------------------------------------

inline std::vector<AnnotatedClip> parse_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_annotations: cannot open '" + path + "'");

  std::vector<AnnotatedClip> clips;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) cols.push_back(tok);
    if (cols.size() != 5)
      throw std::runtime_error("parse_annotations: line " + std::to_string(line_no) + ": expected 5 columns, got " +
                               std::to_string(cols.size()));
    double onset = 0.0, offset = 0.0;
    try {
      std::size_t used = 0;
      onset = std::stod(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
      offset = std::stod(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error("parse_annotations: line " + std::to_string(line_no) + ": non-numeric time");
    }
    if (!(onset < offset))
      throw std::runtime_error("parse_annotations: line " + std::to_string(line_no) + ": onset " + cols[2] +
                               " is not before offset " + cols[3]);
    if (onset < 0.0)
      throw std::runtime_error("parse_annotations: line " + std::to_string(line_no) + ": negative onset");

    auto [it, inserted] = index.emplace(cols[0], clips.size());
    if (inserted) clips.push_back(AnnotatedClip{cols[0], cols[1], {}, 0.0});
    AnnotatedClip& clip = clips[it->second];
    clip.events.push_back(Event{cols[4], onset, offset});
    clip.duration = std::max(clip.duration, offset);
  }
  return clips;
}

inline void serialize_annotations(const std::string& path, const std::vector<AnnotatedClip>& clips) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("serialize_annotations: cannot open '" + path + "'");
  char buf[64];
  for (const auto& clip : clips)
    for (const auto& e : clip.events) {
      out << clip.audio_path << '\t' << clip.scene_label << '\t';
      std::snprintf(buf, sizeof buf, "%.6f", e.onset);
      out << buf << '\t';
      std::snprintf(buf, sizeof buf, "%.6f", e.offset);
      out << buf << '\t' << e.label << '\n';
    }
  if (!out) throw std::runtime_error("serialize_annotations: write failed for '" + path + "'");
}

inline EventVocabulary vocabulary_of(const std::vector<AnnotatedClip>& clips) {
  std::vector<EventList> lists;
  lists.reserve(clips.size());
  for (const auto& c : clips) lists.push_back(c.events);
  return EventVocabulary::from_events(lists);
}

// ---------------------------------------------------------------------------
// Event rolls
// ---------------------------------------------------------------------------

// Frame t is active for an event iff the frame's reference time t*shift
// (the frame grid point) lies inside [onset, offset). Frame count matches
// feature extraction for the same clip and parameters.
inline EventRoll to_event_roll(const EventList& events, double duration, unsigned sample_rate,
                               const EventVocabulary& vocab, double frame_length = 0.040,
                               double frame_shift = 0.020) {
  const std::size_t n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  const std::size_t len = samples_for(frame_length, sample_rate);
  const std::size_t hop = samples_for(frame_shift, sample_rate);
  const std::size_t t = frame_count(n, len, hop);
  EventRoll roll(vocab.size(), t, frame_shift);
  for (const auto& e : events) {
    const std::size_t m = vocab.index_of(e.label);
    for (std::size_t i = 0; i < t; ++i) {
      const double center = static_cast<double>(i) * frame_shift;
      if (center >= e.onset && center < e.offset) roll.at(m, i) = 1;
    }
  }
  return roll;
}

// ---------------------------------------------------------------------------
// Fold management
// ---------------------------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Disjoint, exhaustive, size-balanced (+/-1) partitions, deterministic
// under the seed. Fold i's test set is the i-th share; train is the rest.
inline std::vector<Fold> make_folds(std::size_t n_clips, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > n_clips)
    throw std::invalid_argument("make_folds: k=" + std::to_string(k) + " with " + std::to_string(n_clips) +
                                " clips");
  std::vector<std::size_t> order(n_clips);
  for (std::size_t i = 0; i < n_clips; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < n_clips; ++i) folds[i % k].test.push_back(order[i]);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(folds[f].test.begin(), folds[f].test.end());
    for (std::size_t g = 0; g < k; ++g)
      if (g != f)
        folds[f].train.insert(folds[f].train.end(), folds[g].test.begin(), folds[g].test.end());
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Synthetic correlated-event scenes
// ---------------------------------------------------------------------------

struct SynthTemplate {
  enum class Kind { Tone, NoiseBand };
  Kind kind = Kind::Tone;
  double freq_lo = 440.0;  // tone frequency, or lower band edge
  double freq_hi = 440.0;  // upper band edge for NoiseBand
};

struct SynthPair {
  std::size_t a = 0;
  std::size_t b = 1;
  double prob = 0.9;  // probability that a clip contains both events
};

// Optional scene partition: a scene owns a subset of the pairs and a pool
// of independent labels. Clips cycle through the scenes, and a clip only
// contains its scene's events, so events of different scenes never
// co-occur (mirroring how real acoustic scenes restrict the vocabulary).
struct SynthScene {
  std::string name;
  std::vector<std::size_t> pair_ids;      // indices into SynthSpec::pairs
  std::vector<std::size_t> extra_labels;  // independent labels of this scene
};

struct SynthSpec {
  std::vector<std::string> labels;
  std::vector<SynthTemplate> templates;  // one per label
  std::vector<SynthPair> pairs;
  std::vector<std::string> scenes{"synthetic"};
  std::vector<SynthScene> scene_partition;  // empty: all pairs in every clip
  std::size_t extra_events_min = 0;  // independent events per clip, drawn
  std::size_t extra_events_max = 1;  // from labels outside every pair
  double event_duration_min = 0.3;
  double event_duration_max = 0.7;
  double pair_time_jitter = 0.05;      // co-occurring pairs share timing up to this
  bool shared_event_duration = false;  // one duration draw per clip for all events
  double clip_duration = 1.0;
  unsigned sample_rate = 16000;
  double event_amplitude = 0.25;
  double noise_floor = 2e-3;
  std::uint64_t seed = 1;

  void validate() const {
    if (labels.empty()) throw std::invalid_argument("SynthSpec: no labels");
    if (templates.size() != labels.size())
      throw std::invalid_argument("SynthSpec: need one template per label");
    for (const auto& p : pairs) {
      if (p.a >= labels.size() || p.b >= labels.size() || p.a == p.b)
        throw std::invalid_argument("SynthSpec: bad pair indices");
      if (p.prob < 0.0 || p.prob > 1.0) throw std::invalid_argument("SynthSpec: pair probability outside [0,1]");
    }
    for (const auto& s : scene_partition) {
      for (auto pid : s.pair_ids)
        if (pid >= pairs.size()) throw std::invalid_argument("SynthSpec: scene pair index out of range");
      for (auto l : s.extra_labels)
        if (l >= labels.size()) throw std::invalid_argument("SynthSpec: scene label out of range");
    }
    if (event_duration_min <= 0.0 || event_duration_max < event_duration_min ||
        event_duration_max > clip_duration)
      throw std::invalid_argument("SynthSpec: bad event duration range");
    if (extra_events_max < extra_events_min) throw std::invalid_argument("SynthSpec: bad extra event range");
  }

  // M labels with tone templates spread across the mel axis and the first
  // two disjoint pairs correlated at `prob`.
  static SynthSpec basic(std::size_t m, double prob = 0.9, std::uint64_t seed = 1) {
    SynthSpec spec;
    spec.seed = seed;
    const double mel_max = MelFilterbank::hz_to_mel(7000.0);
    for (std::size_t i = 0; i < m; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "event%02zu", i);
      spec.labels.emplace_back(name);
      const double hz =
          MelFilterbank::mel_to_hz(mel_max * static_cast<double>(i + 1) / static_cast<double>(m + 1));
      spec.templates.push_back(SynthTemplate{SynthTemplate::Kind::Tone, hz, hz});
    }
    if (m >= 2) spec.pairs.push_back(SynthPair{0, 1, prob});
    if (m >= 4) spec.pairs.push_back(SynthPair{2, 3, prob});
    return spec;
  }
};

namespace detail {

inline void render_event(std::vector<double>& samples, const SynthTemplate& tpl, double onset,
                         double duration, double amplitude, unsigned rate, Rng& rng) {
  const std::size_t start = static_cast<std::size_t>(std::llround(onset * rate));
  const std::size_t count = static_cast<std::size_t>(std::llround(duration * rate));
  const std::size_t fade = std::min<std::size_t>(count / 4, rate / 100);  // 10 ms ramps

  std::vector<std::pair<double, double>> partials;  // (freq, phase)
  if (tpl.kind == SynthTemplate::Kind::Tone) {
    partials.emplace_back(tpl.freq_lo, rng.uniform(0.0, 2.0 * std::numbers::pi));
  } else {
    for (int i = 0; i < 8; ++i)
      partials.emplace_back(rng.uniform(tpl.freq_lo, tpl.freq_hi),
                            rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  const double gain = amplitude / std::sqrt(static_cast<double>(partials.size()));
  for (std::size_t i = 0; i < count && start + i < samples.size(); ++i) {
    double env = 1.0;
    if (fade > 0) {
      if (i < fade) env = static_cast<double>(i) / fade;
      if (count - i <= fade) env = std::min(env, static_cast<double>(count - i) / fade);
    }
    double v = 0.0;
    for (const auto& [freq, phase] : partials)
      v += std::sin(2.0 * std::numbers::pi * freq * i / rate + phase);
    samples[start + i] += gain * env * v;
  }
}

}  // namespace detail

// Generates n clips under the spec, writes one WAV per clip plus
// annotations.tsv into out_dir, and returns the annotations. Each clip is
// generated from Rng(seed + clip index), so output is seed-deterministic
// and clips are independent of generation order.
inline std::vector<AnnotatedClip> synth_generate(const SynthSpec& spec, std::size_t n_clips,
                                                 const std::string& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);

  std::vector<std::uint8_t> in_pair(spec.labels.size(), 0);
  for (const auto& p : spec.pairs) {
    in_pair[p.a] = 1;
    in_pair[p.b] = 1;
  }
  std::vector<std::size_t> free_labels;
  for (std::size_t i = 0; i < spec.labels.size(); ++i)
    if (!in_pair[i]) free_labels.push_back(i);

  std::vector<AnnotatedClip> clips;
  clips.reserve(n_clips);
  const std::size_t n_samples = static_cast<std::size_t>(std::llround(spec.clip_duration * spec.sample_rate));

  for (std::size_t c = 0; c < n_clips; ++c) {
    Rng rng(spec.seed + c);
    AnnotatedClip clip;
    char name[32];
    std::snprintf(name, sizeof name, "clip_%04zu.wav", c);
    clip.audio_path = name;
    clip.duration = spec.clip_duration;

    const SynthScene* scene = nullptr;
    if (!spec.scene_partition.empty()) {
      scene = &spec.scene_partition[c % spec.scene_partition.size()];
      clip.scene_label = scene->name;
    } else {
      clip.scene_label = spec.scenes[c % spec.scenes.size()];
    }

    struct Placed {
      std::size_t label;
      double onset, duration;
    };
    std::vector<Placed> placed;
    const double clip_shared_duration =
        spec.shared_event_duration ? rng.uniform(spec.event_duration_min, spec.event_duration_max) : 0.0;

    auto place = [&](std::size_t label) {
      const double dur = spec.shared_event_duration
                             ? clip_shared_duration
                             : rng.uniform(spec.event_duration_min, spec.event_duration_max);
      const double onset = rng.uniform(0.0, spec.clip_duration - dur);
      placed.push_back(Placed{label, onset, dur});
    };

    for (std::size_t pid = 0; pid < spec.pairs.size(); ++pid) {
      if (scene && std::find(scene->pair_ids.begin(), scene->pair_ids.end(), pid) ==
                       scene->pair_ids.end())
        continue;
      const SynthPair& pair = spec.pairs[pid];
      const double u = rng.uniform();
      if (u < pair.prob) {
        place(pair.a);
        // partner shares the timing up to a small jitter
        const Placed& lead = placed.back();
        double onset = lead.onset + rng.uniform(-spec.pair_time_jitter, spec.pair_time_jitter);
        onset = std::max(0.0, std::min(onset, spec.clip_duration - lead.duration));
        placed.push_back(Placed{pair.b, onset, lead.duration});
      } else if (u < pair.prob + (1.0 - pair.prob) / 2.0) {
        place(pair.a);
      } else {
        place(pair.b);
      }
    }

    const std::vector<std::size_t>& pool_source = scene ? scene->extra_labels : free_labels;
    if (!pool_source.empty() && spec.extra_events_max > 0) {
      const std::size_t extra =
          spec.extra_events_min + rng.uniform_index(spec.extra_events_max - spec.extra_events_min + 1);
      std::vector<std::size_t> pool = pool_source;
      for (std::size_t i = 0; i < extra && !pool.empty(); ++i) {
        const std::size_t pick = rng.uniform_index(pool.size());
        place(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }

    std::vector<double> samples(n_samples);
    for (auto& s : samples) s = rng.uniform(-1.0, 1.0) * spec.noise_floor;
    for (const auto& ev : placed) {
      detail::render_event(samples, spec.templates[ev.label], ev.onset, ev.duration,
                           spec.event_amplitude, spec.sample_rate, rng);
      clip.events.push_back(Event{spec.labels[ev.label], ev.onset, ev.onset + ev.duration});
    }
    // headroom: rescale rather than clip if the sum overshoots
    double peak = 0.0;
    for (double s : samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.99)
      for (auto& s : samples) s *= 0.99 / peak;

    std::sort(clip.events.begin(), clip.events.end(),
              [](const Event& a, const Event& b) { return a.onset < b.onset; });
    write_wav_pcm16((std::filesystem::path(out_dir) / clip.audio_path).string(), samples,
                    spec.sample_rate);
    clips.push_back(std::move(clip));
  }

  serialize_annotations((std::filesystem::path(out_dir) / "annotations.tsv").string(), clips);
  return clips;
}

// Loads an annotation TSV and the referenced audio, resolving relative
// audio paths against the TSV's directory. Durations are taken from the
// audio files.
struct LoadedClip {
  AnnotatedClip info;
  AudioClip audio;
};

inline std::vector<LoadedClip> load_dataset(const std::string& annotation_path) {
  const auto base = std::filesystem::path(annotation_path).parent_path();
  std::vector<LoadedClip> out;
  for (auto& clip : parse_annotations(annotation_path)) {
    LoadedClip lc;
    std::filesystem::path p(clip.audio_path);
    if (p.is_relative()) p = base / p;
    lc.audio = read_wav(p.string());
    clip.duration = lc.audio.duration();
    lc.info = std::move(clip);
    out.push_back(std::move(lc));
  }
  return out;
}

}  // namespace sedkit
