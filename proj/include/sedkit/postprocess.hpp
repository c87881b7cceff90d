#pragma once
// Activation post-processing: per-event thresholds (fixed or adaptive to
// the clip's activation peaks), binarization, and run-length decoding of
// frame rolls into (label, onset, offset) events.

#include <sedkit/events.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

struct ThresholdConfig {
  enum class Mode { Fixed, Adaptive };
  Mode mode = Mode::Adaptive;
  double fixed_value = 0.5;
  double adaptive_lambda = 0.5;  // threshold as a fraction of the per-event max
  double floor = 0.1;
  double ceiling = 0.9;
  double min_duration = 0.1;  // seconds; shorter decoded events are dropped

  void validate() const {
    if (!(0.0 < floor && floor <= ceiling && ceiling < 1.0))
      throw std::invalid_argument("ThresholdConfig: need 0 < floor <= ceiling < 1");
    if (mode == Mode::Fixed && !(fixed_value > 0.0 && fixed_value < 1.0))
      throw std::invalid_argument("ThresholdConfig: fixed_value must be in (0,1)");
    if (min_duration < 0.0) throw std::invalid_argument("ThresholdConfig: negative min_duration");
  }
};

// theta_m = clamp(lambda * max_t y_mt, floor, ceiling).
inline std::vector<double> adaptive_threshold(const ActivationMatrix& y, const ThresholdConfig& cfg = {}) {
  cfg.validate();
  std::vector<double> theta(y.num_events, cfg.fixed_value);
  if (cfg.mode == ThresholdConfig::Mode::Fixed) return theta;
  for (std::size_t m = 0; m < y.num_events; ++m) {
    double peak = 0.0;
    for (std::size_t t = 0; t < y.num_frames; ++t) peak = std::max(peak, y.at(m, t));
    theta[m] = std::min(cfg.ceiling, std::max(cfg.floor, cfg.adaptive_lambda * peak));
  }
  return theta;
}

// roll[m][t] = 1 iff y[m][t] > theta_m; ties stay inactive.
inline EventRoll binarize(const ActivationMatrix& y, const std::vector<double>& theta,
                          double frame_shift = 0.020) {
  if (theta.size() != y.num_events)
    throw std::invalid_argument("binarize: " + std::to_string(theta.size()) + " thresholds for " +
                                std::to_string(y.num_events) + " events");
  EventRoll roll(y.num_events, y.num_frames, frame_shift);
  for (std::size_t m = 0; m < y.num_events; ++m)
    for (std::size_t t = 0; t < y.num_frames; ++t)
      if (y.at(m, t) > theta[m]) roll.at(m, t) = 1;
  return roll;
}

// Maximal runs of active frames become events with onset = start*shift
// and offset = (end+1)*shift; runs shorter than min_duration are dropped.
// Output is sorted by onset (then label) and never overlaps per label.
inline EventList decode(const EventRoll& roll, const EventVocabulary& vocab, double min_duration = 0.1) {
  if (vocab.size() != roll.num_events)
    throw std::invalid_argument("decode: vocabulary size " + std::to_string(vocab.size()) +
                                " does not match roll with " + std::to_string(roll.num_events) + " events");
  EventList events;
  for (std::size_t m = 0; m < roll.num_events; ++m) {
    std::size_t t = 0;
    while (t < roll.num_frames) {
      if (!roll.at(m, t)) {
        ++t;
        continue;
      }
      std::size_t end = t;
      while (end + 1 < roll.num_frames && roll.at(m, end + 1)) ++end;
      const double onset = static_cast<double>(t) * roll.frame_shift;
      const double offset = static_cast<double>(end + 1) * roll.frame_shift;
      if (offset - onset >= min_duration) events.push_back(Event{vocab.label(m), onset, offset});
      t = end + 1;
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.onset != b.onset ? a.onset < b.onset : a.label < b.label;
  });
  return events;
}

}  // namespace sedkit
