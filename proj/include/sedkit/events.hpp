#pragma once
// Shared domain types: event labels, annotated events, frame rolls and
// network activation matrices.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sedkit {

// One annotated sound event instance. Times are seconds from clip start.
struct Event {
  std::string label;
  double onset = 0.0;
  double offset = 0.0;
};

using EventList = std::vector<Event>;

// Ordered set of event labels. The index<->label mapping is fixed at
// construction and shared by rolls, graphs, model outputs and metrics.
class EventVocabulary {
 public:
  EventVocabulary() = default;

  explicit EventVocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto [it, inserted] = index_.emplace(labels_[i], i);
      if (!inserted) throw std::invalid_argument("EventVocabulary: duplicate label '" + labels_[i] + "'");
    }
  }

  // Builds a vocabulary from the labels present in a set of event lists,
  // sorted lexicographically so the index assignment is stable.
  static EventVocabulary from_events(const std::vector<EventList>& clips) {
    std::vector<std::string> labels;
    for (const auto& events : clips)
      for (const auto& e : events)
        if (std::find(labels.begin(), labels.end(), e.label) == labels.end()) labels.push_back(e.label);
    std::sort(labels.begin(), labels.end());
    return EventVocabulary(std::move(labels));
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }

  std::optional<std::size_t> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& label) const {
    auto idx = find(label);
    if (!idx) throw std::invalid_argument("unknown event label '" + label + "'");
    return *idx;
  }

  bool operator==(const EventVocabulary& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binary event-activity matrix, one row per event label, one column per frame.
struct EventRoll {
  std::size_t num_events = 0;
  std::size_t num_frames = 0;
  double frame_shift = 0.020;
  std::vector<std::uint8_t> z;  // row-major num_events x num_frames

  EventRoll() = default;
  EventRoll(std::size_t m, std::size_t t, double shift)
      : num_events(m), num_frames(t), frame_shift(shift), z(m * t, 0) {}

  std::uint8_t& at(std::size_t m, std::size_t t) { return z[m * num_frames + t]; }
  std::uint8_t at(std::size_t m, std::size_t t) const { return z[m * num_frames + t]; }
};

// Frame-wise network output in (0,1), same layout as EventRoll.
struct ActivationMatrix {
  std::size_t num_events = 0;
  std::size_t num_frames = 0;
  std::vector<double> values;  // row-major num_events x num_frames

  ActivationMatrix() = default;
  ActivationMatrix(std::size_t m, std::size_t t) : num_events(m), num_frames(t), values(m * t, 0.0) {}

  double& at(std::size_t m, std::size_t t) { return values[m * num_frames + t]; }
  double at(std::size_t m, std::size_t t) const { return values[m * num_frames + t]; }
};

}  // namespace sedkit
