#pragma once
// Segment-based evaluation: reference and hypothesis event lists are
// rasterized onto fixed-length segments (40 ms by default) and compared
// per (segment, label). Reports micro-averaged F1 and error rate with the
// substitution/deletion/insertion decomposition, per-event F1, and
// per-scene macro F1.

#include <sedkit/events.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedkit {

inline constexpr double kDefaultSegmentLength = 0.040;

struct SegmentCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long substitutions = 0;
  long long deletions = 0;
  long long insertions = 0;
  long long n_ref = 0;  // total active reference segment-labels

  void merge(const SegmentCounts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    substitutions += other.substitutions;
    deletions += other.deletions;
    insertions += other.insertions;
    n_ref += other.n_ref;
  }
};

inline double f1_percent(const SegmentCounts& c) {
  const long long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 100.0;  // empty reference and empty hypothesis
  return 100.0 * 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline std::optional<double> error_rate(const SegmentCounts& c) {
  if (c.n_ref == 0) return std::nullopt;
  return static_cast<double>(c.substitutions + c.deletions + c.insertions) / static_cast<double>(c.n_ref);
}

// Segment k is active for a label iff some event interval overlaps
// (k*seg, (k+1)*seg) with positive length; touching a boundary does not
// count. K = ceil(duration / seg).
inline std::vector<std::uint8_t> segment_rasterize(const EventList& events, double clip_duration,
                                                   const EventVocabulary& vocab,
                                                   double segment = kDefaultSegmentLength) {
  if (segment <= 0.0) throw std::invalid_argument("segment_rasterize: segment length must be positive");
  const std::size_t k = static_cast<std::size_t>(std::ceil(clip_duration / segment));
  std::vector<std::uint8_t> grid(vocab.size() * k, 0);
  for (const auto& e : events) {
    const std::size_t m = vocab.index_of(e.label);
    for (std::size_t s = 0; s < k; ++s) {
      const double lo = static_cast<double>(s) * segment;
      const double hi = static_cast<double>(s + 1) * segment;
      if (e.onset < hi && e.offset > lo) grid[m * k + s] = 1;
    }
  }
  return grid;
}

struct ClipEvents {
  std::string id;
  std::string scene;
  double duration = 0.0;
  EventList events;
};

namespace detail {

inline SegmentCounts count_clip(const ClipEvents& ref, const ClipEvents& hyp, const EventVocabulary& vocab,
                                double segment, std::vector<SegmentCounts>* per_event) {
  const auto ref_grid = segment_rasterize(ref.events, ref.duration, vocab, segment);
  const auto hyp_grid = segment_rasterize(hyp.events, ref.duration, vocab, segment);
  const std::size_t m = vocab.size();
  const std::size_t k = m ? ref_grid.size() / m : 0;

  SegmentCounts total;
  for (std::size_t s = 0; s < k; ++s) {
    long long seg_fp = 0, seg_fn = 0;
    for (std::size_t mm = 0; mm < m; ++mm) {
      const bool r = ref_grid[mm * k + s], h = hyp_grid[mm * k + s];
      SegmentCounts* ev = per_event ? &(*per_event)[mm] : nullptr;
      if (r) {
        ++total.n_ref;
        if (ev) ++ev->n_ref;
      }
      if (r && h) {
        ++total.tp;
        if (ev) ++ev->tp;
      } else if (h) {
        ++total.fp;
        ++seg_fp;
        if (ev) ++ev->fp;
      } else if (r) {
        ++total.fn;
        ++seg_fn;
        if (ev) ++ev->fn;
      }
    }
    // per-segment decomposition: substitutions pair up misses with false
    // alarms, the rest are deletions or insertions
    const long long subs = std::min(seg_fn, seg_fp);
    total.substitutions += subs;
    total.deletions += seg_fn - subs;
    total.insertions += seg_fp - subs;
  }
  return total;
}

}  // namespace detail

struct EvalResult {
  SegmentCounts counts;
  double f1 = 0.0;                     // percent
  std::optional<double> er;            // undefined when the reference is empty
  std::vector<SegmentCounts> per_event;
  std::map<std::string, SegmentCounts> per_scene;
};

// Micro-averaged segment metrics over matched clip lists. Clips are
// matched by id; both sides must cover the same clip set.
inline EvalResult evaluate(const std::vector<ClipEvents>& ref, const std::vector<ClipEvents>& hyp,
                           const EventVocabulary& vocab, double segment = kDefaultSegmentLength) {
  std::map<std::string, const ClipEvents*> hyp_index;
  for (const auto& h : hyp) hyp_index[h.id] = &h;
  if (hyp.size() != ref.size())
    throw std::invalid_argument("evaluate: " + std::to_string(ref.size()) + " reference clips vs " +
                                std::to_string(hyp.size()) + " hypothesis clips");

  EvalResult result;
  result.per_event.assign(vocab.size(), SegmentCounts{});
  for (const auto& r : ref) {
    auto it = hyp_index.find(r.id);
    if (it == hyp_index.end())
      throw std::invalid_argument("evaluate: no hypothesis for clip '" + r.id + "'");
    const SegmentCounts clip = detail::count_clip(r, *it->second, vocab, segment, &result.per_event);
    result.counts.merge(clip);
    result.per_scene[r.scene].merge(clip);
  }
  result.f1 = f1_percent(result.counts);
  result.er = error_rate(result.counts);
  return result;
}

struct PerEventF1 {
  std::string label;
  double f1 = 0.0;
  bool absent = false;  // no reference and no hypothesis activity
  SegmentCounts counts;
};

inline std::vector<PerEventF1> evaluate_per_event(const std::vector<ClipEvents>& ref,
                                                  const std::vector<ClipEvents>& hyp,
                                                  const EventVocabulary& vocab,
                                                  double segment = kDefaultSegmentLength) {
  const EvalResult result = evaluate(ref, hyp, vocab, segment);
  std::vector<PerEventF1> table;
  for (std::size_t m = 0; m < vocab.size(); ++m) {
    PerEventF1 row;
    row.label = vocab.label(m);
    row.counts = result.per_event[m];
    // single-label reduction: no cross-label substitutions
    row.counts.deletions = row.counts.fn;
    row.counts.insertions = row.counts.fp;
    const auto& c = row.counts;
    if (c.tp == 0 && c.fp == 0 && c.fn == 0) {
      row.absent = true;
      row.f1 = 0.0;
    } else {
      row.f1 = f1_percent(c);
    }
    table.push_back(row);
  }
  return table;
}

// Mean of per-scene micro F1 scores.
inline double macro_scene_f1(const EvalResult& result) {
  if (result.per_scene.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& [scene, counts] : result.per_scene) acc += f1_percent(counts);
  return acc / static_cast<double>(result.per_scene.size());
}

// Report CSV: an overall section, a per-event section, and a per-scene
// section when more than one scene label is present.
inline void write_report_csv(const std::string& path, const EvalResult& result,
                             const std::vector<PerEventF1>& per_event) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_csv: cannot open '" + path + "'");
  char buf[160];
  out << "section,name,f1_percent,error_rate,tp,fp,fn,substitutions,deletions,insertions,n_ref\n";
  const auto row = [&](const char* section, const std::string& name, double f1,
                       const std::optional<double>& er, const SegmentCounts& c) {
    if (er)
      std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.6f,%lld,%lld,%lld,%lld,%lld,%lld,%lld\n", section,
                    name.c_str(), f1, *er, c.tp, c.fp, c.fn, c.substitutions, c.deletions, c.insertions,
                    c.n_ref);
    else
      std::snprintf(buf, sizeof buf, "%s,%s,%.4f,undefined,%lld,%lld,%lld,%lld,%lld,%lld,%lld\n", section,
                    name.c_str(), f1, c.tp, c.fp, c.fn, c.substitutions, c.deletions, c.insertions, c.n_ref);
    out << buf;
  };
  row("overall", "micro", result.f1, result.er, result.counts);
  for (const auto& pe : per_event)
    row("event", pe.label + (pe.absent ? " (absent)" : ""), pe.f1, error_rate(pe.counts), pe.counts);
  if (result.per_scene.size() > 1) {
    for (const auto& [scene, counts] : result.per_scene)
      row("scene", scene, f1_percent(counts), error_rate(counts), counts);
    std::snprintf(buf, sizeof buf, "scene,macro,%.4f,,,,,,,,\n", macro_scene_f1(result));
    out << buf;
  }
  if (!out) throw std::runtime_error("write_report_csv: write failed for '" + path + "'");
}

}  // namespace sedkit
