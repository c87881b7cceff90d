#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sedkit/metrics.hpp>
#include <sedkit/rng.hpp>

#include <filesystem>
#include <fstream>
#include <set>

using namespace sedkit;

namespace {

// Brute-force oracle: enumerates every (segment, label) pair explicitly
// via set comparisons, independent of the counting code under test.
SegmentCounts oracle_counts(const std::vector<ClipEvents>& ref, const std::vector<ClipEvents>& hyp,
                            const EventVocabulary& vocab, double segment) {
  SegmentCounts total;
  for (const auto& r : ref) {
    const ClipEvents* h = nullptr;
    for (const auto& cand : hyp)
      if (cand.id == r.id) h = &cand;
    REQUIRE(h != nullptr);
    const std::size_t k = static_cast<std::size_t>(std::ceil(r.duration / segment));
    for (std::size_t s = 0; s < k; ++s) {
      std::set<std::string> active_ref, active_hyp;
      const double lo = s * segment, hi = (s + 1) * segment;
      for (const auto& e : r.events)
        if (e.onset < hi && e.offset > lo) active_ref.insert(e.label);
      for (const auto& e : h->events)
        if (e.onset < hi && e.offset > lo) active_hyp.insert(e.label);
      long long tp = 0, fp = 0, fn = 0;
      for (const auto& label : vocab.labels()) {
        const bool in_ref = active_ref.count(label) > 0;
        const bool in_hyp = active_hyp.count(label) > 0;
        if (in_ref && in_hyp)
          ++tp;
        else if (in_hyp)
          ++fp;
        else if (in_ref)
          ++fn;
      }
      total.tp += tp;
      total.fp += fp;
      total.fn += fn;
      total.n_ref += static_cast<long long>(active_ref.size());
      const long long subs = std::min(fn, fp);
      total.substitutions += subs;
      total.deletions += fn - subs;
      total.insertions += fp - subs;
    }
  }
  return total;
}

ClipEvents random_clip(const std::string& id, const EventVocabulary& vocab, Rng& rng) {
  ClipEvents clip;
  clip.id = id;
  clip.scene = rng.bernoulli(0.5) ? "alpha" : "beta";
  clip.duration = 0.4 + rng.uniform(0.0, 0.4);
  const std::size_t n = rng.uniform_index(5);
  for (std::size_t i = 0; i < n; ++i) {
    Event e;
    e.label = vocab.label(rng.uniform_index(vocab.size()));
    e.onset = rng.uniform(0.0, clip.duration - 0.05);
    e.offset = e.onset + rng.uniform(0.02, clip.duration - e.onset);
    clip.events.push_back(e);
  }
  return clip;
}

}  // namespace

TEST_CASE("segment rasterization boundaries") {
  EventVocabulary vocab({"a"});

  SUBCASE("empty list gives a zero grid") {
    auto grid = segment_rasterize({}, 0.2, vocab);
    CHECK(grid.size() == 5);
    for (auto v : grid) CHECK(v == 0);
  }

  SUBCASE("an event of 0.10 s covers segments 0, 1 and 2") {
    auto grid = segment_rasterize({{"a", 0.0, 0.10}}, 0.2, vocab);
    CHECK(grid[0] == 1);
    CHECK(grid[1] == 1);
    CHECK(grid[2] == 1);  // overlaps by 0.02
    CHECK(grid[3] == 0);
    CHECK(grid[4] == 0);
  }

  SUBCASE("an event exactly on segment boundaries activates only its own segment") {
    auto grid = segment_rasterize({{"a", 0.04, 0.08}}, 0.2, vocab);
    CHECK(grid[0] == 0);
    CHECK(grid[1] == 1);
    CHECK(grid[2] == 0);
  }

  SUBCASE("unknown labels are rejected") {
    CHECK_THROWS_AS(segment_rasterize({{"b", 0.0, 0.1}}, 0.2, vocab), std::invalid_argument);
  }
}

TEST_CASE("evaluate hand cases") {
  EventVocabulary vocab({"A", "B", "C"});

  SUBCASE("perfect prediction") {
    std::vector<ClipEvents> ref{{"c1", "s", 0.2, {{"A", 0.0, 0.1}, {"B", 0.05, 0.2}}}};
    EvalResult r = evaluate(ref, ref, vocab);
    CHECK(r.f1 == doctest::Approx(100.0));
    REQUIRE(r.er.has_value());
    CHECK(*r.er == doctest::Approx(0.0));
  }

  SUBCASE("empty hypothesis is all deletions") {
    std::vector<ClipEvents> ref{{"c1", "s", 0.2, {{"A", 0.0, 0.2}}}};
    std::vector<ClipEvents> hyp{{"c1", "s", 0.2, {}}};
    EvalResult r = evaluate(ref, hyp, vocab);
    CHECK(r.f1 == doctest::Approx(0.0));
    REQUIRE(r.er.has_value());
    CHECK(*r.er == doctest::Approx(1.0));
    CHECK(r.counts.deletions == r.counts.fn);
    CHECK(r.counts.insertions == 0);
  }

  SUBCASE("one segment with ref {A,B} and hyp {A,C}") {
    std::vector<ClipEvents> ref{{"c1", "s", 0.04, {{"A", 0.0, 0.04}, {"B", 0.0, 0.04}}}};
    std::vector<ClipEvents> hyp{{"c1", "s", 0.04, {{"A", 0.0, 0.04}, {"C", 0.0, 0.04}}}};
    EvalResult r = evaluate(ref, hyp, vocab);
    CHECK(r.counts.tp == 1);
    CHECK(r.counts.fp == 1);
    CHECK(r.counts.fn == 1);
    CHECK(r.counts.substitutions == 1);
    CHECK(r.counts.deletions == 0);
    CHECK(r.counts.insertions == 0);
    CHECK(r.f1 == doctest::Approx(50.0));
    REQUIRE(r.er.has_value());
    CHECK(*r.er == doctest::Approx(0.5));
  }

  SUBCASE("empty reference and empty hypothesis scores 100% with undefined ER") {
    std::vector<ClipEvents> ref{{"c1", "s", 0.2, {}}};
    EvalResult r = evaluate(ref, ref, vocab);
    CHECK(r.f1 == doctest::Approx(100.0));
    CHECK(!r.er.has_value());
  }

  SUBCASE("error rate can exceed one on pure insertions") {
    std::vector<ClipEvents> ref{{"c1", "s", 0.2, {{"A", 0.0, 0.04}}}};
    std::vector<ClipEvents> hyp{{"c1", "s", 0.2, {{"B", 0.0, 0.2}, {"C", 0.0, 0.2}}}};
    EvalResult r = evaluate(ref, hyp, vocab);
    REQUIRE(r.er.has_value());
    CHECK(*r.er > 1.0);
  }
}

TEST_CASE("evaluate equals the brute-force oracle on random pairs") {
  EventVocabulary vocab({"a", "b", "c", "d"});
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClipEvents> ref, hyp;
    const std::size_t clips = 1 + rng.uniform_index(3);
    for (std::size_t i = 0; i < clips; ++i) {
      ClipEvents r = random_clip("clip" + std::to_string(i), vocab, rng);
      ClipEvents h = random_clip("clip" + std::to_string(i), vocab, rng);
      h.duration = r.duration;
      h.scene = r.scene;
      ref.push_back(r);
      hyp.push_back(h);
    }
    EvalResult got = evaluate(ref, hyp, vocab);
    SegmentCounts want = oracle_counts(ref, hyp, vocab, kDefaultSegmentLength);
    CHECK(got.counts.tp == want.tp);
    CHECK(got.counts.fp == want.fp);
    CHECK(got.counts.fn == want.fn);
    CHECK(got.counts.substitutions == want.substitutions);
    CHECK(got.counts.deletions == want.deletions);
    CHECK(got.counts.insertions == want.insertions);
    CHECK(got.counts.n_ref == want.n_ref);
    CHECK(got.counts.tp + got.counts.fn == got.counts.n_ref);
  }
}

TEST_CASE("per-event results and relabeling symmetry") {
  EventVocabulary vocab({"x", "y"});
  std::vector<ClipEvents> ref{{"c1", "s", 0.2, {{"x", 0.0, 0.2}, {"y", 0.0, 0.1}}}};
  std::vector<ClipEvents> hyp{{"c1", "s", 0.2, {{"x", 0.0, 0.2}}}};

  auto table = evaluate_per_event(ref, hyp, vocab);
  REQUIRE(table.size() == 2);
  CHECK(table[0].label == "x");
  CHECK(table[0].f1 == doctest::Approx(100.0));
  CHECK(table[1].f1 == doctest::Approx(0.0));
  CHECK(!table[0].absent);

  // a label with no activity on either side is flagged
  EventVocabulary vocab3({"x", "y", "ghost"});
  auto table3 = evaluate_per_event(ref, hyp, vocab3);
  bool found_ghost = false;
  for (const auto& row : table3)
    if (row.label == "ghost") {
      found_ghost = true;
      CHECK(row.absent);
      CHECK(row.f1 == 0.0);
    }
  CHECK(found_ghost);

  // permuting the vocabulary permutes rows but not the micro scores
  EventVocabulary swapped({"y", "x"});
  EvalResult a = evaluate(ref, hyp, vocab);
  EvalResult b = evaluate(ref, hyp, swapped);
  CHECK(a.f1 == b.f1);
  REQUIRE(a.er.has_value());
  REQUIRE(b.er.has_value());
  CHECK(*a.er == *b.er);
  auto ta = evaluate_per_event(ref, hyp, vocab);
  auto tb = evaluate_per_event(ref, hyp, swapped);
  CHECK(ta[0].f1 == tb[1].f1);
  CHECK(ta[1].f1 == tb[0].f1);
}

TEST_CASE("per-event disjoint errors match a per-label recount") {
  EventVocabulary vocab({"p", "q"});
  Rng rng(19);
  std::vector<ClipEvents> ref, hyp;
  for (int i = 0; i < 5; ++i) {
    ClipEvents r = random_clip("c" + std::to_string(i), vocab, rng);
    ClipEvents h = random_clip("c" + std::to_string(i), vocab, rng);
    h.duration = r.duration;
    ref.push_back(r);
    hyp.push_back(h);
  }
  auto table = evaluate_per_event(ref, hyp, vocab);
  for (const auto& row : table) {
    // recount with a single-label vocabulary
    EventVocabulary solo({row.label});
    std::vector<ClipEvents> ref1 = ref, hyp1 = hyp;
    for (auto& c : ref1) {
      EventList kept;
      for (const auto& e : c.events)
        if (e.label == row.label) kept.push_back(e);
      c.events = kept;
    }
    for (auto& c : hyp1) {
      EventList kept;
      for (const auto& e : c.events)
        if (e.label == row.label) kept.push_back(e);
      c.events = kept;
    }
    EvalResult solo_result = evaluate(ref1, hyp1, solo);
    CHECK(row.counts.tp == solo_result.counts.tp);
    CHECK(row.counts.fp == solo_result.counts.fp);
    CHECK(row.counts.fn == solo_result.counts.fn);
  }
}

TEST_CASE("report csv contains overall, per-event and per-scene sections") {
  EventVocabulary vocab({"a", "b"});
  std::vector<ClipEvents> ref{{"c1", "home", 0.2, {{"a", 0.0, 0.2}}},
                              {"c2", "office", 0.2, {{"b", 0.0, 0.2}}}};
  EvalResult r = evaluate(ref, ref, vocab);
  auto table = evaluate_per_event(ref, ref, vocab);
  const auto path = std::filesystem::temp_directory_path() / "sedkit_report_test.csv";
  write_report_csv(path.string(), r, table);

  std::ifstream in(path);
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(contents.find("overall,micro,100.0000") != std::string::npos);
  CHECK(contents.find("event,a") != std::string::npos);
  CHECK(contents.find("scene,home") != std::string::npos);
  CHECK(contents.find("scene,macro") != std::string::npos);
  std::filesystem::remove(path);
}
