#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sedkit/postprocess.hpp>
#include <sedkit/rng.hpp>

using namespace sedkit;

namespace {

ActivationMatrix constant_activation(std::size_t m, std::size_t t, double v) {
  ActivationMatrix y(m, t);
  for (auto& x : y.values) x = v;
  return y;
}

}  // namespace

TEST_CASE("adaptive threshold is lambda times the peak, clamped") {
  ThresholdConfig cfg;

  ActivationMatrix y1(1, 3);
  y1.values = {0.2, 1.0, 0.4};
  CHECK(adaptive_threshold(y1, cfg)[0] == doctest::Approx(0.5));

  ActivationMatrix y2(1, 3);
  y2.values = {0.05, 0.1, 0.02};
  CHECK(adaptive_threshold(y2, cfg)[0] == doctest::Approx(0.1));  // clamped to floor

  ActivationMatrix y3 = constant_activation(2, 4, 0.9);
  auto theta = adaptive_threshold(y3, cfg);
  CHECK(theta[0] == doctest::Approx(0.45));
  EventRoll roll = binarize(y3, theta);
  for (auto v : roll.z) CHECK(v == 1);
}

TEST_CASE("fixed mode ignores activations") {
  ThresholdConfig cfg;
  cfg.mode = ThresholdConfig::Mode::Fixed;
  cfg.fixed_value = 0.7;
  ActivationMatrix y = constant_activation(3, 2, 0.95);
  auto theta = adaptive_threshold(y, cfg);
  for (double t : theta) CHECK(t == 0.7);
}

TEST_CASE("threshold config validation") {
  ThresholdConfig bad;
  bad.floor = 0.8;
  bad.ceiling = 0.2;
  ActivationMatrix y = constant_activation(1, 1, 0.5);
  CHECK_THROWS_AS(adaptive_threshold(y, bad), std::invalid_argument);
}

TEST_CASE("binarize rules") {
  SUBCASE("an untrained net at y = 0.5 is fully active under the default thresholds") {
    ActivationMatrix y = constant_activation(2, 5, 0.5);
    auto theta = adaptive_threshold(y, ThresholdConfig{});  // 0.5 * 0.5 = 0.25
    CHECK(theta[0] == doctest::Approx(0.25));
    EventRoll roll = binarize(y, theta);
    for (auto v : roll.z) CHECK(v == 1);
  }

  SUBCASE("activations below the floor threshold stay inactive") {
    ActivationMatrix y = constant_activation(2, 5, 0.05);
    EventRoll roll = binarize(y, adaptive_threshold(y, ThresholdConfig{}));
    for (auto v : roll.z) CHECK(v == 0);
  }

  SUBCASE("y equal to the threshold is inactive") {
    ActivationMatrix y = constant_activation(1, 2, 0.25);
    EventRoll roll = binarize(y, {0.25});
    for (auto v : roll.z) CHECK(v == 0);
  }

  SUBCASE("raising an activation never deactivates a frame under fixed thresholds") {
    Rng rng(7);
    ActivationMatrix y(3, 8);
    for (auto& v : y.values) v = rng.uniform(0.01, 0.99);
    const std::vector<double> theta{0.3, 0.5, 0.7};
    EventRoll before = binarize(y, theta);
    ActivationMatrix raised = y;
    for (auto& v : raised.values) v = std::min(0.999, v + 0.05);
    EventRoll after = binarize(raised, theta);
    for (std::size_t i = 0; i < before.z.size(); ++i)
      if (before.z[i]) CHECK(after.z[i] == 1);
  }
}

TEST_CASE("decode run-length rules") {
  EventVocabulary vocab({"car", "dishes"});

  SUBCASE("all-zero roll decodes to nothing") {
    EventRoll roll(2, 10, 0.020);
    CHECK(decode(roll, vocab).empty());
  }

  SUBCASE("frames 0..49 at 20 ms become a one second event") {
    EventRoll roll(2, 60, 0.020);
    for (std::size_t t = 0; t <= 49; ++t) roll.at(0, t) = 1;
    EventList events = decode(roll, vocab);
    REQUIRE(events.size() == 1);
    CHECK(events[0].label == "car");
    CHECK(events[0].onset == doctest::Approx(0.0));
    CHECK(events[0].offset == doctest::Approx(1.0));
  }

  SUBCASE("a single active frame is dropped by min_duration") {
    EventRoll roll(2, 10, 0.020);
    roll.at(1, 4) = 1;
    CHECK(decode(roll, vocab, 0.1).empty());
    CHECK(decode(roll, vocab, 0.0).size() == 1);
  }

  SUBCASE("decoded events are sorted and never overlap per label") {
    Rng rng(11);
    EventRoll roll(2, 40, 0.020);
    for (auto& v : roll.z) v = rng.bernoulli(0.5) ? 1 : 0;
    EventList events = decode(roll, vocab, 0.0);
    for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i - 1].onset <= events[i].onset);
    for (std::size_t i = 0; i < events.size(); ++i)
      for (std::size_t j = i + 1; j < events.size(); ++j)
        if (events[i].label == events[j].label) {
          const bool disjoint = events[i].offset <= events[j].onset || events[j].offset <= events[i].onset;
          CHECK(disjoint);
        }
  }
}

TEST_CASE("decode(binarize(.)) round-trips rolls with long runs") {
  EventVocabulary vocab({"a", "b", "c"});
  Rng rng(13);
  EventRoll roll(3, 50, 0.020);
  // plant runs of at least 5 frames (0.1 s)
  for (std::size_t m = 0; m < 3; ++m) {
    std::size_t t = rng.uniform_index(10);
    while (t + 5 < 50) {
      const std::size_t len = 5 + rng.uniform_index(8);
      for (std::size_t i = t; i < std::min<std::size_t>(50, t + len); ++i) roll.at(m, i) = 1;
      t += len + 2 + rng.uniform_index(6);
    }
  }
  ActivationMatrix y(3, 50);
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] = roll.z[i] ? 0.9 : 0.05;
  EventRoll rebuilt = binarize(y, std::vector<double>(3, 0.5), 0.020);
  CHECK(rebuilt.z == roll.z);

  EventList events = decode(rebuilt, vocab, 0.1);
  EventRoll back(3, 50, 0.020);
  for (const auto& e : events) {
    const std::size_t m = vocab.index_of(e.label);
    for (std::size_t t = 0; t < 50; ++t) {
      const double center = t * 0.020;
      if (center >= e.onset - 1e-12 && center < e.offset - 1e-12) back.at(m, t) = 1;
    }
  }
  CHECK(back.z == roll.z);
}
