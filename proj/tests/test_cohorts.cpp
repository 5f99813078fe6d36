#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "c2al/cohorts.hpp"
#include "c2al/rng.hpp"
#include "oracles.hpp"

using namespace c2al;

namespace {

// Histogram shaped directly from a discrete distribution: counts proportional
// to the probabilities.
PredHistogram from_dist(const std::vector<double>& probs, int scale = 100000) {
  std::vector<double> preds;
  const int bins = static_cast<int>(probs.size());
  for (int b = 0; b < bins; ++b) {
    const double center = (b + 0.5) / bins;
    const int copies = static_cast<int>(std::llround(probs[b] * scale));
    preds.insert(preds.end(), copies, center);
  }
  return histogram(preds, bins);
}

PredHistogram random_hist(int bins, Rng& rng) {
  std::vector<double> preds;
  const int n = 200 + static_cast<int>(rng.below(200));
  preds.reserve(n);
  for (int i = 0; i < n; ++i) {
    preds.push_back(rng.uniform());
  }
  return histogram(preds, bins);
}

}  // namespace

TEST_CASE("histogram bin placement") {
  // all predictions at 0.5 with two bins land in the upper bin
  std::vector<double> half(10, 0.5);
  const PredHistogram h = histogram(half, 2);
  CHECK(h.normalized[0] == 0.0);
  CHECK(h.normalized[1] == 1.0);

  // a uniform grid of bin centers fills every bin equally
  std::vector<double> grid;
  for (int b = 0; b < 64; ++b) {
    grid.push_back((b + 0.5) / 64.0);
  }
  const PredHistogram u = histogram(grid, 64);
  for (int b = 0; b < 64; ++b) {
    CHECK(u.normalized[b] == doctest::Approx(1.0 / 64).epsilon(1e-12));
  }

  const PredHistogram q = histogram(std::vector<double>{0.1, 0.9, 0.9, 0.9}, 2);
  CHECK(q.normalized[0] == doctest::Approx(0.25));
  CHECK(q.normalized[1] == doctest::Approx(0.75));

  // 1.0 falls into the last bin
  const PredHistogram one = histogram(std::vector<double>{1.0}, 4);
  CHECK(one.counts[3] == 1);

  CHECK_THROWS_AS(histogram(std::vector<double>{}, 4), ContractError);
  CHECK_THROWS_AS(histogram(std::vector<double>{0.5}, 1), ContractError);
  CHECK_THROWS_AS(histogram(std::vector<double>{1.5}, 4), ContractError);
}

TEST_CASE("kl closed forms and asymmetry") {
  const PredHistogram point = from_dist({1.0, 0.0});
  const PredHistogram even = from_dist({0.5, 0.5});
  CHECK(kl(point, point) <= 1e-9);
  CHECK(kl(point, even) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(kl(point, even) != kl(even, point));
  CHECK(kl(even, point) > kl(point, even));

  PredHistogram wrong = even;
  wrong.bins = 3;
  CHECK_THROWS_AS(kl(point, wrong), ContractError);
}

TEST_CASE("js distance closed forms") {
  const PredHistogram a = from_dist({1.0, 0.0});
  const PredHistogram b = from_dist({0.0, 1.0});
  CHECK(js_distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(js_distance(a, b) == doctest::Approx(1.0).epsilon(1e-6));

  const PredHistogram p = from_dist({0.75, 0.25});
  const PredHistogram q = from_dist({0.25, 0.75});
  CHECK(js_distance(p, q) ==
        doctest::Approx(oracle::js_distance_exact({0.75, 0.25}, {0.25, 0.75}))
            .epsilon(1e-9));
}

TEST_CASE("wasserstein closed forms and shift sensitivity") {
  const PredHistogram a = from_dist({1.0, 0.0});
  const PredHistogram b = from_dist({0.0, 1.0});
  CHECK(wasserstein1(a, a) == 0.0);
  CHECK(wasserstein1(a, b) == doctest::Approx(0.5).epsilon(1e-9));

  // shifting a distribution by one bin moves mass by exactly bin_width
  const std::vector<double> base = {0.2, 0.5, 0.3, 0.0};
  const std::vector<double> shifted = {0.0, 0.2, 0.5, 0.3};
  const PredHistogram hb = from_dist(base);
  const PredHistogram hs = from_dist(shifted);
  CHECK(wasserstein1(hb, hs) ==
        doctest::Approx(oracle::wasserstein1_exact(base, shifted)).epsilon(1e-9));
  CHECK(oracle::wasserstein1_exact(base, shifted) == doctest::Approx(0.25));

  // monotone under increasing shift
  const PredHistogram h2 = from_dist({0.0, 0.0, 0.2, 0.5, 0.3, 0.0});
  const PredHistogram h1 = from_dist({0.0, 0.2, 0.5, 0.3, 0.0, 0.0});
  const PredHistogram h0 = from_dist({0.2, 0.5, 0.3, 0.0, 0.0, 0.0});
  CHECK(wasserstein1(h0, h2) > wasserstein1(h0, h1));
}

TEST_CASE("cosine similarity closed forms") {
  const PredHistogram a = from_dist({1.0, 0.0});
  const PredHistogram b = from_dist({0.0, 1.0});
  const PredHistogram even = from_dist({0.5, 0.5});
  CHECK(cosine_sim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_sim(a, b) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_sim(even, a) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("divergences agree with exact values on constructed distributions") {
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {
      {{0.5, 0.5}, {0.9, 0.1}},
      {{0.3, 0.7}, {0.7, 0.3}},
      {{0.25, 0.25, 0.25, 0.25}, {0.1, 0.2, 0.3, 0.4}},
      {{0.6, 0.2, 0.1, 0.1}, {0.1, 0.1, 0.2, 0.6}},
      {{0.05, 0.9, 0.05}, {0.9, 0.05, 0.05}},
      {{0.2, 0.2, 0.2, 0.2, 0.2}, {0.4, 0.3, 0.2, 0.05, 0.05}},
  };
  for (const auto& [pv, qv] : cases) {
    const PredHistogram p = from_dist(pv);
    const PredHistogram q = from_dist(qv);
    CHECK(kl(p, q) == doctest::Approx(oracle::kl_exact(pv, qv)).epsilon(1e-6));
    CHECK(js_distance(p, q) ==
          doctest::Approx(oracle::js_distance_exact(pv, qv)).epsilon(1e-9));
    CHECK(wasserstein1(p, q) ==
          doctest::Approx(oracle::wasserstein1_exact(pv, qv)).epsilon(1e-9));
    CHECK(cosine_sim(p, q) ==
          doctest::Approx(oracle::cosine_exact(pv, qv)).epsilon(1e-9));
  }
}

TEST_CASE("js distance is a metric on random histograms") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const PredHistogram a = random_hist(16, rng);
    const PredHistogram b = random_hist(16, rng);
    const PredHistogram c = random_hist(16, rng);
    const double ab = js_distance(a, b);
    const double ba = js_distance(b, a);
    const double ac = js_distance(a, c);
    const double cb = js_distance(c, b);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab <= ac + cb + 1e-12);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
  }
}

TEST_CASE("kl and wasserstein properties on random histograms") {
  Rng rng(78);
  for (int trial = 0; trial < 200; ++trial) {
    const PredHistogram a = random_hist(16, rng);
    const PredHistogram b = random_hist(16, rng);
    CHECK(kl(a, b) >= 0.0);
    CHECK(kl(a, a) <= 1e-9);
    CHECK(wasserstein1(a, a) == 0.0);
    CHECK(wasserstein1(a, b) == doctest::Approx(wasserstein1(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("discover picks the shifted pair") {
  // segments 0 and 1 identical, segment 2 shifted to the right
  std::map<int, std::vector<double>> preds;
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double v = 0.2 + 0.1 * rng.uniform();
    preds[0].push_back(v);
    preds[1].push_back(v);
    preds[2].push_back(v + 0.5);
  }
  for (DivMetric m : {DivMetric::js, DivMetric::wasserstein, DivMetric::cosine,
                      DivMetric::kl}) {
    const DivergenceReport r = discover(preds, m, 64);
    CHECK(r.head == 2);  // shifted segment has the higher mean
    CHECK(r.tail <= 1);
    CHECK(r.pair_metrics.at("js") > 0.5);
  }
}

TEST_CASE("discover tie-break on identical segments") {
  std::map<int, std::vector<double>> preds;
  std::vector<double> same(500, 0.3);
  preds[0] = same;
  preds[1] = same;
  preds[2] = same;
  const DivergenceReport r = discover(preds, DivMetric::js, 32);
  // all divergences equal; the lexicographically first pair wins
  CHECK(((r.head == 0 && r.tail == 1) || (r.head == 1 && r.tail == 0)));
  CHECK(r.pair_metrics.at("js") <= 1e-9);
}

TEST_CASE("discover with three planted shifts selects the extremes") {
  // overlapping supports so the divergences do not saturate
  std::map<int, std::vector<double>> preds;
  Rng rng(6);
  for (int i = 0; i < 3000; ++i) {
    const double v = 0.05 + 0.4 * rng.uniform();
    preds[0].push_back(v);
    preds[1].push_back(v + 0.15);
    preds[2].push_back(v + 0.3);
  }
  for (DivMetric m : {DivMetric::js, DivMetric::wasserstein}) {
    const DivergenceReport r = discover(preds, m, 64);
    CHECK(r.head == 2);
    CHECK(r.tail == 0);
  }
}

TEST_CASE("discover excludes under-populated segments") {
  std::map<int, std::vector<double>> preds;
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    preds[0].push_back(0.1 + 0.2 * rng.uniform());
    preds[1].push_back(0.6 + 0.2 * rng.uniform());
  }
  preds[9] = {0.99, 0.98};  // far away but nearly empty
  const DivergenceReport r = discover(preds, DivMetric::js, 64, 100);
  CHECK(r.excluded == std::vector<int>{9});
  CHECK(r.head == 1);
  CHECK(r.tail == 0);

  std::map<int, std::vector<double>> too_few;
  too_few[0] = {0.5};
  too_few[1] = {0.6};
  CHECK_THROWS_AS(discover(too_few, DivMetric::js, 64, 100), ContractError);
}

TEST_CASE("divergence report JSON round-trip") {
  std::map<int, std::vector<double>> preds;
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    preds[3].push_back(0.2 * rng.uniform());
    preds[5].push_back(0.5 + 0.2 * rng.uniform());
  }
  const DivergenceReport r = discover(preds, DivMetric::wasserstein, 32);
  const DivergenceReport back = divergence_report_from_json(divergence_report_to_json(r));
  CHECK(back.head == r.head);
  CHECK(back.tail == r.tail);
  CHECK(back.segments == r.segments);
  CHECK(back.matrix == r.matrix);
  CHECK(back.metric == r.metric);
}
