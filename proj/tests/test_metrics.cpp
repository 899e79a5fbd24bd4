#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sigspp/metrics.hpp"
#include "sigspp/rng.hpp"

using namespace sigspp;

namespace {

// Brute-force reference: recount FRR/FAR from scratch at every candidate
// threshold, then interpolate the crossing the same way the contract
// defines it (linear between the bracketing breakpoints).
double eer_oracle(const std::vector<double>& genuine, const std::vector<double>& forgery) {
  std::set<double> candidates(genuine.begin(), genuine.end());
  candidates.insert(forgery.begin(), forgery.end());
  std::vector<double> thresholds = {-1e308};
  thresholds.insert(thresholds.end(), candidates.begin(), candidates.end());
  thresholds.push_back(1e308);

  const auto frr_at = [&](double t) {
    std::size_t count = 0;
    for (double g : genuine) {
      if (g < t) ++count;
    }
    return static_cast<double>(count) / genuine.size();
  };
  const auto far_at = [&](double t) {
    std::size_t count = 0;
    for (double f : forgery) {
      if (f >= t) ++count;
    }
    return static_cast<double>(count) / forgery.size();
  };

  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
    const double d0 = far_at(thresholds[i]) - frr_at(thresholds[i]);
    const double d1 = far_at(thresholds[i + 1]) - frr_at(thresholds[i + 1]);
    if (d0 == 0.0) return 100.0 * far_at(thresholds[i]);
    if (d0 > 0.0 && d1 < 0.0) {
      const double s = d0 / (d0 - d1);
      const double f0 = frr_at(thresholds[i]);
      const double f1 = frr_at(thresholds[i + 1]);
      return 100.0 * (f0 + s * (f1 - f0));
    }
    if (d1 == 0.0) return 100.0 * far_at(thresholds[i + 1]);
  }
  return -1.0;
}

std::vector<double> random_scores(Rng& rng, int n, double center) {
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (auto& s : scores) s = center + rng.normal();
  return scores;
}

}  // namespace

TEST_CASE("separable scores admit a threshold with FAR = FRR = 0") {
  const auto curve = far_frr_curve({0.9, 0.8}, {0.1, 0.2});
  bool perfect = false;
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    perfect = perfect || (curve.far[i] == 0.0 && curve.frr[i] == 0.0);
  }
  CHECK(perfect);
}

TEST_CASE("threshold below every score: FRR 0, FAR 100%") {
  const auto curve = far_frr_curve({0.5, 0.7}, {0.2, 0.3});
  CHECK(curve.thresholds.front() == -std::numeric_limits<double>::infinity());
  CHECK(curve.frr.front() == 0.0);
  CHECK(curve.far.front() == 1.0);
  CHECK(curve.frr.back() == 1.0);
  CHECK(curve.far.back() == 0.0);
}

TEST_CASE("curve values match brute-force counting at every breakpoint") {
  Rng rng(81);
  const auto genuine = random_scores(rng, 40, 0.8);
  const auto forgery = random_scores(rng, 60, -0.4);
  const auto curve = far_frr_curve(genuine, forgery);
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    const double t = curve.thresholds[i];
    std::size_t rejected = 0, accepted = 0;
    for (double g : genuine) {
      if (g < t) ++rejected;
    }
    for (double f : forgery) {
      if (f >= t) ++accepted;
    }
    CHECK(curve.frr[i] == static_cast<double>(rejected) / genuine.size());
    CHECK(curve.far[i] == static_cast<double>(accepted) / forgery.size());
  }
}

TEST_CASE("FRR is non-decreasing and FAR non-increasing in the threshold") {
  Rng rng(82);
  const auto curve = far_frr_curve(random_scores(rng, 25, 0.5), random_scores(rng, 35, 0.0));
  for (std::size_t i = 0; i + 1 < curve.thresholds.size(); ++i) {
    CHECK(curve.frr[i + 1] >= curve.frr[i]);
    CHECK(curve.far[i + 1] <= curve.far[i]);
  }
}

TEST_CASE("worked example: EER 33.33% with threshold in (0.5, 0.6]") {
  const auto result = eer_from_scores({0.9, 0.7, 0.5}, {0.6, 0.4, 0.2});
  CHECK(result.eer_percent == doctest::Approx(100.0 / 3).epsilon(1e-12));
  CHECK(result.threshold > 0.5);
  CHECK(result.threshold <= 0.6);
}

TEST_CASE("perfect separation gives 0%") {
  ScoreSet scores;
  scores[1].genuine = {0.9, 0.8};
  scores[1].skilled = {0.1, 0.2};
  CHECK(eer_global(scores, ForgeryClass::kSkilled).eer_percent == 0.0);
}

TEST_CASE("identical genuine and forgery distributions sit at 50%") {
  const std::vector<double> same = {0.1, 0.4, 0.7};
  CHECK(eer_from_scores(same, same).eer_percent == doctest::Approx(50.0).epsilon(1e-9));
  const std::vector<double> even = {1, 2, 3, 4};
  CHECK(eer_from_scores(even, even).eer_percent == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("both EER variants match the brute-force oracle on random score sets") {
  Rng rng(83);
  for (int trial = 0; trial < 50; ++trial) {
    const int n_writers = 1 + static_cast<int>(rng.uniform_int(0, 4));
    ScoreSet scores;
    for (int w = 0; w < n_writers; ++w) {
      scores[w].genuine =
          random_scores(rng, 2 + static_cast<int>(rng.uniform_int(0, 10)), 0.6);
      scores[w].skilled =
          random_scores(rng, 2 + static_cast<int>(rng.uniform_int(0, 10)), -0.3);
    }
    // pooled
    std::vector<double> pooled_genuine, pooled_forgery;
    for (const auto& [w, ws] : scores) {
      pooled_genuine.insert(pooled_genuine.end(), ws.genuine.begin(), ws.genuine.end());
      pooled_forgery.insert(pooled_forgery.end(), ws.skilled.begin(), ws.skilled.end());
    }
    CHECK(std::abs(eer_global(scores, ForgeryClass::kSkilled).eer_percent -
                   eer_oracle(pooled_genuine, pooled_forgery)) < 1e-9);
    // per user mean
    double sum = 0;
    for (const auto& [w, ws] : scores) sum += eer_oracle(ws.genuine, ws.skilled);
    CHECK(std::abs(eer_user(scores, ForgeryClass::kSkilled).eer_percent - sum / n_writers) <
          1e-9);
  }
}

TEST_CASE("two writers at 0% and 33.33% average to 16.67%") {
  ScoreSet scores;
  scores[0].genuine = {0.9, 0.8};
  scores[0].skilled = {0.1, 0.2};
  scores[1].genuine = {0.9, 0.7, 0.5};
  scores[1].skilled = {0.6, 0.4, 0.2};
  const auto result = eer_user(scores, ForgeryClass::kSkilled);
  CHECK(result.eer_percent == doctest::Approx(100.0 / 6).epsilon(1e-12));
  CHECK(result.writers_used == 2);
}

TEST_CASE("writers missing a class are excluded and counted") {
  ScoreSet scores;
  scores[0].genuine = {0.9};
  scores[0].skilled = {0.1};
  scores[1].genuine = {0.8};  // no skilled scores
  const auto result = eer_user(scores, ForgeryClass::kSkilled);
  CHECK(result.writers_used == 1);
  CHECK(result.writers_skipped == 1);

  ScoreSet empty;
  empty[0].genuine = {0.5};
  CHECK_THROWS_AS(eer_user(empty, ForgeryClass::kSkilled), DataError);
  CHECK_THROWS_AS(eer_global(empty, ForgeryClass::kSkilled), DataError);
}

TEST_CASE("user thresholds help on average over random draws") {
  Rng rng(84);
  double mean_gap = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    ScoreSet scores;
    for (int w = 0; w < 4; ++w) {
      // per-writer score offset models calibration differences
      const double offset = rng.uniform(-1.0, 1.0);
      scores[w].genuine = random_scores(rng, 8, offset + 0.8);
      scores[w].skilled = random_scores(rng, 8, offset - 0.8);
    }
    const double global = eer_global(scores, ForgeryClass::kSkilled).eer_percent;
    const double user = eer_user(scores, ForgeryClass::kSkilled).eer_percent;
    mean_gap += global - user;
  }
  CHECK(mean_gap / trials >= 0.0);
}

TEST_CASE("EER is invariant under strictly increasing score transforms") {
  Rng rng(85);
  ScoreSet scores;
  for (int w = 0; w < 3; ++w) {
    scores[w].genuine = random_scores(rng, 10, 0.5);
    scores[w].skilled = random_scores(rng, 12, -0.5);
  }
  const double base_global = eer_global(scores, ForgeryClass::kSkilled).eer_percent;
  const double base_user = eer_user(scores, ForgeryClass::kSkilled).eer_percent;

  ScoreSet transformed = scores;
  const auto warp = [](double s) { return std::exp(0.7 * s) + 0.1 * s; };
  for (auto& [w, ws] : transformed) {
    for (auto& s : ws.genuine) s = warp(s);
    for (auto& s : ws.skilled) s = warp(s);
  }
  CHECK(eer_global(transformed, ForgeryClass::kSkilled).eer_percent ==
        doctest::Approx(base_global).epsilon(1e-9));
  CHECK(eer_user(transformed, ForgeryClass::kSkilled).eer_percent ==
        doctest::Approx(base_user).epsilon(1e-9));
}

TEST_CASE("AER arithmetic") {
  const auto result = aer(10, 0, 2, 8);
  CHECK(result.aer == doctest::Approx(5.0));
  CHECK(result.aer_genuine_skilled == doctest::Approx(9.0));
  const auto zero = aer(0, 0, 0, 0);
  CHECK(zero.aer == 0.0);
  CHECK(zero.aer_genuine_skilled == 0.0);
}

TEST_CASE("published row: FRR 1.22, FAR 0.02/0.43/10.70 -> AER 3.09, AER-g+s 5.96") {
  const auto result = aer(1.22, 0.02, 0.43, 10.70);
  CHECK(result.aer == doctest::Approx(3.0925).epsilon(1e-12));
  // rounded to the table's two decimals
  CHECK(std::round(result.aer * 100.0) / 100.0 == doctest::Approx(3.09));
  CHECK(std::round(result.aer_genuine_skilled * 100.0) / 100.0 == doctest::Approx(5.96));
}

TEST_CASE("AER rejects out-of-range rates") {
  CHECK_THROWS_AS(aer(-0.1, 0, 0, 0), ConfigError);
  CHECK_THROWS_AS(aer(0, 101, 0, 0), ConfigError);
  CHECK_THROWS_AS(aer(0, 0, std::nan(""), 0), ConfigError);
}

TEST_CASE("compute_metrics fills the report consistently") {
  Rng rng(86);
  ScoreSet scores;
  for (int w = 0; w < 5; ++w) {
    scores[w].genuine = random_scores(rng, 10, 1.0);
    scores[w].skilled = random_scores(rng, 10, -1.0);
    scores[w].random = random_scores(rng, 10, -2.0);
    scores[w].simple = random_scores(rng, 10, -1.5);
  }
  const auto report = compute_metrics(scores);
  CHECK(report.writers == 5);
  CHECK(report.eer_global_percent >= 0.0);
  CHECK(report.eer_global_percent <= 100.0);
  REQUIRE(report.aer_result.has_value());
  const auto recomputed = aer(report.frr_percent, report.far_random_percent,
                              *report.far_simple_percent, report.far_skilled_percent);
  CHECK(report.aer_result->aer == doctest::Approx(recomputed.aer));
  const auto table = format_report_table(report);
  CHECK(table.find("EER_user") != std::string::npos);
  CHECK(table.find("AER") != std::string::npos);
}
