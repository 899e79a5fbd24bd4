#include <doctest.h>

#include <cmath>

#include "qp_oracle.hpp"
#include "sigspp/rng.hpp"
#include "sigspp/svm.hpp"
#include "test_support.hpp"

using namespace sigspp;
using sigspp::test::solve_svm_dual_qp;

namespace {

void random_problem(int n_pos, int n_neg, int dim, std::uint64_t seed,
                    std::vector<std::vector<float>>* x, std::vector<int>* y,
                    double separation = 1.0) {
  Rng rng(seed);
  for (int i = 0; i < n_pos + n_neg; ++i) {
    const bool pos = i < n_pos;
    std::vector<float> v(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      v[static_cast<std::size_t>(d)] =
          static_cast<float>(rng.normal() + (pos ? separation : -separation));
    }
    x->push_back(std::move(v));
    y->push_back(pos ? 1 : -1);
  }
}

}  // namespace

TEST_CASE("two points at +-1: boundary at zero with unit margins") {
  const std::vector<std::vector<float>> x = {{1.0f}, {-1.0f}};
  const std::vector<int> y = {1, -1};
  SvmConfig config;
  config.kernel = SvmKernel::kLinear;
  config.tolerance = 1e-9;
  const auto classifier = train_svm(x, y, config);
  CHECK(std::abs(classifier.decide(std::vector<float>{0.0f})) < 1e-6);
  CHECK(classifier.decide(std::vector<float>{1.0f}) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(classifier.decide(std::vector<float>{-1.0f}) == doctest::Approx(-1.0).epsilon(1e-6));
  // analytic optimum: alpha = (0.5, 0.5), objective 0.5
  CHECK(dual_objective(classifier) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("single-class input and non-finite features are rejected") {
  SvmConfig config;
  CHECK_THROWS_AS(train_svm({{1.0f}, {2.0f}}, {1, 1}, config), DataError);
  CHECK_THROWS_AS(
      train_svm({{std::numeric_limits<float>::quiet_NaN()}, {0.0f}}, {1, -1}, config),
      NumericError);
  CHECK_THROWS_AS(train_svm({}, {}, config), DataError);
}

TEST_CASE("dual objective within 1e-6 of the dense QP oracle") {
  for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
    std::vector<std::vector<float>> x;
    std::vector<int> y;
    random_problem(14, 26, 6, seed, &x, &y, 0.8);
    SvmConfig config;
    config.kernel = SvmKernel::kRbf;
    config.gamma = 0.125;
    config.tolerance = 1e-8;
    const auto classifier = train_svm(x, y, config);
    const auto oracle = solve_svm_dual_qp(x, y, config);
    CHECK(std::abs(dual_objective(classifier) - oracle.objective) < 1e-6);
    // the solver's dual value never exceeds the reference optimum by more
    // than the tolerance budget
    CHECK(dual_objective(classifier) <= oracle.objective + 1e-6);
  }
}

TEST_CASE("KKT gap at termination is within the configured tolerance") {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  random_problem(10, 30, 8, 202, &x, &y, 0.5);
  SvmConfig config;
  config.kernel = SvmKernel::kRbf;
  config.gamma = 0.1;
  config.tolerance = 1e-3;
  SvmTrainReport report;
  train_svm(x, y, config, 0, &report);
  CHECK(report.kkt_gap <= 1e-3);
  CHECK(report.alpha.size() == x.size());
  // alphas respect the per-class boxes
  const double c_pos = 3.0;  // C * 30/10
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(report.alpha[i] >= -1e-12);
    CHECK(report.alpha[i] <= (y[i] == 1 ? c_pos : 1.0) + 1e-9);
  }
  // equality constraint
  double balance = 0;
  for (std::size_t i = 0; i < x.size(); ++i) balance += report.alpha[i] * y[i];
  CHECK(std::abs(balance) < 1e-9);
}

TEST_CASE("class weighting equals duplicating the positive sample") {
  // weighted: 1 positive with C+ = k*C  vs  unweighted: k copies of it
  const int k = 5;
  Rng rng(301);
  std::vector<std::vector<float>> base_x;
  std::vector<int> base_y;
  std::vector<float> positive = {1.5f, 0.5f};
  base_x.push_back(positive);
  base_y.push_back(1);
  for (int i = 0; i < k; ++i) {
    base_x.push_back({static_cast<float>(-1.0 + 0.2 * rng.normal()),
                      static_cast<float>(-0.5 + 0.2 * rng.normal())});
    base_y.push_back(-1);
  }
  SvmConfig weighted;
  weighted.kernel = SvmKernel::kLinear;
  weighted.tolerance = 1e-8;
  weighted.weight_positives = true;  // C+ = C * (k/1)
  const auto a = train_svm(base_x, base_y, weighted);

  std::vector<std::vector<float>> dup_x = base_x;
  std::vector<int> dup_y = base_y;
  for (int i = 1; i < k; ++i) {
    dup_x.push_back(positive);
    dup_y.push_back(1);
  }
  SvmConfig unweighted = weighted;
  unweighted.weight_positives = false;  // balanced by duplication instead
  const auto b = train_svm(dup_x, dup_y, unweighted);

  // identical decision functions within solver tolerance
  Rng probe_rng(302);
  for (int probe = 0; probe < 20; ++probe) {
    const std::vector<float> p = {static_cast<float>(probe_rng.uniform(-2, 2)),
                                  static_cast<float>(probe_rng.uniform(-2, 2))};
    CHECK(a.decide(p) == doctest::Approx(b.decide(p)).epsilon(1e-4));
  }
}

TEST_CASE("support vectors carry |score| >= 1 - tolerance when unsaturated") {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  random_problem(10, 10, 4, 401, &x, &y, 2.5);  // well separated
  SvmConfig config;
  config.kernel = SvmKernel::kLinear;
  config.tolerance = 1e-8;
  SvmTrainReport report;
  const auto classifier = train_svm(x, y, config, 0, &report);
  const double c_pos = 1.0, c_neg = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double box = y[i] == 1 ? c_pos : c_neg;
    if (report.alpha[i] > 1e-9 && report.alpha[i] < box - 1e-9) {
      // free support vector: slack 0, sits exactly on the margin
      CHECK(std::abs(classifier.decide(x[i])) >= 1.0 - 1e-4);
      CHECK(std::abs(classifier.decide(x[i])) <= 1.0 + 1e-4);
    }
  }
}

TEST_CASE("linear kernel: primal and dual score paths agree") {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  random_problem(12, 20, 5, 501, &x, &y, 0.7);
  SvmConfig config;
  config.kernel = SvmKernel::kLinear;
  config.tolerance = 1e-6;
  const auto classifier = train_svm(x, y, config);
  REQUIRE_FALSE(classifier.linear_weights.empty());
  Rng rng(502);
  for (int probe = 0; probe < 30; ++probe) {
    std::vector<float> p(5);
    for (auto& v : p) v = static_cast<float>(rng.uniform(-2, 2));
    // primal: w.x + b
    double primal = classifier.bias;
    for (int d = 0; d < 5; ++d) primal += classifier.linear_weights[d] * p[d];
    // dual: sum over support vectors
    double dual = classifier.bias;
    for (std::size_t s = 0; s < classifier.support_vectors.size(); ++s) {
      dual += classifier.sv_coeff[s] * kernel_value(SvmKernel::kLinear, 0.0,
                                                    classifier.support_vectors[s], p);
    }
    CHECK(std::abs(primal - dual) < 1e-8);
    CHECK(classifier.decide(p) == doctest::Approx(primal).epsilon(1e-12));
  }
}

TEST_CASE("permuting the input order permutes the scores identically") {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  random_problem(8, 12, 3, 601, &x, &y);
  SvmConfig config;
  config.gamma = 0.2;
  const auto classifier = train_svm(x, y, config);
  std::vector<std::vector<float>> probes(x.begin(), x.begin() + 10);
  const auto scores = classifier.decide_batch(probes);
  std::vector<std::vector<float>> reversed(probes.rbegin(), probes.rend());
  const auto reversed_scores = classifier.decide_batch(reversed);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    CHECK(scores[i] == reversed_scores[probes.size() - 1 - i]);
  }
}

TEST_CASE("feature length mismatch at decision time is a shape error") {
  const std::vector<std::vector<float>> x = {{1.0f, 0.0f}, {-1.0f, 0.0f}};
  const auto classifier = train_svm(x, {1, -1}, SvmConfig{});
  CHECK_THROWS_AS(classifier.decide(std::vector<float>{1.0f, 2.0f, 3.0f}), ShapeError);
}

TEST_CASE("classifier files round-trip") {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  random_problem(6, 9, 4, 701, &x, &y);
  SvmConfig config;
  config.gamma = 0.05;
  const auto classifier = train_svm(x, y, config, 42);
  const auto dir = sigspp::test::scratch_dir("svm_io");
  save_classifier(dir + "/wd.json", classifier, "deadbeef");
  std::string hash;
  const auto loaded = load_classifier(dir + "/wd.json", &hash);
  CHECK(hash == "deadbeef");
  CHECK(loaded.writer_id == 42);
  CHECK(loaded.feature_dim == 4);
  CHECK(loaded.sv_coeff == classifier.sv_coeff);
  for (const auto& probe : x) {
    CHECK(loaded.decide(probe) == doctest::Approx(classifier.decide(probe)).epsilon(1e-12));
  }
}
