#ifndef SIGSPP_SVM_HPP_
#define SIGSPP_SVM_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sigspp/errors.hpp"

namespace sigspp {

enum class SvmKernel { kLinear, kRbf };

struct SvmConfig {
  SvmKernel kernel = SvmKernel::kRbf;
  double C = 1.0;
  double gamma = 0x1.0p-11;  // 2^-11, applied to raw feature vectors
  double tolerance = 1e-3;   // KKT stopping tolerance
  // Positive-class penalty becomes C * (n_neg / n_pos) when set, so the few
  // genuine samples are not drowned out by the negative pool.
  bool weight_positives = true;
  std::int64_t max_iterations = 10'000'000;
};

// Binary verifier owned by one writer. The decision function is
//   f(x) = sum_i alpha_i y_i K(sv_i, x) + b
// (collapsed to w.x + b for the linear kernel).
struct WDClassifier {
  SvmConfig config;
  int writer_id = 0;
  int feature_dim = 0;
  std::vector<std::vector<float>> support_vectors;
  std::vector<double> sv_coeff;  // alpha_i * y_i
  double bias = 0.0;
  std::vector<double> linear_weights;  // linear kernel only

  double decide(std::span<const float> features) const;
  std::vector<double> decide_batch(const std::vector<std::vector<float>>& features) const;
};

struct SvmTrainReport {
  double kkt_gap = 0.0;  // final max violating-pair gap
  std::int64_t iterations = 0;
  std::vector<double> alpha;  // per training sample
};

// Trains a soft-margin SVM on labels in {-1, +1} with an SMO-style dual
// solver (maximal-violating-pair working set selection) to the configured
// KKT tolerance. Throws DataError when only one class is present and
// NumericError on non-finite features.
WDClassifier train_svm(const std::vector<std::vector<float>>& features,
                       const std::vector<int>& labels, const SvmConfig& config,
                       int writer_id = 0, SvmTrainReport* report = nullptr);

// Dual objective value sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij
// of a trained classifier, recomputed from its stored coefficients.
double dual_objective(const WDClassifier& classifier);

double kernel_value(SvmKernel kernel, double gamma, std::span<const float> a,
                    std::span<const float> b);

void save_classifier(const std::string& path, const WDClassifier& classifier,
                     const std::string& config_hash);
WDClassifier load_classifier(const std::string& path, std::string* config_hash = nullptr);

}  // namespace sigspp

#endif  // SIGSPP_SVM_HPP_
