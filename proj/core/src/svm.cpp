#include "sigspp/svm.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace sigspp {

double kernel_value(SvmKernel kernel, double gamma, std::span<const float> a,
                    std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("kernel_value: feature length mismatch");
  if (kernel == SvmKernel::kLinear) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
    return dot;
  }
  double dist2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    dist2 += d * d;
  }
  return std::exp(-gamma * dist2);
}

namespace {

// Dense kernel matrix for desk-scale problems, rows computed lazily above
// the precompute limit.
class KernelCache {
public:
  KernelCache(const std::vector<std::vector<float>>& x, const SvmConfig& config)
      : x_(x), config_(config), n_(x.size()) {
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      diag_[i] = kernel_value(config_.kernel, config_.gamma, x_[i], x_[i]);
    }
    if (n_ <= kPrecomputeLimit) {
      full_.assign(n_ * n_, 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          const double k = kernel_value(config_.kernel, config_.gamma, x_[i], x_[j]);
          full_[i * n_ + j] = k;
          full_[j * n_ + i] = k;
        }
      }
    } else {
      rows_.resize(n_);
    }
  }

  const double* row(std::size_t i) {
    if (!full_.empty()) return full_.data() + i * n_;
    if (rows_[i].empty()) {
      rows_[i].resize(n_);
      for (std::size_t j = 0; j < n_; ++j) {
        rows_[i][j] = kernel_value(config_.kernel, config_.gamma, x_[i], x_[j]);
      }
    }
    return rows_[i].data();
  }

  double diag(std::size_t i) const { return diag_[i]; }

private:
  static constexpr std::size_t kPrecomputeLimit = 3000;
  const std::vector<std::vector<float>>& x_;
  SvmConfig config_;
  std::size_t n_;
  std::vector<double> full_;
  std::vector<std::vector<double>> rows_;  // lazily filled
  std::vector<double> diag_;
};

}  // namespace

WDClassifier train_svm(const std::vector<std::vector<float>>& features,
                       const std::vector<int>& labels, const SvmConfig& config,
                       int writer_id, SvmTrainReport* report) {
  const std::size_t n = features.size();
  if (n == 0 || labels.size() != n) {
    throw DataError("train_svm: empty dataset or label count mismatch");
  }
  const std::size_t dim = features.front().size();
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != dim) {
      throw ShapeError("train_svm: inconsistent feature lengths");
    }
    for (float v : features[i]) {
      if (!std::isfinite(v)) throw NumericError("train_svm: non-finite feature value");
    }
    if (labels[i] == 1) {
      ++n_pos;
    } else if (labels[i] == -1) {
      ++n_neg;
    } else {
      throw DataError("train_svm: labels must be +1 or -1");
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("train_svm: both classes must be present");
  }

  const double c_pos = config.weight_positives
                           ? config.C * (static_cast<double>(n_neg) / n_pos)
                           : config.C;
  const double c_neg = config.C;

  std::vector<double> y(n), box(n), alpha(n, 0.0), grad(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i];
    box[i] = labels[i] == 1 ? c_pos : c_neg;
  }

  KernelCache cache(features, config);
  constexpr double kTau = 1e-12;

  // SMO with maximal-violating-pair selection. grad_i = (Q alpha)_i - 1
  // where Q_ij = y_i y_j K_ij.
  std::int64_t iterations = 0;
  double last_gap = 0.0;
  for (; iterations < config.max_iterations; ++iterations) {
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1, j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_up = (y[t] > 0 && alpha[t] < box[t]) || (y[t] < 0 && alpha[t] > 0);
      const bool in_low = (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < box[t]);
      const double v = -y[t] * grad[t];
      if (in_up && v > m_up) {
        m_up = v;
        i = static_cast<std::ptrdiff_t>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j = static_cast<std::ptrdiff_t>(t);
      }
    }
    last_gap = (i < 0 || j < 0) ? 0.0 : m_up - m_low;
    if (i < 0 || j < 0 || m_up - m_low <= config.tolerance) break;

    const std::size_t ii = static_cast<std::size_t>(i);
    const std::size_t jj = static_cast<std::size_t>(j);
    const double* k_i = cache.row(ii);
    const double* k_j = cache.row(jj);
    const double old_ai = alpha[ii];
    const double old_aj = alpha[jj];

    if (y[ii] != y[jj]) {
      // curvature along the update direction is ||phi(x_i) - phi(x_j)||^2
      double quad = cache.diag(ii) + cache.diag(jj) - 2.0 * k_i[jj];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[ii] - grad[jj]) / quad;
      const double diff = alpha[ii] - alpha[jj];
      alpha[ii] += delta;
      alpha[jj] += delta;
      if (diff > 0) {
        if (alpha[jj] < 0) {
          alpha[jj] = 0;
          alpha[ii] = diff;
        }
      } else {
        if (alpha[ii] < 0) {
          alpha[ii] = 0;
          alpha[jj] = -diff;
        }
      }
      if (diff > box[ii] - box[jj]) {
        if (alpha[ii] > box[ii]) {
          alpha[ii] = box[ii];
          alpha[jj] = box[ii] - diff;
        }
      } else {
        if (alpha[jj] > box[jj]) {
          alpha[jj] = box[jj];
          alpha[ii] = box[jj] + diff;
        }
      }
    } else {
      double quad = cache.diag(ii) + cache.diag(jj) - 2.0 * k_i[jj];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[ii] - grad[jj]) / quad;
      const double sum = alpha[ii] + alpha[jj];
      alpha[ii] -= delta;
      alpha[jj] += delta;
      if (sum > box[ii]) {
        if (alpha[ii] > box[ii]) {
          alpha[ii] = box[ii];
          alpha[jj] = sum - box[ii];
        }
      } else {
        if (alpha[jj] < 0) {
          alpha[jj] = 0;
          alpha[ii] = sum;
        }
      }
      if (sum > box[jj]) {
        if (alpha[jj] > box[jj]) {
          alpha[jj] = box[jj];
          alpha[ii] = sum - box[jj];
        }
      } else {
        if (alpha[ii] < 0) {
          alpha[ii] = 0;
          alpha[jj] = sum;
        }
      }
    }

    const double d_ai = (alpha[ii] - old_ai) * y[ii];
    const double d_aj = (alpha[jj] - old_aj) * y[jj];
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (k_i[t] * d_ai + k_j[t] * d_aj);
    }
  }
  if (iterations >= config.max_iterations) {
    throw NumericError("train_svm: solver did not reach the KKT tolerance");
  }
  if (report) {
    report->kkt_gap = last_gap;
    report->iterations = iterations;
    report->alpha = alpha;
  }

  // rho as in the usual dual stopping analysis; free SVs averaged.
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= box[t] - 1e-12) {
      if (y[t] < 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else if (alpha[t] <= 1e-12) {
      if (y[t] > 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : (upper + lower) / 2.0;

  WDClassifier classifier;
  classifier.config = config;
  classifier.writer_id = writer_id;
  classifier.feature_dim = static_cast<int>(dim);
  classifier.bias = -rho;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 1e-12) {
      classifier.support_vectors.push_back(features[t]);
      classifier.sv_coeff.push_back(alpha[t] * y[t]);
    }
  }
  if (config.kernel == SvmKernel::kLinear) {
    classifier.linear_weights.assign(dim, 0.0);
    for (std::size_t s = 0; s < classifier.support_vectors.size(); ++s) {
      for (std::size_t d = 0; d < dim; ++d) {
        classifier.linear_weights[d] +=
            classifier.sv_coeff[s] * classifier.support_vectors[s][d];
      }
    }
  }
  return classifier;
}

double WDClassifier::decide(std::span<const float> features) const {
  if (static_cast<int>(features.size()) != feature_dim) {
    throw ShapeError("decide: feature length " + std::to_string(features.size()) +
                     " does not match training length " + std::to_string(feature_dim));
  }
  if (config.kernel == SvmKernel::kLinear && !linear_weights.empty()) {
    double score = bias;
    for (int d = 0; d < feature_dim; ++d) {
      score += linear_weights[d] * features[d];
    }
    return score;
  }
  double score = bias;
  for (std::size_t s = 0; s < support_vectors.size(); ++s) {
    score += sv_coeff[s] *
             kernel_value(config.kernel, config.gamma, support_vectors[s], features);
  }
  return score;
}

std::vector<double> WDClassifier::decide_batch(
    const std::vector<std::vector<float>>& features) const {
  std::vector<double> scores;
  scores.reserve(features.size());
  for (const auto& f : features) scores.push_back(decide(f));
  return scores;
}

double dual_objective(const WDClassifier& classifier) {
  // Non-support vectors carry alpha = 0, so the dual restricted to the
  // stored support set is the full value: alpha_i = |coeff_i| and
  // coeff_i coeff_j = alpha_i alpha_j y_i y_j.
  double sum_alpha = 0.0;
  for (double c : classifier.sv_coeff) sum_alpha += std::abs(c);
  double quad = 0.0;
  for (std::size_t i = 0; i < classifier.support_vectors.size(); ++i) {
    for (std::size_t j = 0; j < classifier.support_vectors.size(); ++j) {
      quad += classifier.sv_coeff[i] * classifier.sv_coeff[j] *
              kernel_value(classifier.config.kernel, classifier.config.gamma,
                           classifier.support_vectors[i], classifier.support_vectors[j]);
    }
  }
  return sum_alpha - 0.5 * quad;
}

void save_classifier(const std::string& path, const WDClassifier& classifier,
                     const std::string& config_hash) {
  nlohmann::json doc;
  doc["format"] = "sigspp-wd-classifier";
  doc["version"] = 1;
  doc["config_hash"] = config_hash;
  doc["writer_id"] = classifier.writer_id;
  doc["kernel"] = classifier.config.kernel == SvmKernel::kLinear ? "linear" : "rbf";
  doc["C"] = classifier.config.C;
  doc["gamma"] = classifier.config.gamma;
  doc["feature_dim"] = classifier.feature_dim;
  doc["bias"] = classifier.bias;
  doc["sv_coeff"] = classifier.sv_coeff;
  doc["support_vectors"] = classifier.support_vectors;
  doc["linear_weights"] = classifier.linear_weights;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write classifier file: " + path);
  out << doc.dump(2) << "\n";
}

WDClassifier load_classifier(const std::string& path, std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open classifier file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad classifier file " + path + ": " + e.what());
  }
  if (doc.value("format", "") != "sigspp-wd-classifier") {
    throw DataError("not a classifier file: " + path);
  }
  if (doc.value("version", 0) != 1) {
    throw DataError("unsupported classifier version in " + path);
  }
  WDClassifier classifier;
  classifier.config.kernel =
      doc.at("kernel") == "linear" ? SvmKernel::kLinear : SvmKernel::kRbf;
  classifier.config.C = doc.at("C");
  classifier.config.gamma = doc.at("gamma");
  classifier.writer_id = doc.at("writer_id");
  classifier.feature_dim = doc.at("feature_dim");
  classifier.bias = doc.at("bias");
  classifier.sv_coeff = doc.at("sv_coeff").get<std::vector<double>>();
  classifier.support_vectors =
      doc.at("support_vectors").get<std::vector<std::vector<float>>>();
  classifier.linear_weights = doc.at("linear_weights").get<std::vector<double>>();
  if (config_hash) *config_hash = doc.value("config_hash", "");
  return classifier;
}

}  // namespace sigspp
