#include "sigspp/loss.hpp"

#include <algorithm>
#include <cmath>

namespace sigspp {

template <typename T>
LossBreakdown<T> multitask_loss(const Tensor4<T>& user_logits,
                                const std::vector<T>& forgery_logits,
                                const std::vector<int>& labels,
                                const std::vector<int>& forgery_flags, T lambda) {
  const int batch = user_logits.batch();
  const int classes = user_logits.channels();
  const bool has_forgery = !forgery_logits.empty();
  if (labels.size() != static_cast<std::size_t>(batch) ||
      forgery_flags.size() != static_cast<std::size_t>(batch)) {
    throw ShapeError("multitask_loss: labels/flags do not match the batch");
  }
  if (has_forgery && forgery_logits.size() != static_cast<std::size_t>(batch)) {
    throw ShapeError("multitask_loss: forgery logits do not match the batch");
  }
  if (has_forgery && (lambda < T(0) || lambda > T(1))) {
    throw ConfigError("multitask_loss: lambda must lie in [0, 1]");
  }

  LossBreakdown<T> out;
  out.per_sample_total.resize(batch);
  out.per_sample_user.resize(batch);
  out.per_sample_forgery.assign(batch, T(0));
  out.forgery_flags = forgery_flags;
  out.labels = labels;
  out.grad_user_logits = Tensor4<T>(batch, classes, 1, 1);
  if (has_forgery) out.grad_forgery_logits.assign(batch, T(0));

  const double inv_batch = 1.0 / batch;
  double sum_total = 0.0, sum_user = 0.0, sum_forgery = 0.0;

  for (int n = 0; n < batch; ++n) {
    const int label = labels[n];
    if (label < 0 || label >= classes) {
      throw ShapeError("multitask_loss: label out of range");
    }
    const int f = forgery_flags[n];
    if (f != 0 && f != 1) throw ConfigError("multitask_loss: forgery flag must be 0/1");

    // log-softmax cross-entropy
    double max_logit = user_logits(n, 0, 0, 0);
    for (int j = 1; j < classes; ++j) {
      max_logit = std::max(max_logit, static_cast<double>(user_logits(n, j, 0, 0)));
    }
    double sum_exp = 0.0;
    for (int j = 0; j < classes; ++j) {
      sum_exp += std::exp(static_cast<double>(user_logits(n, j, 0, 0)) - max_logit);
    }
    const double log_z = max_logit + std::log(sum_exp);
    const double ce = log_z - static_cast<double>(user_logits(n, label, 0, 0));
    out.per_sample_user[n] = static_cast<T>(ce);

    double user_coeff;  // weight on the user term in the combined loss
    double total;
    if (has_forgery) {
      user_coeff = (1.0 - f) * (1.0 - static_cast<double>(lambda));
      const double z = forgery_logits[n];
      // stable binary cross-entropy: log(1 + e^z) - f*z
      const double bce = std::max(z, 0.0) - z * f + std::log1p(std::exp(-std::abs(z)));
      out.per_sample_forgery[n] = static_cast<T>(bce);
      total = user_coeff * ce + static_cast<double>(lambda) * bce;
      const double sigma = 1.0 / (1.0 + std::exp(-z));
      out.grad_forgery_logits[n] =
          static_cast<T>(static_cast<double>(lambda) * (sigma - f) * inv_batch);
      sum_forgery += bce;
    } else {
      user_coeff = 1.0;
      total = ce;
    }
    out.per_sample_total[n] = static_cast<T>(total);
    sum_total += total;
    sum_user += ce;

    const double coeff = user_coeff * inv_batch;
    for (int j = 0; j < classes; ++j) {
      const double p =
          std::exp(static_cast<double>(user_logits(n, j, 0, 0)) - log_z);
      const double indicator = j == label ? 1.0 : 0.0;
      out.grad_user_logits(n, j, 0, 0) = static_cast<T>(coeff * (p - indicator));
    }
  }

  out.total = static_cast<T>(sum_total * inv_batch);
  out.user_term = static_cast<T>(sum_user * inv_batch);
  out.forgery_term = static_cast<T>(sum_forgery * inv_batch);
  return out;
}

template LossBreakdown<float> multitask_loss<float>(const Tensor4<float>&,
                                                    const std::vector<float>&,
                                                    const std::vector<int>&,
                                                    const std::vector<int>&, float);
template LossBreakdown<double> multitask_loss<double>(const Tensor4<double>&,
                                                      const std::vector<double>&,
                                                      const std::vector<int>&,
                                                      const std::vector<int>&, double);

}  // namespace sigspp
