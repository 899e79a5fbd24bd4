#ifndef SIGSPP_LOSS_HPP_
#define SIGSPP_LOSS_HPP_

#include <vector>

#include "sigspp/tensor.hpp"

namespace sigspp {

// Per-batch breakdown of the combined user/forgery objective
//   L_i = (1 - f_i) * (1 - lambda) * Lc_i + lambda * Lf_i
// where Lc is the softmax cross-entropy over user classes and Lf the
// sigmoid binary cross-entropy of the forgery flag. Without a forgery
// head the objective reduces to L_i = Lc_i.
template <typename T>
struct LossBreakdown {
  T total = T(0);        // mean of per_sample_total
  T user_term = T(0);    // mean of per_sample_user (raw cross-entropy)
  T forgery_term = T(0); // mean of per_sample_forgery (raw bce, 0 if headless)
  std::vector<T> per_sample_total;
  std::vector<T> per_sample_user;
  std::vector<T> per_sample_forgery;
  std::vector<int> forgery_flags;
  std::vector<int> labels;

  // Gradients of the mean loss w.r.t. the head logits.
  Tensor4<T> grad_user_logits;
  std::vector<T> grad_forgery_logits;
};

// user_logits: (N, M, 1, 1). forgery_logits: N entries or empty when the
// model has no forgery head. labels: user index per sample. forgery_flags:
// 0/1 per sample. lambda must lie in [0, 1] whenever the head is present.
template <typename T>
LossBreakdown<T> multitask_loss(const Tensor4<T>& user_logits,
                                const std::vector<T>& forgery_logits,
                                const std::vector<int>& labels,
                                const std::vector<int>& forgery_flags, T lambda);

}  // namespace sigspp

#endif  // SIGSPP_LOSS_HPP_
