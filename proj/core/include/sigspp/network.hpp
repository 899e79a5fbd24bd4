#ifndef SIGSPP_NETWORK_HPP_
#define SIGSPP_NETWORK_HPP_

#include <optional>
#include <vector>

#include "sigspp/model.hpp"

namespace sigspp {

// Runs a model over a batch. Forward caches every intermediate needed by
// backward when requested; backward consumes that cache. One Network owns
// one pass at a time; concurrent inference should use one Network per
// thread over the same (const) model.
template <typename T>
class Network {
public:
  explicit Network(Model<T>& model) : model_(&model) {}

  struct Output {
    Tensor4<T> user_logits;      // (N, M, 1, 1)
    std::vector<T> forgery_logits;  // N entries, empty without the head
    Tensor4<T> features;         // (N, feature_dim, 1, 1), post-bn post-relu fc output
  };

  // training=true uses batch statistics in batch-norm (updating running
  // statistics) and records the backward cache. training=false runs in
  // eval mode and records nothing.
  Output forward(const Tensor4<T>& input, bool training);

  // Backpropagates head gradients from the latest training forward pass.
  // The input gradient is kept internally for diagnostics.
  Gradients<T> backward(const Tensor4<T>& grad_user_logits,
                        const std::vector<T>& grad_forgery_logits);

  const Tensor4<T>& last_input_gradient() const;

  Model<T>& model() { return *model_; }

private:
  struct ConvRowCache {
    Tensor4<T> input;     // conv input
    Tensor4<T> pre_bn;    // conv output
    BatchNormCache<T> bn;
    Tensor4<T> pre_relu;  // bn output
  };
  struct PoolRowCache {
    std::array<int, 4> input_dims;
    std::vector<std::size_t> argmax;
  };
  struct FcRowCache {
    Tensor4<T> input;
    Tensor4<T> pre_bn;
    BatchNormCache<T> bn;
    Tensor4<T> pre_relu;
  };

  Model<T>* model_;
  bool has_cache_ = false;
  std::vector<ConvRowCache> conv_cache_;
  std::vector<PoolRowCache> pool_cache_;
  std::vector<PoolRowCache> spp_cache_;
  std::vector<FcRowCache> fc_cache_;
  std::array<int, 4> flatten_dims_{};
  bool flattened_ = false;
  Tensor4<T> features_;
  Tensor4<T> input_gradient_;
};

}  // namespace sigspp

#endif  // SIGSPP_NETWORK_HPP_
