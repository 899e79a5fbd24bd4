#ifndef SIGSPP_LAYERS_HPP_
#define SIGSPP_LAYERS_HPP_

#include <string>
#include <vector>

#include "sigspp/tensor.hpp"

namespace sigspp {

// -- convolution (cross-correlation) ----------------------------------------

inline int conv_out_dim(int in, int kernel, int stride, int padding) {
  const int span = in + 2 * padding - kernel;
  if (span < 0) return 0;  // window larger than the padded input
  return span / stride + 1;
}

// weights: (filters, in_channels, kh, kw); bias: one per filter.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const Tensor4<T>& weights,
                          const std::vector<T>& bias, int stride, int padding,
                          const std::string& layer_name = "conv");

template <typename T>
struct ConvGrads {
  Tensor4<T> input;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const Tensor4<T>& weights,
                             const Tensor4<T>& grad_output, int stride, int padding);

// -- max pooling -------------------------------------------------------------

template <typename T>
struct PoolResult {
  Tensor4<T> output;
  // Flat index into the input tensor of the selected element, one per
  // output element. Ties pick the first value in row-major scan order.
  std::vector<std::size_t> argmax;
};

// Padded positions count as -inf: they are never selected while any real
// value is in the window.
template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& input, int size, int stride,
                              int padding, const std::string& layer_name = "pool");

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& grad_output,
                            const std::vector<std::size_t>& argmax,
                            const std::array<int, 4>& input_dims);

// -- batch normalization -----------------------------------------------------

template <typename T>
struct BatchNormParams {
  std::vector<T> gamma;         // scale
  std::vector<T> beta;          // shift
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormParams(int channels = 0)
      : gamma(channels, T(1)), beta(channels, T(0)),
        running_mean(channels, T(0)), running_var(channels, T(1)) {}
  int channels() const { return static_cast<int>(gamma.size()); }
};

template <typename T>
struct BatchNormCache {
  std::vector<T> mean;     // batch mean per channel
  std::vector<T> inv_std;  // 1/sqrt(var + eps)
  Tensor4<T> x_hat;        // normalized input, pre scale/shift
};

inline constexpr double kBatchNormEps = 1e-5;
// Exponential-moving-average factor on the old running value.
inline constexpr double kBatchNormMomentum = 0.9;

// Train mode normalizes by batch statistics (biased variance) and updates
// running statistics in place; eval mode uses the running statistics.
// cache may be null in eval mode or when no backward pass will follow.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& input, BatchNormParams<T>& params,
                             bool training, BatchNormCache<T>* cache = nullptr,
                             T eps = T(kBatchNormEps),
                             T momentum = T(kBatchNormMomentum));

template <typename T>
struct BatchNormGrads {
  Tensor4<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor4<T>& grad_output,
                                     const BatchNormParams<T>& params,
                                     const BatchNormCache<T>& cache);

// -- fully connected ---------------------------------------------------------

// input: (N, K, 1, 1); weights: (K x M) row-major flat; output: (N, M, 1, 1).
template <typename T>
Tensor4<T> fc_forward(const Tensor4<T>& input, const std::vector<T>& weights,
                      int in_dim, int out_dim, const std::vector<T>& bias,
                      const std::string& layer_name = "fc");

template <typename T>
struct FcGrads {
  Tensor4<T> input;
  std::vector<T> weights;
  std::vector<T> bias;
};

template <typename T>
FcGrads<T> fc_backward(const Tensor4<T>& input, const std::vector<T>& weights,
                       int in_dim, int out_dim, const Tensor4<T>& grad_output);

// -- relu --------------------------------------------------------------------

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& input);

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_output, const Tensor4<T>& forward_input);

// Flattens (N,C,H,W) to (N, C*H*W, 1, 1); the inverse restores the shape.
template <typename T>
Tensor4<T> flatten(const Tensor4<T>& input);

template <typename T>
Tensor4<T> unflatten(const Tensor4<T>& input, const std::array<int, 4>& dims);

}  // namespace sigspp

#endif  // SIGSPP_LAYERS_HPP_
