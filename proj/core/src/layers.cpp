#include "sigspp/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sigspp {

namespace {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

// Unrolls one image into a (C*K*K) x (out_h*out_w) column matrix.
template <typename T>
void im2col(const T* img, int channels, int height, int width, int kernel,
            int stride, int padding, int out_h, int out_w, T* col) {
  const int patch = kernel * kernel;
  for (int c = 0; c < channels; ++c) {
    const T* plane = img + static_cast<std::size_t>(c) * height * width;
    for (int p = 0; p < patch; ++p) {
      const int kh = p / kernel;
      const int kw = p % kernel;
      T* row = col + (static_cast<std::size_t>(c) * patch + p) * out_h * out_w;
      for (int oh = 0; oh < out_h; ++oh) {
        const int ih = oh * stride - padding + kh;
        if (ih < 0 || ih >= height) {
          std::fill(row + static_cast<std::size_t>(oh) * out_w,
                    row + static_cast<std::size_t>(oh + 1) * out_w, T(0));
          continue;
        }
        const T* src = plane + static_cast<std::size_t>(ih) * width;
        for (int ow = 0; ow < out_w; ++ow) {
          const int iw = ow * stride - padding + kw;
          row[static_cast<std::size_t>(oh) * out_w + ow] =
              (iw >= 0 && iw < width) ? src[iw] : T(0);
        }
      }
    }
  }
}

// Scatter-adds the column matrix back into image layout.
template <typename T>
void col2im(const T* col, int channels, int height, int width, int kernel,
            int stride, int padding, int out_h, int out_w, T* img) {
  const int patch = kernel * kernel;
  for (int c = 0; c < channels; ++c) {
    T* plane = img + static_cast<std::size_t>(c) * height * width;
    for (int p = 0; p < patch; ++p) {
      const int kh = p / kernel;
      const int kw = p % kernel;
      const T* row = col + (static_cast<std::size_t>(c) * patch + p) * out_h * out_w;
      for (int oh = 0; oh < out_h; ++oh) {
        const int ih = oh * stride - padding + kh;
        if (ih < 0 || ih >= height) continue;
        T* dst = plane + static_cast<std::size_t>(ih) * width;
        for (int ow = 0; ow < out_w; ++ow) {
          const int iw = ow * stride - padding + kw;
          if (iw >= 0 && iw < width) {
            dst[iw] += row[static_cast<std::size_t>(oh) * out_w + ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const Tensor4<T>& weights,
                          const std::vector<T>& bias, int stride, int padding,
                          const std::string& layer_name) {
  const int filters = weights.batch();
  const int wc = weights.channels();
  const int kernel = weights.height();
  if (weights.width() != kernel) {
    throw ShapeError(layer_name + ": non-square kernel " + weights.shape_string());
  }
  if (input.channels() != wc) {
    throw ShapeError(layer_name + ": input has " + std::to_string(input.channels()) +
                     " channels, weights expect " + std::to_string(wc));
  }
  if (static_cast<int>(bias.size()) != filters) {
    throw ShapeError(layer_name + ": bias size " + std::to_string(bias.size()) +
                     " != filters " + std::to_string(filters));
  }
  if (stride < 1 || padding < 0) {
    throw ConfigError(layer_name + ": stride must be >= 1 and padding >= 0");
  }
  const int out_h = conv_out_dim(input.height(), kernel, stride, padding);
  const int out_w = conv_out_dim(input.width(), kernel, stride, padding);
  if (out_h < 1 || out_w < 1) {
    throw ShapeError(layer_name + ": kernel " + std::to_string(kernel) +
                     " does not fit input " + input.shape_string());
  }

  const int cols = out_h * out_w;
  const int rows = wc * kernel * kernel;
  Tensor4<T> output(input.batch(), filters, out_h, out_w);
  std::vector<T> col(static_cast<std::size_t>(rows) * cols);
  ConstMapRM<T> wmat(weights.data(), filters, rows);

  for (int n = 0; n < input.batch(); ++n) {
    im2col(input.data() + input.index(n, 0, 0, 0), wc, input.height(), input.width(),
           kernel, stride, padding, out_h, out_w, col.data());
    MapRM<T> out(output.data() + output.index(n, 0, 0, 0), filters, cols);
    ConstMapRM<T> colm(col.data(), rows, cols);
    out.noalias() = wmat * colm;
    for (int f = 0; f < filters; ++f) {
      out.row(f).array() += bias[static_cast<std::size_t>(f)];
    }
  }
  return output;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const Tensor4<T>& weights,
                             const Tensor4<T>& grad_output, int stride, int padding) {
  const int filters = weights.batch();
  const int wc = weights.channels();
  const int kernel = weights.height();
  const int out_h = grad_output.height();
  const int out_w = grad_output.width();
  const int cols = out_h * out_w;
  const int rows = wc * kernel * kernel;

  ConvGrads<T> grads;
  grads.input = Tensor4<T>(input.batch(), input.channels(), input.height(), input.width());
  grads.weights = Tensor4<T>(filters, wc, kernel, kernel);
  grads.bias.assign(static_cast<std::size_t>(filters), T(0));

  std::vector<T> col(static_cast<std::size_t>(rows) * cols);
  std::vector<T> dcol(static_cast<std::size_t>(rows) * cols);
  ConstMapRM<T> wmat(weights.data(), filters, rows);
  MapRM<T> dwmat(grads.weights.data(), filters, rows);

  for (int n = 0; n < input.batch(); ++n) {
    im2col(input.data() + input.index(n, 0, 0, 0), wc, input.height(), input.width(),
           kernel, stride, padding, out_h, out_w, col.data());
    ConstMapRM<T> colm(col.data(), rows, cols);
    ConstMapRM<T> dout(grad_output.data() + grad_output.index(n, 0, 0, 0), filters, cols);

    dwmat.noalias() += dout * colm.transpose();
    for (int f = 0; f < filters; ++f) {
      grads.bias[static_cast<std::size_t>(f)] += dout.row(f).sum();
    }

    MapRM<T> dcolm(dcol.data(), rows, cols);
    dcolm.noalias() = wmat.transpose() * dout;
    col2im(dcol.data(), wc, input.height(), input.width(), kernel, stride, padding,
           out_h, out_w, grads.input.data() + grads.input.index(n, 0, 0, 0));
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& input, int size, int stride,
                              int padding, const std::string& layer_name) {
  if (size < 1 || stride < 1 || padding < 0) {
    throw ConfigError(layer_name + ": size/stride must be >= 1 and padding >= 0");
  }
  if (padding >= size) {
    throw ConfigError(layer_name + ": padding must be smaller than the pool size");
  }
  const int out_h = conv_out_dim(input.height(), size, stride, padding);
  const int out_w = conv_out_dim(input.width(), size, stride, padding);
  if (out_h < 1 || out_w < 1) {
    throw ShapeError(layer_name + ": window " + std::to_string(size) +
                     " larger than padded input " + input.shape_string());
  }

  PoolResult<T> result;
  result.output = Tensor4<T>(input.batch(), input.channels(), out_h, out_w);
  result.argmax.assign(result.output.size(), 0);

  std::size_t out_i = 0;
  for (int n = 0; n < input.batch(); ++n) {
    for (int c = 0; c < input.channels(); ++c) {
      for (int oh = 0; oh < out_h; ++oh) {
        for (int ow = 0; ow < out_w; ++ow, ++out_i) {
          const int h0 = std::max(0, oh * stride - padding);
          const int h1 = std::min(input.height(), oh * stride - padding + size);
          const int w0 = std::max(0, ow * stride - padding);
          const int w1 = std::min(input.width(), ow * stride - padding + size);
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = input.index(n, c, h0, w0);
          for (int h = h0; h < h1; ++h) {
            for (int w = w0; w < w1; ++w) {
              const T v = input(n, c, h, w);
              if (v > best) {
                best = v;
                best_idx = input.index(n, c, h, w);
              }
            }
          }
          result.output.flat(out_i) = best;
          result.argmax[out_i] = best_idx;
        }
      }
    }
  }
  return result;
}

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& grad_output,
                            const std::vector<std::size_t>& argmax,
                            const std::array<int, 4>& input_dims) {
  if (argmax.size() != grad_output.size()) {
    throw StateError("maxpool_backward: argmax does not match the gradient shape");
  }
  Tensor4<T> grad(input_dims[0], input_dims[1], input_dims[2], input_dims[3]);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    grad.flat(argmax[i]) += grad_output.flat(i);
  }
  return grad;
}

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& input, BatchNormParams<T>& params,
                             bool training, BatchNormCache<T>* cache, T eps, T momentum) {
  const int channels = input.channels();
  if (params.channels() != channels) {
    throw ShapeError("batchnorm: input has " + std::to_string(channels) +
                     " channels, params expect " + std::to_string(params.channels()));
  }
  const std::size_t per_channel =
      static_cast<std::size_t>(input.batch()) * input.height() * input.width();
  Tensor4<T> output(input.batch(), channels, input.height(), input.width());

  std::vector<T> mean(channels), inv_std(channels);
  if (training) {
    if (per_channel < 2) {
      throw ShapeError("batchnorm: train mode needs batch*height*width >= 2 per channel");
    }
    for (int c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (int n = 0; n < input.batch(); ++n) {
        for (int h = 0; h < input.height(); ++h) {
          for (int w = 0; w < input.width(); ++w) sum += input(n, c, h, w);
        }
      }
      const double mu = sum / static_cast<double>(per_channel);
      double sq = 0.0;
      for (int n = 0; n < input.batch(); ++n) {
        for (int h = 0; h < input.height(); ++h) {
          for (int w = 0; w < input.width(); ++w) {
            const double d = input(n, c, h, w) - mu;
            sq += d * d;
          }
        }
      }
      const double var = sq / static_cast<double>(per_channel);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      params.running_mean[c] =
          momentum * params.running_mean[c] + (T(1) - momentum) * static_cast<T>(mu);
      params.running_var[c] =
          momentum * params.running_var[c] + (T(1) - momentum) * static_cast<T>(var);
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      mean[c] = params.running_mean[c];
      inv_std[c] = T(1) / std::sqrt(params.running_var[c] + eps);
    }
  }

  if (cache) {
    cache->mean = mean;
    cache->inv_std = inv_std;
    cache->x_hat = Tensor4<T>(input.batch(), channels, input.height(), input.width());
  }
  for (int n = 0; n < input.batch(); ++n) {
    for (int c = 0; c < channels; ++c) {
      for (int h = 0; h < input.height(); ++h) {
        for (int w = 0; w < input.width(); ++w) {
          const T x_hat = (input(n, c, h, w) - mean[c]) * inv_std[c];
          if (cache) cache->x_hat(n, c, h, w) = x_hat;
          output(n, c, h, w) = params.gamma[c] * x_hat + params.beta[c];
        }
      }
    }
  }
  return output;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor4<T>& grad_output,
                                     const BatchNormParams<T>& params,
                                     const BatchNormCache<T>& cache) {
  if (cache.x_hat.size() != grad_output.size()) {
    throw StateError("batchnorm_backward: cache does not match the gradient shape");
  }
  const int channels = grad_output.channels();
  const std::size_t per_channel =
      static_cast<std::size_t>(grad_output.batch()) * grad_output.height() * grad_output.width();

  BatchNormGrads<T> grads;
  grads.input = Tensor4<T>(grad_output.batch(), channels, grad_output.height(),
                           grad_output.width());
  grads.gamma.assign(static_cast<std::size_t>(channels), T(0));
  grads.beta.assign(static_cast<std::size_t>(channels), T(0));

  for (int c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < grad_output.batch(); ++n) {
      for (int h = 0; h < grad_output.height(); ++h) {
        for (int w = 0; w < grad_output.width(); ++w) {
          const double dy = grad_output(n, c, h, w);
          sum_dy += dy;
          sum_dy_xhat += dy * cache.x_hat(n, c, h, w);
        }
      }
    }
    grads.beta[c] = static_cast<T>(sum_dy);
    grads.gamma[c] = static_cast<T>(sum_dy_xhat);
    const double m = static_cast<double>(per_channel);
    const double g = params.gamma[c];
    const double istd = cache.inv_std[c];
    for (int n = 0; n < grad_output.batch(); ++n) {
      for (int h = 0; h < grad_output.height(); ++h) {
        for (int w = 0; w < grad_output.width(); ++w) {
          const double dy = grad_output(n, c, h, w);
          const double x_hat = cache.x_hat(n, c, h, w);
          grads.input(n, c, h, w) = static_cast<T>(
              g * istd * (dy - sum_dy / m - x_hat * sum_dy_xhat / m));
        }
      }
    }
  }
  return grads;
}

template <typename T>
Tensor4<T> fc_forward(const Tensor4<T>& input, const std::vector<T>& weights,
                      int in_dim, int out_dim, const std::vector<T>& bias,
                      const std::string& layer_name) {
  const int k = input.channels() * input.height() * input.width();
  if (k != in_dim) {
    throw ShapeError(layer_name + ": expected input length K=" + std::to_string(in_dim) +
                     ", got K=" + std::to_string(k));
  }
  if (weights.size() != static_cast<std::size_t>(in_dim) * out_dim ||
      bias.size() != static_cast<std::size_t>(out_dim)) {
    throw ShapeError(layer_name + ": weight/bias storage does not match K x M");
  }
  Tensor4<T> output(input.batch(), out_dim, 1, 1);
  ConstMapRM<T> x(input.data(), input.batch(), in_dim);
  ConstMapRM<T> w(weights.data(), in_dim, out_dim);
  MapRM<T> y(output.data(), input.batch(), out_dim);
  y.noalias() = x * w;
  for (int n = 0; n < input.batch(); ++n) {
    for (int m = 0; m < out_dim; ++m) y(n, m) += bias[static_cast<std::size_t>(m)];
  }
  return output;
}

template <typename T>
FcGrads<T> fc_backward(const Tensor4<T>& input, const std::vector<T>& weights,
                       int in_dim, int out_dim, const Tensor4<T>& grad_output) {
  FcGrads<T> grads;
  grads.input = Tensor4<T>(input.batch(), input.channels(), input.height(), input.width());
  grads.weights.assign(static_cast<std::size_t>(in_dim) * out_dim, T(0));
  grads.bias.assign(static_cast<std::size_t>(out_dim), T(0));

  ConstMapRM<T> x(input.data(), input.batch(), in_dim);
  ConstMapRM<T> w(weights.data(), in_dim, out_dim);
  ConstMapRM<T> dy(grad_output.data(), input.batch(), out_dim);
  MapRM<T> dx(grads.input.data(), input.batch(), in_dim);
  MapRM<T> dw(grads.weights.data(), in_dim, out_dim);

  dx.noalias() = dy * w.transpose();
  dw.noalias() = x.transpose() * dy;
  for (int n = 0; n < input.batch(); ++n) {
    for (int m = 0; m < out_dim; ++m) grads.bias[static_cast<std::size_t>(m)] += dy(n, m);
  }
  return grads;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& input) {
  Tensor4<T> output(input.batch(), input.channels(), input.height(), input.width());
  for (std::size_t i = 0; i < input.size(); ++i) {
    output.flat(i) = input.flat(i) > T(0) ? input.flat(i) : T(0);
  }
  return output;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_output, const Tensor4<T>& forward_input) {
  Tensor4<T> grad(grad_output.batch(), grad_output.channels(), grad_output.height(),
                  grad_output.width());
  for (std::size_t i = 0; i < grad_output.size(); ++i) {
    grad.flat(i) = forward_input.flat(i) > T(0) ? grad_output.flat(i) : T(0);
  }
  return grad;
}

template <typename T>
Tensor4<T> flatten(const Tensor4<T>& input) {
  Tensor4<T> out(input.batch(), input.channels() * input.height() * input.width(), 1, 1);
  std::copy(input.data(), input.data() + input.size(), out.data());
  return out;
}

template <typename T>
Tensor4<T> unflatten(const Tensor4<T>& input, const std::array<int, 4>& dims) {
  Tensor4<T> out(dims[0], dims[1], dims[2], dims[3]);
  if (out.size() != input.size()) {
    throw ShapeError("unflatten: element count mismatch");
  }
  std::copy(input.data(), input.data() + input.size(), out.data());
  return out;
}

#define SIGSPP_INSTANTIATE_LAYERS(T)                                                     \
  template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, const Tensor4<T>&,           \
                                        const std::vector<T>&, int, int,                \
                                        const std::string&);                            \
  template ConvGrads<T> conv2d_backward<T>(const Tensor4<T>&, const Tensor4<T>&,        \
                                           const Tensor4<T>&, int, int);                \
  template PoolResult<T> maxpool_forward<T>(const Tensor4<T>&, int, int, int,           \
                                            const std::string&);                        \
  template Tensor4<T> maxpool_backward<T>(const Tensor4<T>&,                            \
                                          const std::vector<std::size_t>&,              \
                                          const std::array<int, 4>&);                   \
  template Tensor4<T> batchnorm_forward<T>(const Tensor4<T>&, BatchNormParams<T>&,      \
                                           bool, BatchNormCache<T>*, T, T);             \
  template BatchNormGrads<T> batchnorm_backward<T>(const Tensor4<T>&,                   \
                                                   const BatchNormParams<T>&,           \
                                                   const BatchNormCache<T>&);           \
  template Tensor4<T> fc_forward<T>(const Tensor4<T>&, const std::vector<T>&, int, int, \
                                    const std::vector<T>&, const std::string&);         \
  template FcGrads<T> fc_backward<T>(const Tensor4<T>&, const std::vector<T>&, int,     \
                                     int, const Tensor4<T>&);                           \
  template Tensor4<T> relu_forward<T>(const Tensor4<T>&);                               \
  template Tensor4<T> relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&);           \
  template Tensor4<T> flatten<T>(const Tensor4<T>&);                                    \
  template Tensor4<T> unflatten<T>(const Tensor4<T>&, const std::array<int, 4>&);

SIGSPP_INSTANTIATE_LAYERS(float)
SIGSPP_INSTANTIATE_LAYERS(double)

#undef SIGSPP_INSTANTIATE_LAYERS

}  // namespace sigspp
