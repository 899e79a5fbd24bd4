#include "sigspp/network.hpp"

namespace sigspp {

template <typename T>
typename Network<T>::Output Network<T>::forward(const Tensor4<T>& input, bool training) {
  conv_cache_.clear();
  pool_cache_.clear();
  spp_cache_.clear();
  fc_cache_.clear();
  flattened_ = false;
  flatten_dims_ = {};
  has_cache_ = training;

  Model<T>& m = *model_;
  Tensor4<T> x = input;
  std::size_t conv_i = 0, fc_i = 0;
  for (const LayerSpec& layer : m.spec.layers) {
    switch (layer.kind) {
      case LayerKind::kConv: {
        ConvParams<T>& p = m.conv[conv_i];
        ConvRowCache cache;
        if (training) cache.input = x;
        Tensor4<T> pre_bn =
            conv2d_forward(x, p.weights, p.bias, p.stride, p.padding,
                           "conv" + std::to_string(conv_i + 1));
        Tensor4<T> pre_relu =
            batchnorm_forward(pre_bn, m.conv_bn[conv_i], training,
                              training ? &cache.bn : nullptr);
        x = relu_forward(pre_relu);
        if (training) {
          cache.pre_bn = std::move(pre_bn);
          cache.pre_relu = std::move(pre_relu);
          conv_cache_.push_back(std::move(cache));
        }
        ++conv_i;
        break;
      }
      case LayerKind::kMaxPool: {
        PoolResult<T> pooled = maxpool_forward(x, layer.kernel, layer.stride,
                                               layer.padding);
        if (training) {
          pool_cache_.push_back(PoolRowCache{x.dims(), std::move(pooled.argmax)});
        }
        x = std::move(pooled.output);
        break;
      }
      case LayerKind::kSpp: {
        PyramidSpec pyramid{layer.pyramid_levels};
        SppResult<T> pooled = spp_forward(x, pyramid);
        if (training) {
          spp_cache_.push_back(PoolRowCache{pooled.input_dims, std::move(pooled.argmax)});
        }
        x = std::move(pooled.output);
        flattened_ = true;  // spp output is already (N, C*sum(n^2), 1, 1)
        break;
      }
      case LayerKind::kFc: {
        if (!flattened_ && (x.height() != 1 || x.width() != 1)) {
          flatten_dims_ = x.dims();
          x = flatten(x);
          flattened_ = true;
        } else if (!flattened_) {
          flatten_dims_ = x.dims();
          flattened_ = true;
        }
        FcParams<T>& p = m.fc[fc_i];
        FcRowCache cache;
        if (training) cache.input = x;
        Tensor4<T> pre_bn = fc_forward(x, p.weights, p.in_dim, p.out_dim, p.bias,
                                       "fc" + std::to_string(fc_i + 1));
        Tensor4<T> pre_relu =
            batchnorm_forward(pre_bn, m.fc_bn[fc_i], training,
                              training ? &cache.bn : nullptr);
        x = relu_forward(pre_relu);
        if (training) {
          cache.pre_bn = std::move(pre_bn);
          cache.pre_relu = std::move(pre_relu);
          fc_cache_.push_back(std::move(cache));
        }
        ++fc_i;
        break;
      }
      default:
        throw ConfigError("unexpected layer kind in catalog spec");
    }
  }

  features_ = x;
  Output out;
  out.features = x;
  out.user_logits = fc_forward(x, m.user_head.weights, m.user_head.in_dim,
                               m.user_head.out_dim, m.user_head.bias, "user_head");
  if (m.has_forgery_head()) {
    Tensor4<T> f = fc_forward(x, m.forgery_head.weights, m.forgery_head.in_dim,
                              m.forgery_head.out_dim, m.forgery_head.bias,
                              "forgery_head");
    out.forgery_logits.resize(static_cast<std::size_t>(f.batch()));
    for (int n = 0; n < f.batch(); ++n) out.forgery_logits[n] = f(n, 0, 0, 0);
  }
  if (!out.user_logits.all_finite()) {
    throw NumericError("forward pass produced non-finite logits");
  }
  return out;
}

template <typename T>
Gradients<T> Network<T>::backward(const Tensor4<T>& grad_user_logits,
                                  const std::vector<T>& grad_forgery_logits) {
  if (!has_cache_) {
    throw StateError("backward called without a preceding training forward pass");
  }
  Model<T>& m = *model_;
  Gradients<T> grads = Gradients<T>::zeros_like(m);

  // Heads: both consume the shared feature vector.
  FcGrads<T> user = fc_backward(features_, m.user_head.weights, m.user_head.in_dim,
                                m.user_head.out_dim, grad_user_logits);
  grads.user_head_w = std::move(user.weights);
  grads.user_head_b = std::move(user.bias);
  Tensor4<T> dx = std::move(user.input);

  if (m.has_forgery_head()) {
    if (grad_forgery_logits.size() != static_cast<std::size_t>(features_.batch())) {
      throw ShapeError("backward: forgery-head gradient batch mismatch");
    }
    Tensor4<T> df(features_.batch(), 1, 1, 1);
    for (int n = 0; n < features_.batch(); ++n) df(n, 0, 0, 0) = grad_forgery_logits[n];
    FcGrads<T> forgery = fc_backward(features_, m.forgery_head.weights,
                                     m.forgery_head.in_dim, m.forgery_head.out_dim, df);
    grads.forgery_head_w = std::move(forgery.weights);
    grads.forgery_head_b = std::move(forgery.bias);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.flat(i) += forgery.input.flat(i);
  }

  std::size_t conv_i = conv_cache_.size();
  std::size_t pool_i = pool_cache_.size();
  std::size_t spp_i = spp_cache_.size();
  std::size_t fc_i = fc_cache_.size();

  for (auto it = m.spec.layers.rbegin(); it != m.spec.layers.rend(); ++it) {
    switch (it->kind) {
      case LayerKind::kFc: {
        --fc_i;
        FcRowCache& cache = fc_cache_[fc_i];
        Tensor4<T> d_pre_relu = relu_backward(dx, cache.pre_relu);
        BatchNormGrads<T> bn =
            batchnorm_backward(d_pre_relu, m.fc_bn[fc_i], cache.bn);
        grads.fc_bn_gamma[fc_i] = std::move(bn.gamma);
        grads.fc_bn_beta[fc_i] = std::move(bn.beta);
        FcGrads<T> fg = fc_backward(cache.input, m.fc[fc_i].weights, m.fc[fc_i].in_dim,
                                    m.fc[fc_i].out_dim, bn.input);
        grads.fc_w[fc_i] = std::move(fg.weights);
        grads.fc_b[fc_i] = std::move(fg.bias);
        dx = std::move(fg.input);
        if (fc_i == 0 && flatten_dims_[0] != 0) {
          dx = unflatten(dx, flatten_dims_);
        }
        break;
      }
      case LayerKind::kSpp: {
        --spp_i;
        PoolRowCache& cache = spp_cache_[spp_i];
        dx = spp_backward(dx, cache.argmax, cache.input_dims);
        break;
      }
      case LayerKind::kMaxPool: {
        --pool_i;
        PoolRowCache& cache = pool_cache_[pool_i];
        dx = maxpool_backward(dx, cache.argmax, cache.input_dims);
        break;
      }
      case LayerKind::kConv: {
        --conv_i;
        ConvRowCache& cache = conv_cache_[conv_i];
        Tensor4<T> d_pre_relu = relu_backward(dx, cache.pre_relu);
        BatchNormGrads<T> bn =
            batchnorm_backward(d_pre_relu, m.conv_bn[conv_i], cache.bn);
        grads.conv_bn_gamma[conv_i] = std::move(bn.gamma);
        grads.conv_bn_beta[conv_i] = std::move(bn.beta);
        ConvGrads<T> cg = conv2d_backward(cache.input, m.conv[conv_i].weights, bn.input,
                                          m.conv[conv_i].stride, m.conv[conv_i].padding);
        grads.conv_w[conv_i] = std::move(cg.weights);
        grads.conv_b[conv_i] = std::move(cg.bias);
        dx = std::move(cg.input);
        break;
      }
      default:
        throw ConfigError("unexpected layer kind in catalog spec");
    }
  }

  input_gradient_ = std::move(dx);
  has_cache_ = false;
  return grads;
}

template <typename T>
const Tensor4<T>& Network<T>::last_input_gradient() const {
  if (input_gradient_.empty()) {
    throw StateError("no input gradient available; run backward first");
  }
  return input_gradient_;
}

template class Network<float>;
template class Network<double>;

}  // namespace sigspp
