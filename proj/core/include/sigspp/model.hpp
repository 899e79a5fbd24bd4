#ifndef SIGSPP_MODEL_HPP_
#define SIGSPP_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "sigspp/layer_spec.hpp"
#include "sigspp/layers.hpp"
#include "sigspp/spp.hpp"
#include "sigspp/tensor.hpp"

namespace sigspp {

template <typename T>
struct ConvParams {
  Tensor4<T> weights;  // (filters, in_channels, k, k)
  std::vector<T> bias;
  int stride = 1;
  int padding = 0;
};

template <typename T>
struct FcParams {
  std::vector<T> weights;  // K x M, row-major
  std::vector<T> bias;
  int in_dim = 0;
  int out_dim = 0;
};

// Shape of each activation while propagating a spec. For spp rows the
// spatial dims collapse into the channel count.
struct ActivationShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  int flat() const { return channels * height * width; }
};

// Propagates the spec over the given input size and returns the shape
// after every row. Throws ShapeError when a layer does not fit.
std::vector<ActivationShape> propagate_shapes(const NetworkSpec& spec, int height,
                                              int width);

template <typename T>
struct Model {
  NetworkSpec spec;
  std::vector<ConvParams<T>> conv;          // conv rows in order
  std::vector<BatchNormParams<T>> conv_bn;  // one per conv row
  std::vector<FcParams<T>> fc;              // fc rows in order
  std::vector<BatchNormParams<T>> fc_bn;    // one per fc row
  FcParams<T> user_head;                    // feature_dim x M + softmax
  FcParams<T> forgery_head;                 // feature_dim x 1 + sigmoid, if enabled

  int feature_dim() const { return fc.empty() ? 0 : fc.back().out_dim; }
  bool has_forgery_head() const { return spec.forgery_head; }

  template <typename U>
  Model<U> cast() const;
};

// Allocates a zero-weight model with every array shaped by the spec
// (weight shapes are a pure function of spec + input channel count).
template <typename T>
Model<T> build_model_shell(const NetworkSpec& spec);

// Glorot/Xavier uniform initialization: every weight is drawn uniformly
// in +-sqrt(6 / (fan_in + fan_out)), biases are zero, batch-norm starts
// at identity (gamma 1, beta 0, running mean 0, running var 1). The draw
// order is fixed (conv rows, fc rows, user head, forgery head; weights in
// storage order), so a seed pins the model bit for bit.
template <typename T>
Model<T> glorot_init(const NetworkSpec& spec, std::uint64_t seed);

// Replaces the user head with a fresh glorot-initialized M2-unit head.
// When keep_forgery_head is false the sigmoid head is dropped as well.
template <typename T>
void replace_user_head(Model<T>& model, int new_user_classes, std::uint64_t seed,
                       bool keep_forgery_head = false);

// Gradient (and velocity) storage mirroring a model's learnable arrays.
template <typename T>
struct Gradients {
  std::vector<Tensor4<T>> conv_w;
  std::vector<std::vector<T>> conv_b;
  std::vector<std::vector<T>> conv_bn_gamma, conv_bn_beta;
  std::vector<std::vector<T>> fc_w, fc_b;
  std::vector<std::vector<T>> fc_bn_gamma, fc_bn_beta;
  std::vector<T> user_head_w, user_head_b;
  std::vector<T> forgery_head_w, forgery_head_b;

  static Gradients zeros_like(const Model<T>& model);
};

// Visits every learnable array of the model together with its slot in a
// Gradients structure. decay marks arrays subject to L2 weight decay
// (weights only; biases and batch-norm parameters are exempt).
template <typename T, typename Fn>
void for_each_param(Model<T>& model, Gradients<T>& grads, Fn&& fn) {
  for (std::size_t i = 0; i < model.conv.size(); ++i) {
    fn(model.conv[i].weights.data(), grads.conv_w[i].data(),
       model.conv[i].weights.size(), true, "conv" + std::to_string(i + 1) + ".w");
    fn(model.conv[i].bias.data(), grads.conv_b[i].data(), model.conv[i].bias.size(),
       false, "conv" + std::to_string(i + 1) + ".b");
    fn(model.conv_bn[i].gamma.data(), grads.conv_bn_gamma[i].data(),
       model.conv_bn[i].gamma.size(), false, "conv" + std::to_string(i + 1) + ".bn.gamma");
    fn(model.conv_bn[i].beta.data(), grads.conv_bn_beta[i].data(),
       model.conv_bn[i].beta.size(), false, "conv" + std::to_string(i + 1) + ".bn.beta");
  }
  for (std::size_t i = 0; i < model.fc.size(); ++i) {
    fn(model.fc[i].weights.data(), grads.fc_w[i].data(), model.fc[i].weights.size(),
       true, "fc" + std::to_string(i + 1) + ".w");
    fn(model.fc[i].bias.data(), grads.fc_b[i].data(), model.fc[i].bias.size(), false,
       "fc" + std::to_string(i + 1) + ".b");
    fn(model.fc_bn[i].gamma.data(), grads.fc_bn_gamma[i].data(),
       model.fc_bn[i].gamma.size(), false, "fc" + std::to_string(i + 1) + ".bn.gamma");
    fn(model.fc_bn[i].beta.data(), grads.fc_bn_beta[i].data(),
       model.fc_bn[i].beta.size(), false, "fc" + std::to_string(i + 1) + ".bn.beta");
  }
  fn(model.user_head.weights.data(), grads.user_head_w.data(),
     model.user_head.weights.size(), true, "user_head.w");
  fn(model.user_head.bias.data(), grads.user_head_b.data(), model.user_head.bias.size(),
     false, "user_head.b");
  if (model.has_forgery_head()) {
    fn(model.forgery_head.weights.data(), grads.forgery_head_w.data(),
       model.forgery_head.weights.size(), true, "forgery_head.w");
    fn(model.forgery_head.bias.data(), grads.forgery_head_b.data(),
       model.forgery_head.bias.size(), false, "forgery_head.b");
  }
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out;
  out.spec = spec;
  for (const auto& c : conv) {
    ConvParams<U> cu;
    cu.weights = c.weights.template cast<U>();
    cu.bias.assign(c.bias.begin(), c.bias.end());
    cu.stride = c.stride;
    cu.padding = c.padding;
    out.conv.push_back(std::move(cu));
  }
  for (const auto& bn : conv_bn) {
    BatchNormParams<U> b(bn.channels());
    b.gamma.assign(bn.gamma.begin(), bn.gamma.end());
    b.beta.assign(bn.beta.begin(), bn.beta.end());
    b.running_mean.assign(bn.running_mean.begin(), bn.running_mean.end());
    b.running_var.assign(bn.running_var.begin(), bn.running_var.end());
    out.conv_bn.push_back(std::move(b));
  }
  auto cast_fc = [](const FcParams<T>& f) {
    FcParams<U> fu;
    fu.weights.assign(f.weights.begin(), f.weights.end());
    fu.bias.assign(f.bias.begin(), f.bias.end());
    fu.in_dim = f.in_dim;
    fu.out_dim = f.out_dim;
    return fu;
  };
  for (const auto& f : fc) out.fc.push_back(cast_fc(f));
  for (const auto& bn : fc_bn) {
    BatchNormParams<U> b(bn.channels());
    b.gamma.assign(bn.gamma.begin(), bn.gamma.end());
    b.beta.assign(bn.beta.begin(), bn.beta.end());
    b.running_mean.assign(bn.running_mean.begin(), bn.running_mean.end());
    b.running_var.assign(bn.running_var.begin(), bn.running_var.end());
    out.fc_bn.push_back(std::move(b));
  }
  out.user_head = cast_fc(user_head);
  out.forgery_head = cast_fc(forgery_head);
  return out;
}

}  // namespace sigspp

#endif  // SIGSPP_MODEL_HPP_
