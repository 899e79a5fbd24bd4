#include "sigspp/optimizer.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "sigspp/errors.hpp"

namespace sigspp {

double lr_schedule(int epoch, double base_lr) {
  if (epoch < 0) throw ConfigError("lr_schedule: negative epoch");
  if (epoch < 20) return base_lr;
  if (epoch < 40) return base_lr / 10.0;
  return base_lr / 100.0;
}

namespace {

template <typename T>
struct ParamSlot {
  T* data;
  std::size_t size;
  bool decay;
  std::string name;
};

template <typename T>
std::vector<ParamSlot<T>> collect(Model<T>& model, Gradients<T>& grads, bool take_grad) {
  std::vector<ParamSlot<T>> slots;
  for_each_param(model, grads,
                 [&](T* param, T* grad, std::size_t size, bool decay, const std::string& name) {
                   slots.push_back(ParamSlot<T>{take_grad ? grad : param, size, decay, name});
                 });
  return slots;
}

}  // namespace

template <typename T>
void sgd_nesterov_step(Model<T>& model, const Gradients<T>& gradients,
                       OptimizerState<T>& state) {
  auto& grads = const_cast<Gradients<T>&>(gradients);
  const auto params = collect(model, grads, false);
  const auto grad_slots = collect(model, grads, true);
  std::vector<ParamSlot<T>> vel_slots;
  if (state.momentum > 0) {
    if (!state.velocity_ready) {
      state.velocity = Gradients<T>::zeros_like(model);
      state.velocity_ready = true;
    }
    vel_slots = collect(model, state.velocity, true);
  }

  for (std::size_t s = 0; s < grad_slots.size(); ++s) {
    if (grad_slots[s].size != params[s].size) {
      throw ShapeError("sgd step: gradient shape mismatch at " + params[s].name);
    }
    for (std::size_t i = 0; i < grad_slots[s].size; ++i) {
      if (!std::isfinite(static_cast<double>(grad_slots[s].data[i]))) {
        throw NumericError("non-finite gradient in " + params[s].name +
                           "; aborting optimizer step");
      }
    }
  }

  const T lr = static_cast<T>(state.learning_rate);
  const T mu = static_cast<T>(state.momentum);
  const T wd = static_cast<T>(state.weight_decay);
  for (std::size_t s = 0; s < params.size(); ++s) {
    T* w = params[s].data;
    const T* g = grad_slots[s].data;
    const bool decay = params[s].decay && wd != T(0);
    if (state.momentum > 0) {
      T* v = vel_slots[s].data;
      for (std::size_t i = 0; i < params[s].size; ++i) {
        const T gi = decay ? g[i] + wd * w[i] : g[i];
        v[i] = mu * v[i] - lr * gi;
        w[i] += mu * v[i] - lr * gi;
      }
    } else {
      for (std::size_t i = 0; i < params[s].size; ++i) {
        const T gi = decay ? g[i] + wd * w[i] : g[i];
        w[i] -= lr * gi;
      }
    }
  }
}

template void sgd_nesterov_step<float>(Model<float>&, const Gradients<float>&,
                                       OptimizerState<float>&);
template void sgd_nesterov_step<double>(Model<double>&, const Gradients<double>&,
                                        OptimizerState<double>&);

}  // namespace sigspp
