#ifndef SIGSPP_OPTIMIZER_HPP_
#define SIGSPP_OPTIMIZER_HPP_

#include "sigspp/model.hpp"

namespace sigspp {

// Three-phase step schedule: 1e-3 for epochs 0-19, divided by 10 at
// epochs 20 and 40.
double lr_schedule(int epoch, double base_lr = 1e-3);

template <typename T>
struct OptimizerState {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  // Velocity buffers mirror the weights; only allocated when momentum > 0.
  Gradients<T> velocity;
  int epoch = 0;
  bool velocity_ready = false;

  static OptimizerState make(const Model<T>& model, double learning_rate,
                             double momentum = 0.9, double weight_decay = 1e-4) {
    OptimizerState state;
    state.learning_rate = learning_rate;
    state.momentum = momentum;
    state.weight_decay = weight_decay;
    if (momentum > 0) {
      state.velocity = Gradients<T>::zeros_like(model);
      state.velocity_ready = true;
    }
    return state;
  }
};

// One SGD step with Nesterov momentum (momentum formulation of Sutskever
// et al., velocity form):
//   v <- mu * v - lr * g
//   w <- w + mu * v - lr * g
// with L2 weight decay folded into g for weight arrays (biases and
// batch-norm parameters are exempt). Throws NumericError on non-finite
// gradients, naming the offending array, without touching the model.
template <typename T>
void sgd_nesterov_step(Model<T>& model, const Gradients<T>& gradients,
                       OptimizerState<T>& state);

}  // namespace sigspp

#endif  // SIGSPP_OPTIMIZER_HPP_
