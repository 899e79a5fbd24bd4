#ifndef SIGSPP_TRAINER_HPP_
#define SIGSPP_TRAINER_HPP_

#include <cstdint>
#include <vector>

#include "sigspp/network.hpp"
#include "sigspp/optimizer.hpp"
#include "sigspp/preprocess.hpp"

namespace sigspp {

enum class TrainProtocol { kFixed, kMulti };

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  double lambda = 0.5;        // Eq-style trade-off; used iff the forgery head exists
  double base_lr = 1e-3;      // divided by 10 at epochs 20 and 40
  double momentum = 0.9;
  double weight_decay = 1e-4;
  TrainProtocol protocol = TrainProtocol::kMulti;
  std::uint64_t seed = 1;
  PadAmount max_pad;          // multi-size protocol augmentation
  int crop_h = 0, crop_w = 0; // fixed-size protocol augmentation (0 = off)
  double lr_override = 0.0;   // constant lr when > 0 (fine-tuning)

  double lr_for_epoch(int epoch) const {
    return lr_override > 0.0 ? lr_override : lr_schedule(epoch, base_lr);
  }
};

// One preprocessed training sample, already placed on its canvas.
struct TrainSample {
  GrayImage image;
  int label = 0;         // user index within the training set
  int forgery_flag = 0;  // 1 for skilled-forgery samples
};

// Samples sharing one canvas size; multi-size training round-robins over
// these in ascending id order.
struct SizeGroup {
  int canvas_id = 0;
  std::vector<int> sample_indices;
};

struct BatchTrace {
  int group_id = 0;
  std::vector<int> sample_indices;
};

struct EpochStats {
  double mean_loss = 0;
  double mean_user_loss = 0;
  double mean_forgery_loss = 0;
  double learning_rate = 0;
  int batches = 0;
  int samples_seen = 0;
  int samples_dropped = 0;  // final partial batches of size < 2
  std::vector<BatchTrace> trace;
};

// Scales pixels to [0, 1] and stacks a homogeneous batch into a tensor.
Tensor4<float> batch_to_tensor(const std::vector<const GrayImage*>& batch);

// One pass over all samples in random order, mini-batches of
// config.batch_size (final partial batch kept when >= 2, dropped
// otherwise). Augmentation is a per-image random crop when config.crop_*
// is set. All images must share one size. Epoch order and augmentation
// derive from (config.seed, epoch), so runs are reproducible and a
// reloaded checkpoint continues identically.
EpochStats train_epoch_fixed(Network<float>& net, const std::vector<TrainSample>& samples,
                             const TrainConfig& config, OptimizerState<float>& opt,
                             int epoch);

// Multi-size epoch: takes one mini-batch per active group per cycle,
// dropping exhausted groups from the active set, until all are exhausted.
// Augments by enlarging the canvas with background padding (pad amount
// drawn per batch, placement per image).
EpochStats train_epoch_multisize(Network<float>& net,
                                 const std::vector<TrainSample>& samples,
                                 const std::vector<SizeGroup>& groups,
                                 const TrainConfig& config, OptimizerState<float>& opt,
                                 int epoch);

// Fraction of non-forgery samples whose user head argmax matches the
// label. Eval mode; batches may mix sizes (grouped internally).
double classification_accuracy(Model<float>& model, const std::vector<TrainSample>& samples);

// Mean user cross-entropy over non-forgery samples, eval mode.
double classification_loss(Model<float>& model, const std::vector<TrainSample>& samples);

struct FinetuneConfig {
  int epochs = 0;
  double learning_rate = 5e-4;  // reduced, constant
  int new_user_classes = 0;     // M2
  std::uint64_t seed = 1;
  bool keep_forgery_head = false;
  int batch_size = 32;
  double lambda = 0.5;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  PadAmount max_pad;
};

// Replaces the user head with a fresh M2-unit softmax head and trains all
// layers on the target samples at the reduced learning rate. groups
// follow the protocol sizing: one group (plain fixed), two groups (spp
// trained fixed: source + target max canvas), or the target's 5 canvases
// (multi). Group alternation is per mini-batch.
Model<float> finetune(const Model<float>& source, const std::vector<TrainSample>& target,
                      const std::vector<SizeGroup>& groups, const FinetuneConfig& config,
                      std::vector<EpochStats>* stats_out = nullptr);

}  // namespace sigspp

#endif  // SIGSPP_TRAINER_HPP_
