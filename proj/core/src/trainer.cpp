#include "sigspp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sigspp/loss.hpp"

namespace sigspp {

namespace {

constexpr std::uint64_t kEpochSalt = 0x45504f43;  // stream id for epoch rngs
constexpr std::uint64_t kHeadSalt = 0x48454144;   // stream id for fresh heads

// Splits shuffled indices into batches; a final partial batch of size < 2
// is dropped so batch statistics stay defined.
std::vector<std::vector<int>> make_batches(std::vector<int> indices, int batch_size,
                                           int* dropped) {
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t end = std::min(indices.size(), start + batch_size);
    if (end - start < 2) {
      if (dropped) *dropped += static_cast<int>(end - start);
      break;
    }
    batches.emplace_back(indices.begin() + start, indices.begin() + end);
  }
  return batches;
}

struct BatchAccumulator {
  double sum_loss = 0, sum_user = 0, sum_forgery = 0;
  int samples = 0;

  void add(const LossBreakdown<float>& loss, int batch) {
    sum_loss += static_cast<double>(loss.total) * batch;
    sum_user += static_cast<double>(loss.user_term) * batch;
    sum_forgery += static_cast<double>(loss.forgery_term) * batch;
    samples += batch;
  }
};

// Runs one mini-batch: assemble, forward, loss, backward, optimizer step.
LossBreakdown<float> train_batch(Network<float>& net, const std::vector<TrainSample>& samples,
                                 const std::vector<int>& batch_indices,
                                 const std::vector<GrayImage>& augmented,
                                 const TrainConfig& config, OptimizerState<float>& opt) {
  std::vector<const GrayImage*> images;
  std::vector<int> labels, flags;
  images.reserve(batch_indices.size());
  for (std::size_t i = 0; i < batch_indices.size(); ++i) {
    images.push_back(&augmented[i]);
    labels.push_back(samples[batch_indices[i]].label);
    flags.push_back(samples[batch_indices[i]].forgery_flag);
  }
  const Tensor4<float> input = batch_to_tensor(images);
  auto out = net.forward(input, /*training=*/true);
  auto loss = multitask_loss(out.user_logits, out.forgery_logits, labels, flags,
                             static_cast<float>(config.lambda));
  if (!std::isfinite(static_cast<double>(loss.total))) {
    throw NumericError("non-finite training loss; aborting epoch");
  }
  const Gradients<float> grads = net.backward(loss.grad_user_logits, loss.grad_forgery_logits);
  sgd_nesterov_step(net.model(), grads, opt);
  return loss;
}

}  // namespace

Tensor4<float> batch_to_tensor(const std::vector<const GrayImage*>& batch) {
  if (batch.empty()) throw ShapeError("batch_to_tensor: empty batch");
  const int h = batch.front()->height;
  const int w = batch.front()->width;
  Tensor4<float> tensor(static_cast<int>(batch.size()), 1, h, w);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (batch[n]->height != h || batch[n]->width != w) {
      throw ShapeError("batch_to_tensor: mixed image sizes in one batch");
    }
    float* dst = tensor.data() + n * static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < batch[n]->pixels.size(); ++i) {
      dst[i] = static_cast<float>(batch[n]->pixels[i]) * (1.0f / 255.0f);
    }
  }
  return tensor;
}

EpochStats train_epoch_fixed(Network<float>& net, const std::vector<TrainSample>& samples,
                             const TrainConfig& config, OptimizerState<float>& opt,
                             int epoch) {
  if (samples.empty()) throw DataError("train_epoch_fixed: empty dataset");
  const int h = samples.front().image.height;
  const int w = samples.front().image.width;
  for (const auto& s : samples) {
    if (s.image.height != h || s.image.width != w) {
      throw ShapeError("train_epoch_fixed: all images must share one canvas size");
    }
  }

  opt.learning_rate = config.lr_for_epoch(epoch);
  opt.epoch = epoch;
  Rng rng(Rng::mix(config.seed, kEpochSalt + static_cast<std::uint64_t>(epoch)));
  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);

  EpochStats stats;
  stats.learning_rate = opt.learning_rate;
  const auto batches = make_batches(std::move(order), config.batch_size,
                                    &stats.samples_dropped);
  BatchAccumulator acc;
  for (const auto& batch : batches) {
    std::vector<GrayImage> augmented;
    augmented.reserve(batch.size());
    for (int idx : batch) {
      if (config.crop_h > 0 && config.crop_w > 0) {
        augmented.push_back(random_crop(samples[idx].image, config.crop_h,
                                        config.crop_w, rng));
      } else {
        augmented.push_back(samples[idx].image);
      }
    }
    const auto loss = train_batch(net, samples, batch, augmented, config, opt);
    acc.add(loss, static_cast<int>(batch.size()));
    stats.trace.push_back(BatchTrace{0, batch});
    ++stats.batches;
  }
  stats.samples_seen = acc.samples;
  if (acc.samples > 0) {
    stats.mean_loss = acc.sum_loss / acc.samples;
    stats.mean_user_loss = acc.sum_user / acc.samples;
    stats.mean_forgery_loss = acc.sum_forgery / acc.samples;
  }
  return stats;
}

EpochStats train_epoch_multisize(Network<float>& net,
                                 const std::vector<TrainSample>& samples,
                                 const std::vector<SizeGroup>& groups,
                                 const TrainConfig& config, OptimizerState<float>& opt,
                                 int epoch) {
  bool any = false;
  for (const auto& g : groups) any = any || !g.sample_indices.empty();
  if (!any) throw DataError("train_epoch_multisize: all size groups are empty");

  opt.learning_rate = config.lr_for_epoch(epoch);
  opt.epoch = epoch;
  const std::uint64_t epoch_seed =
      Rng::mix(config.seed, kEpochSalt + static_cast<std::uint64_t>(epoch));

  EpochStats stats;
  stats.learning_rate = opt.learning_rate;

  // Per-group batch queues, shuffled with group-specific streams.
  struct GroupState {
    int group_id;
    std::vector<std::vector<int>> batches;
    std::size_t cursor = 0;
    bool has_next() const { return cursor < batches.size(); }
  };
  std::vector<GroupState> states;
  std::vector<SizeGroup> ordered = groups;
  std::sort(ordered.begin(), ordered.end(),
            [](const SizeGroup& a, const SizeGroup& b) { return a.canvas_id < b.canvas_id; });
  for (const auto& group : ordered) {
    if (group.sample_indices.empty()) continue;
    Rng rng(Rng::mix(epoch_seed, static_cast<std::uint64_t>(group.canvas_id)));
    std::vector<int> order = group.sample_indices;
    rng.shuffle(order);
    GroupState state;
    state.group_id = group.canvas_id;
    state.batches = make_batches(std::move(order), config.batch_size,
                                 &stats.samples_dropped);
    if (!state.batches.empty()) states.push_back(std::move(state));
  }

  BatchAccumulator acc;
  std::vector<std::size_t> active(states.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
  int batch_counter = 0;
  while (!active.empty()) {
    std::vector<std::size_t> still_active;
    for (std::size_t si : active) {
      GroupState& state = states[si];
      if (!state.has_next()) continue;
      const std::vector<int>& batch = state.batches[state.cursor++];
      Rng batch_rng(Rng::mix(epoch_seed, 0x42415443 + static_cast<std::uint64_t>(
                                             state.group_id) * 131071 + batch_counter));
      const PadAmount pad = draw_pad(config.max_pad, batch_rng);
      std::vector<GrayImage> augmented;
      augmented.reserve(batch.size());
      for (int idx : batch) {
        augmented.push_back(pad_random_offset(samples[idx].image, pad, batch_rng));
      }
      const auto loss = train_batch(net, samples, batch, augmented, config, opt);
      acc.add(loss, static_cast<int>(batch.size()));
      stats.trace.push_back(BatchTrace{state.group_id, batch});
      ++stats.batches;
      ++batch_counter;
      if (state.has_next()) still_active.push_back(si);
    }
    active = std::move(still_active);
  }

  stats.samples_seen = acc.samples;
  if (acc.samples > 0) {
    stats.mean_loss = acc.sum_loss / acc.samples;
    stats.mean_user_loss = acc.sum_user / acc.samples;
    stats.mean_forgery_loss = acc.sum_forgery / acc.samples;
  }
  return stats;
}

namespace {

// Groups evaluation samples by exact image size so batches stay homogeneous.
std::map<std::pair<int, int>, std::vector<int>> group_by_size(
    const std::vector<TrainSample>& samples) {
  std::map<std::pair<int, int>, std::vector<int>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    groups[{samples[i].image.height, samples[i].image.width}].push_back(
        static_cast<int>(i));
  }
  return groups;
}

}  // namespace

double classification_accuracy(Model<float>& model, const std::vector<TrainSample>& samples) {
  Network<float> net(model);
  int correct = 0, counted = 0;
  for (const auto& [size, indices] : group_by_size(samples)) {
    for (std::size_t start = 0; start < indices.size(); start += 32) {
      const std::size_t end = std::min(indices.size(), start + 32);
      std::vector<const GrayImage*> images;
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(&samples[indices[i]].image);
      }
      const auto out = net.forward(batch_to_tensor(images), /*training=*/false);
      for (std::size_t i = start; i < end; ++i) {
        const TrainSample& s = samples[indices[i]];
        if (s.forgery_flag) continue;
        int argmax = 0;
        const int n = static_cast<int>(i - start);
        for (int j = 1; j < out.user_logits.channels(); ++j) {
          if (out.user_logits(n, j, 0, 0) > out.user_logits(n, argmax, 0, 0)) argmax = j;
        }
        ++counted;
        if (argmax == s.label) ++correct;
      }
    }
  }
  if (counted == 0) throw DataError("classification_accuracy: no genuine samples");
  return static_cast<double>(correct) / counted;
}

double classification_loss(Model<float>& model, const std::vector<TrainSample>& samples) {
  Network<float> net(model);
  double sum = 0;
  int counted = 0;
  for (const auto& [size, indices] : group_by_size(samples)) {
    for (std::size_t start = 0; start < indices.size(); start += 32) {
      const std::size_t end = std::min(indices.size(), start + 32);
      std::vector<const GrayImage*> images;
      std::vector<int> labels, flags;
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(&samples[indices[i]].image);
        labels.push_back(samples[indices[i]].label);
        flags.push_back(samples[indices[i]].forgery_flag);
      }
      const auto out = net.forward(batch_to_tensor(images), /*training=*/false);
      const auto loss = multitask_loss<float>(out.user_logits, {}, labels, flags, 0.0f);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (flags[i]) continue;
        sum += loss.per_sample_user[i];
        ++counted;
      }
    }
  }
  if (counted == 0) throw DataError("classification_loss: no genuine samples");
  return sum / counted;
}

Model<float> finetune(const Model<float>& source, const std::vector<TrainSample>& target,
                      const std::vector<SizeGroup>& groups, const FinetuneConfig& config,
                      std::vector<EpochStats>* stats_out) {
  if (config.new_user_classes < 2) {
    throw ConfigError("finetune: new_user_classes must be >= 2");
  }
  Model<float> model = source;
  replace_user_head(model, config.new_user_classes, Rng::mix(config.seed, kHeadSalt),
                    config.keep_forgery_head);

  TrainConfig train;
  train.epochs = config.epochs;
  train.batch_size = config.batch_size;
  train.lambda = config.lambda;
  train.momentum = config.momentum;
  train.weight_decay = config.weight_decay;
  train.seed = config.seed;
  train.max_pad = config.max_pad;
  train.lr_override = config.learning_rate;

  Network<float> net(model);
  OptimizerState<float> opt = OptimizerState<float>::make(
      model, config.learning_rate, config.momentum, config.weight_decay);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochStats stats = groups.size() <= 1
                           ? train_epoch_fixed(net, target, train, opt, epoch)
                           : train_epoch_multisize(net, target, groups, train, opt, epoch);
    if (stats_out) stats_out->push_back(std::move(stats));
  }
  return model;
}

}  // namespace sigspp
