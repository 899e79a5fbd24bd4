#include <doctest.h>

#include <set>

#include "sigspp/trainer.hpp"
#include "test_support.hpp"

using namespace sigspp;

namespace {

NetworkSpec tiny_train_spec(int classes, bool forgery) {
  NetworkSpec spec = NetworkSpec::from_string("conv3-6-s2-p1,conv3-8-p1,spp-2-1,FC1-16");
  spec.user_classes = classes;
  spec.forgery_head = forgery;
  return spec;
}

// Writer-specific blob pattern: learnable at desk scale in a few epochs.
GrayImage pattern_image(int writer, int index, int h, int w) {
  GrayImage img(h, w, 0);
  Rng rng(Rng::mix(1000 + static_cast<std::uint64_t>(writer), index));
  // writer picks the quadrant and intensity band
  const int qy = (writer % 2) * h / 2;
  const int qx = ((writer / 2) % 2) * w / 2;
  for (int k = 0; k < 30; ++k) {
    const int y = qy + static_cast<int>(rng.uniform_int(0, h / 2 - 1));
    const int x = qx + static_cast<int>(rng.uniform_int(0, w / 2 - 1));
    img.at(y, x) = static_cast<std::uint8_t>(150 + writer * 20 + rng.uniform_int(0, 20));
  }
  return img;
}

std::vector<TrainSample> pattern_dataset(int writers, int per_writer, int h, int w) {
  std::vector<TrainSample> samples;
  for (int writer = 0; writer < writers; ++writer) {
    for (int k = 0; k < per_writer; ++k) {
      samples.push_back(TrainSample{pattern_image(writer, k, h, w), writer, 0});
    }
  }
  return samples;
}

}  // namespace

TEST_CASE("lr = 0 leaves the weights unchanged after an epoch") {
  auto samples = pattern_dataset(3, 4, 16, 20);
  auto model = glorot_init<float>(tiny_train_spec(3, false), 5);
  const auto before = model;
  Network<float> net(model);
  TrainConfig config;
  config.base_lr = 0.0;
  config.batch_size = 4;
  config.seed = 9;
  auto opt = OptimizerState<float>::make(model, 0.0, config.momentum, config.weight_decay);
  const auto stats = train_epoch_fixed(net, samples, config, opt, 0);
  CHECK(stats.samples_seen == 12);
  CHECK(model.conv[0].weights.data()[0] == before.conv[0].weights.data()[0]);
  CHECK(model.fc[0].weights == before.fc[0].weights);
  CHECK(model.user_head.weights == before.user_head.weights);
}

TEST_CASE("identical seeds give identical loss trajectories") {
  const auto run = [] {
    auto samples = pattern_dataset(3, 4, 16, 20);
    auto model = glorot_init<float>(tiny_train_spec(3, false), 5);
    Network<float> net(model);
    TrainConfig config;
    config.batch_size = 4;
    config.seed = 77;
    auto opt = OptimizerState<float>::make(model, config.base_lr, config.momentum,
                                           config.weight_decay);
    std::vector<double> losses;
    for (int epoch = 0; epoch < 2; ++epoch) {
      losses.push_back(train_epoch_fixed(net, samples, config, opt, epoch).mean_loss);
    }
    return losses;
  };
  CHECK(run() == run());
}

TEST_CASE("training reduces the loss on a learnable pattern set") {
  auto samples = pattern_dataset(4, 6, 16, 20);
  auto model = glorot_init<float>(tiny_train_spec(4, false), 5);
  Network<float> net(model);
  TrainConfig config;
  config.batch_size = 8;
  config.seed = 13;
  auto opt = OptimizerState<float>::make(model, config.base_lr, config.momentum,
                                         config.weight_decay);
  const double first = train_epoch_fixed(net, samples, config, opt, 0).mean_loss;
  double last = first;
  for (int epoch = 1; epoch < 12; ++epoch) {
    last = train_epoch_fixed(net, samples, config, opt, epoch).mean_loss;
  }
  CHECK(last < first);
}

TEST_CASE("final partial batch policy: kept at >= 2, dropped at 1") {
  auto model = glorot_init<float>(tiny_train_spec(3, false), 6);
  TrainConfig config;
  config.batch_size = 4;
  config.seed = 3;

  {
    auto samples = pattern_dataset(3, 3, 12, 12);  // 9 samples: 4+4+1
    Network<float> net(model);
    auto opt = OptimizerState<float>::make(model, 1e-3, 0.9, 0.0);
    const auto stats = train_epoch_fixed(net, samples, config, opt, 0);
    CHECK(stats.batches == 2);
    CHECK(stats.samples_seen == 8);
    CHECK(stats.samples_dropped == 1);
  }
  {
    auto samples = pattern_dataset(5, 2, 12, 12);  // 10 samples: 4+4+2
    Network<float> net(model);
    auto model2 = glorot_init<float>(tiny_train_spec(5, false), 6);
    Network<float> net2(model2);
    auto opt = OptimizerState<float>::make(model2, 1e-3, 0.9, 0.0);
    const auto stats = train_epoch_fixed(net2, samples, config, opt, 0);
    CHECK(stats.batches == 3);
    CHECK(stats.samples_seen == 10);
    CHECK(stats.samples_dropped == 0);
  }
}

TEST_CASE("epoch learning rate follows the schedule") {
  auto samples = pattern_dataset(2, 4, 12, 12);
  auto model = glorot_init<float>(tiny_train_spec(2, false), 7);
  Network<float> net(model);
  TrainConfig config;
  config.batch_size = 8;
  auto opt = OptimizerState<float>::make(model, config.base_lr, 0.9, 0.0);
  CHECK(train_epoch_fixed(net, samples, config, opt, 0).learning_rate ==
        doctest::Approx(1e-3));
  CHECK(train_epoch_fixed(net, samples, config, opt, 25).learning_rate ==
        doctest::Approx(1e-4));
  CHECK(train_epoch_fixed(net, samples, config, opt, 45).learning_rate ==
        doctest::Approx(1e-5));
}

TEST_CASE("mixed image sizes in the fixed protocol are rejected") {
  std::vector<TrainSample> samples;
  samples.push_back(TrainSample{GrayImage(12, 12, 1), 0, 0});
  samples.push_back(TrainSample{GrayImage(14, 12, 1), 1, 0});
  auto model = glorot_init<float>(tiny_train_spec(2, false), 8);
  Network<float> net(model);
  TrainConfig config;
  auto opt = OptimizerState<float>::make(model, 1e-3, 0.9, 0.0);
  CHECK_THROWS_AS(train_epoch_fixed(net, samples, config, opt, 0), ShapeError);
}

namespace {

// Dataset with per-group canvas sizes and the requested per-group counts.
struct MultiFixture {
  std::vector<TrainSample> samples;
  std::vector<SizeGroup> groups;
};

MultiFixture multi_fixture(const std::vector<int>& group_counts, int batch_size) {
  MultiFixture fixture;
  fixture.groups.resize(group_counts.size());
  for (std::size_t g = 0; g < group_counts.size(); ++g) {
    fixture.groups[g].canvas_id = static_cast<int>(g);
    const int h = 10 + 2 * static_cast<int>(g);
    const int w = 12 + 2 * static_cast<int>(g);
    for (int k = 0; k < group_counts[g] * batch_size; ++k) {
      fixture.groups[g].sample_indices.push_back(static_cast<int>(fixture.samples.size()));
      fixture.samples.push_back(
          TrainSample{pattern_image(static_cast<int>(g) % 3, k, h, w),
                      static_cast<int>(g) % 3, 0});
    }
  }
  return fixture;
}

}  // namespace

TEST_CASE("multi-size round-robin trace: batch counts (3,1,1,1,1) -> a,b,c,d,e,a,a") {
  const int batch_size = 4;
  auto fixture = multi_fixture({3, 1, 1, 1, 1}, batch_size);
  auto model = glorot_init<float>(tiny_train_spec(3, false), 9);
  Network<float> net(model);
  TrainConfig config;
  config.batch_size = batch_size;
  config.seed = 21;
  auto opt = OptimizerState<float>::make(model, 1e-3, 0.9, 1e-4);
  const auto stats =
      train_epoch_multisize(net, fixture.samples, fixture.groups, config, opt, 0);
  std::vector<int> order;
  for (const auto& t : stats.trace) order.push_back(t.group_id);
  CHECK(order == std::vector<int>{0, 1, 2, 3, 4, 0, 0});
}

// Reference trace: Algorithm-style round-robin with drop-out over given
// per-group batch counts.
namespace {
std::vector<int> round_robin_oracle(std::vector<int> remaining) {
  std::vector<int> trace;
  std::vector<int> active;
  for (std::size_t g = 0; g < remaining.size(); ++g) {
    active.push_back(static_cast<int>(g));
  }
  while (!active.empty()) {
    std::vector<int> next;
    for (int g : active) {
      if (remaining[static_cast<std::size_t>(g)] > 0) {
        trace.push_back(g);
        if (--remaining[static_cast<std::size_t>(g)] > 0) next.push_back(g);
      }
    }
    active = std::move(next);
  }
  return trace;
}
}  // namespace

TEST_CASE("multi-size epoch accounting on randomized group sizes") {
  Rng rng(64);
  for (int trial = 0; trial < 10; ++trial) {
    const int batch_size = 3;
    std::vector<int> counts(5);
    for (auto& c : counts) c = static_cast<int>(rng.uniform_int(0, 4));
    if (counts == std::vector<int>(5, 0)) counts[2] = 1;
    auto fixture = multi_fixture(counts, batch_size);
    auto model = glorot_init<float>(tiny_train_spec(3, false), 10);
    Network<float> net(model);
    TrainConfig config;
    config.batch_size = batch_size;
    config.seed = 31 + static_cast<std::uint64_t>(trial);
    auto opt = OptimizerState<float>::make(model, 1e-3, 0.9, 1e-4);
    const auto stats =
        train_epoch_multisize(net, fixture.samples, fixture.groups, config, opt, 0);

    // trace equals the round-robin oracle
    std::vector<int> order;
    for (const auto& t : stats.trace) order.push_back(t.group_id);
    std::vector<int> oracle_counts;
    for (int c : counts) oracle_counts.push_back(c);
    CHECK(order == round_robin_oracle(oracle_counts));

    // every sample seen exactly once
    std::set<int> seen;
    int total = 0;
    for (const auto& t : stats.trace) {
      for (int idx : t.sample_indices) {
        CHECK(seen.insert(idx).second);
        ++total;
      }
    }
    CHECK(total == static_cast<int>(fixture.samples.size()));
    CHECK(stats.samples_seen == total);

    // batches are homogeneous in dims (mixed sizes would have thrown)
    int expected_batches = 0;
    for (int c : counts) expected_batches += c;
    CHECK(stats.batches == expected_batches);
  }
}

TEST_CASE("one non-empty group degenerates to a fixed-size epoch") {
  auto fixture = multi_fixture({0, 2, 0, 0, 0}, 3);
  auto model = glorot_init<float>(tiny_train_spec(3, false), 11);
  Network<float> net(model);
  TrainConfig config;
  config.batch_size = 3;
  config.seed = 5;
  auto opt = OptimizerState<float>::make(model, 1e-3, 0.9, 1e-4);
  const auto stats =
      train_epoch_multisize(net, fixture.samples, fixture.groups, config, opt, 0);
  CHECK(stats.batches == 2);
  for (const auto& t : stats.trace) CHECK(t.group_id == 1);
}

TEST_CASE("all-empty groups are an error") {
  std::vector<TrainSample> samples;
  std::vector<SizeGroup> groups(5);
  for (int g = 0; g < 5; ++g) groups[static_cast<std::size_t>(g)].canvas_id = g;
  auto model = glorot_init<float>(tiny_train_spec(2, false), 12);
  Network<float> net(model);
  TrainConfig config;
  auto opt = OptimizerState<float>::make(model, 1e-3, 0.9, 0.0);
  CHECK_THROWS_AS(train_epoch_multisize(net, samples, groups, config, opt, 0), DataError);
}

TEST_CASE("padding augmentation keeps batches homogeneous and samples accounted") {
  auto fixture = multi_fixture({2, 1}, 4);
  auto model = glorot_init<float>(tiny_train_spec(3, false), 13);
  Network<float> net(model);
  TrainConfig config;
  config.batch_size = 4;
  config.seed = 41;
  config.max_pad = PadAmount{3, 5};
  auto opt = OptimizerState<float>::make(model, 1e-3, 0.9, 1e-4);
  const auto stats =
      train_epoch_multisize(net, fixture.samples, fixture.groups, config, opt, 0);
  CHECK(stats.batches == 3);
  CHECK(stats.samples_seen == 12);
}

TEST_CASE("classification accuracy reaches 100% on a memorized pattern set") {
  auto samples = pattern_dataset(3, 5, 16, 20);
  auto model = glorot_init<float>(tiny_train_spec(3, false), 14);
  Network<float> net(model);
  TrainConfig config;
  config.batch_size = 5;
  config.seed = 15;
  auto opt = OptimizerState<float>::make(model, config.base_lr, config.momentum,
                                         config.weight_decay);
  for (int epoch = 0; epoch < 25; ++epoch) {
    train_epoch_fixed(net, samples, config, opt, epoch);
  }
  CHECK(classification_accuracy(model, samples) >= 0.9);
}
