#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "sigspp/experiment.hpp"
#include "sigspp/synth.hpp"
#include "test_support.hpp"

using namespace sigspp;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// Small but complete run: 4 writers, desk net, 2 epochs.
ExperimentConfig tiny_config(const std::string& manifest, const std::string& out) {
  ExperimentConfig config;
  config.architecture = "SigNet-SPP-desk";
  config.protocol = "multi";
  config.epochs = 2;
  config.batch_size = 4;
  config.seed = 3;
  config.wd_references = 1;
  config.wd_policy = "dev";
  config.manifest_path = manifest;
  config.output_dir = out;
  return config;
}

std::string tiny_dataset(const std::string& dir, int min_size = 60, int max_size = 110) {
  SynthDatasetConfig synth;
  synth.writers = 4;
  synth.dev_writers = 2;
  synth.genuine_per_writer = 3;
  synth.forgeries_per_writer = 2;
  synth.sizes = SizeRange{min_size, max_size, min_size, max_size};
  synth.seed = 11;
  generate_synthetic_dataset(synth, dir);
  return dir + "/manifest.jsonl";
}

}  // namespace

TEST_CASE("config files round-trip through the key=value format") {
  ExperimentConfig config;
  config.name = "roundtrip";
  config.architecture = "SigNet-SPP-300dpi";
  config.protocol = "fixed";
  config.epochs = 12;
  config.lambda = 0.75;
  config.wd_gamma = 0.125;
  config.wd_policy = "peer";
  config.manifest_path = "data/manifest.jsonl";
  config.output_dir = "out/run1";
  const auto dir = sigspp::test::scratch_dir("config_io");
  save_experiment_config(dir + "/exp.conf", config);
  const auto loaded = parse_experiment_config(dir + "/exp.conf");
  CHECK(loaded.name == config.name);
  CHECK(loaded.architecture == config.architecture);
  CHECK(loaded.protocol == "fixed");
  CHECK(loaded.epochs == 12);
  CHECK(loaded.lambda == doctest::Approx(0.75));
  CHECK(loaded.wd_gamma == doctest::Approx(0.125));
  CHECK(loaded.wd_policy == "peer");
  CHECK(loaded.manifest_path == config.manifest_path);
  CHECK(loaded.output_dir == config.output_dir);
  CHECK(config_hash(loaded) == config_hash(config));
}

TEST_CASE("unknown keys and bad values are config errors") {
  const auto dir = sigspp::test::scratch_dir("config_bad");
  {
    std::ofstream out(dir + "/unknown.conf");
    out << "no_such_key = 5\n";
  }
  CHECK_THROWS_AS(parse_experiment_config(dir + "/unknown.conf"), ConfigError);
  {
    std::ofstream out(dir + "/bad.conf");
    out << "epochs = twelve\n";
  }
  CHECK_THROWS_AS(parse_experiment_config(dir + "/bad.conf"), ConfigError);
}

TEST_CASE("hash covers semantic fields, not output locations") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.output_dir = "elsewhere";
  b.threads = 8;
  b.manifest_path = "same-data-other-path.jsonl";
  CHECK(config_hash(a) == config_hash(b));
  b.lambda = 0.25;
  CHECK(config_hash(a) != config_hash(b));
  ExperimentConfig c = a;
  c.seed = a.seed + 1;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("require_config_hash flags cross-config artifacts") {
  CHECK_NOTHROW(require_config_hash("abc", "abc", "model"));
  CHECK_NOTHROW(require_config_hash("", "abc", "external file"));
  CHECK_THROWS_WITH_AS(require_config_hash("abc", "def", "features"),
                       doctest::Contains("different configuration"), DataError);
}

TEST_CASE("dev preparation partitions every sample into exactly one canvas group") {
  const auto dir = sigspp::test::scratch_dir("prep_dev");
  const auto manifest_path = tiny_dataset(dir);
  const auto manifest = load_manifest(manifest_path);
  const auto prepared = load_and_preprocess(manifest);
  auto config = tiny_config(manifest_path, dir + "/out");
  const auto dev = prepare_dev_training(prepared, config);

  std::size_t dev_count = 0;
  for (const auto& s : prepared) {
    if (s.split == "dev") ++dev_count;
  }
  CHECK(dev.samples.size() == dev_count);
  std::set<int> assigned;
  std::size_t grouped = 0;
  for (const auto& group : dev.groups) {
    for (int idx : group.sample_indices) {
      CHECK(assigned.insert(idx).second);  // exactly one group per sample
      ++grouped;
      const auto& canvas = dev.canvases.canvases[static_cast<std::size_t>(group.canvas_id)];
      CHECK(dev.samples[static_cast<std::size_t>(idx)].image.height == canvas.height);
      CHECK(dev.samples[static_cast<std::size_t>(idx)].image.width == canvas.width);
    }
  }
  CHECK(grouped == dev.samples.size());
}

TEST_CASE("full tiny run emits stamped artifacts and a coherent report") {
  const auto dir = sigspp::test::scratch_dir("run_tiny");
  const auto manifest_path = tiny_dataset(dir);
  auto config = tiny_config(manifest_path, dir + "/out");
  const auto result = run_experiment(config);

  CHECK(result.report.writers == 2);
  CHECK(result.train_accuracy >= 0.0);
  for (const char* name : {"model.bin", "features.bin", "features.json", "scores.jsonl",
                           "report.json", "report.txt", "canvases.json", "train_log.jsonl",
                           "config.resolved", "stats.json"}) {
    CHECK(std::filesystem::exists(std::filesystem::path(dir + "/out") / name));
  }

  // artifacts carry the config hash
  std::string hash;
  load_canvas_set(dir + "/out/canvases.json", &hash);
  CHECK(hash == result.hash);
  std::vector<std::string> splits;
  std::string feat_hash;
  const auto features = load_features(dir + "/out/features.bin", dir + "/out/features.json",
                                      &splits, &feat_hash);
  CHECK(feat_hash == result.hash);
  CHECK(features.size() == 20);  // 4 writers x (3 genuine + 2 forgeries)
  for (const auto& record : features) {
    CHECK(record.values.size() == 128);
  }

  // scores parse back and rebuild the same metrics
  std::string score_hash;
  const auto scores = load_scores(dir + "/out/scores.jsonl", &score_hash);
  CHECK(score_hash == result.hash);
  const auto report = compute_metrics(scores_to_set(scores));
  CHECK(report.eer_user_percent == doctest::Approx(result.report.eer_user_percent));
}

TEST_CASE("rerunning the same config yields byte-identical reports") {
  const auto dir = sigspp::test::scratch_dir("run_repeat");
  const auto manifest_path = tiny_dataset(dir);
  auto config_a = tiny_config(manifest_path, dir + "/out_a");
  auto config_b = tiny_config(manifest_path, dir + "/out_b");
  const auto a = run_experiment(config_a);
  const auto b = run_experiment(config_b);
  CHECK(a.hash == b.hash);
  CHECK(read_bytes(a.report_json_path) == read_bytes(b.report_json_path));
  CHECK(read_bytes(dir + "/out_a/scores.jsonl") == read_bytes(dir + "/out_b/scores.jsonl"));
  CHECK(read_bytes(dir + "/out_a/model.bin") == read_bytes(dir + "/out_b/model.bin"));
}

TEST_CASE("uniform-size manifests collapse the canvases but the run proceeds") {
  const auto dir = sigspp::test::scratch_dir("run_collapse");
  const auto manifest_path = tiny_dataset(dir, 80, 80);
  auto config = tiny_config(manifest_path, dir + "/out");
  const auto result = run_experiment(config);
  CHECK(result.report.writers == 2);
  const auto canvases = load_canvas_set(dir + "/out/canvases.json");
  CHECK(canvases.collapsed);
  const auto log = read_bytes(dir + "/out/run_log.txt");
  CHECK(log.find("canvas collapse") != std::string::npos);
}

TEST_CASE("stage failures carry the stage name") {
  ExperimentConfig config;
  config.output_dir = sigspp::test::scratch_dir("run_fail");
  config.manifest_path = "";  // missing manifest
  CHECK_THROWS_WITH_AS(run_experiment(config), doctest::Contains("load+preprocess"),
                       ConfigError);
}
