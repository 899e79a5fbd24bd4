#ifndef SIGSPP_EXPERIMENT_HPP_
#define SIGSPP_EXPERIMENT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sigspp/features.hpp"
#include "sigspp/manifest.hpp"
#include "sigspp/metrics.hpp"
#include "sigspp/model.hpp"
#include "sigspp/preprocess.hpp"
#include "sigspp/svm.hpp"
#include "sigspp/trainer.hpp"
#include "sigspp/wd_dataset.hpp"

namespace sigspp {

// Everything a run needs, parsed from a key=value config file or CLI
// flags. All semantic fields feed the config hash; output_dir and threads
// do not (the same experiment in two directories is the same experiment).
struct ExperimentConfig {
  std::string name = "experiment";
  std::string architecture = "SigNet-SPP-desk";
  std::string protocol = "multi";  // training protocol: fixed | multi

  int epochs = 60;
  int batch_size = 32;
  double lambda = 0.5;
  double base_lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool use_forgeries = true;  // forgery head + dev forgeries during feature learning
  std::uint64_t seed = 1;
  double max_pad_fraction = 0.1;  // multi-size padding bound, fraction of canvas
  int crop_h = 0, crop_w = 0;     // fixed-protocol random crop (0 = off)
  int input_h = 0, input_w = 0;   // non-spp network input override
  int canvas_h = 0, canvas_w = 0; // fixed-canvas override (0 = dev max size)

  int wd_references = 4;           // r
  int wd_negatives_per_writer = 0; // k, 0 = r
  std::string wd_policy = "dev";   // dev | peer
  std::string wd_kernel = "rbf";   // linear | rbf
  double wd_C = 1.0;
  double wd_gamma = 0x1.0p-11;

  std::string manifest_path;
  std::string output_dir = "out";
  int threads = 1;

  TrainProtocol train_protocol() const;
  SvmConfig svm_config() const;
};

ExperimentConfig parse_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& config);

// FNV-1a over the canonical serialization of the semantic fields.
std::string config_hash(const ExperimentConfig& config);

// Refuses artifacts produced under a different configuration. Artifacts
// with no recorded hash (externally produced) pass through.
void require_config_hash(const std::string& artifact_hash, const std::string& expected,
                         const std::string& what);

// One preprocessed signature ready for training/extraction: cleaned
// raster (background exactly 0), writer identity, forgery flag, dpi tag.
struct PreparedSample {
  GrayImage image;  // original size
  int writer_id = 0;
  bool forgery = false;
  int dpi = 0;  // metadata only
  std::string split;
  std::string image_id;
};

std::vector<PreparedSample> load_and_preprocess(const DatasetManifest& manifest);

// Training-set views of the prepared dev samples, per protocol.
struct DevTrainingData {
  std::vector<TrainSample> samples;   // on their canvases
  std::vector<SizeGroup> groups;      // multi protocol: 5 groups
  CanvasSet canvases;
  std::vector<int> writer_ids;        // label index -> writer id
  bool canvas_collapse_warning = false;
};

DevTrainingData prepare_dev_training(const std::vector<PreparedSample>& prepared,
                                     const ExperimentConfig& config);

struct ExperimentResult {
  MetricsReport report;
  double train_accuracy = 0.0;   // dev user-classification accuracy, genuine samples
  double wall_seconds = 0.0;
  std::string report_json_path;
  std::string model_path;
  std::string hash;
};

// Full pipeline: preprocess, canvas partition, feature learning on the dev
// writers, feature extraction, writer-dependent SVMs, scoring, metrics.
// Artifacts land in config.output_dir, all stamped with the config hash.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Scoring artifacts (shared between run_experiment and the CLI stages).
struct ScoreRecord {
  int writer_id = 0;      // owning classifier
  std::string image_id;
  std::string cls;        // genuine | random | simple | skilled
  double score = 0.0;
};

void save_scores(const std::string& path, const std::vector<ScoreRecord>& records,
                 const std::string& hash);
std::vector<ScoreRecord> load_scores(const std::string& path, std::string* hash = nullptr);
ScoreSet scores_to_set(const std::vector<ScoreRecord>& records);

void save_report(const std::string& json_path, const std::string& text_path,
                 const MetricsReport& report, const std::string& hash);

void save_features(const std::string& bin_path, const std::string& json_path,
                   const std::vector<FeatureRecord>& records,
                   const std::vector<std::string>& splits, const std::string& hash);
std::vector<FeatureRecord> load_features(const std::string& bin_path,
                                         const std::string& json_path,
                                         std::vector<std::string>* splits = nullptr,
                                         std::string* hash = nullptr);

void save_canvas_set(const std::string& path, const CanvasSet& set, const std::string& hash);
CanvasSet load_canvas_set(const std::string& path, std::string* hash = nullptr);

}  // namespace sigspp

#endif  // SIGSPP_EXPERIMENT_HPP_
