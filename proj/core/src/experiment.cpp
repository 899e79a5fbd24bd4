#include "sigspp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sigspp/architectures.hpp"
#include "sigspp/model_io.hpp"
#include "sigspp/network.hpp"
#include "sigspp/optimizer.hpp"

namespace sigspp {

namespace fs = std::filesystem;
using nlohmann::json;

TrainProtocol ExperimentConfig::train_protocol() const {
  if (protocol == "fixed") return TrainProtocol::kFixed;
  if (protocol == "multi") return TrainProtocol::kMulti;
  throw ConfigError("unknown training protocol '" + protocol + "' (expected fixed|multi)");
}

SvmConfig ExperimentConfig::svm_config() const {
  SvmConfig svm;
  if (wd_kernel == "linear") {
    svm.kernel = SvmKernel::kLinear;
  } else if (wd_kernel == "rbf") {
    svm.kernel = SvmKernel::kRbf;
  } else {
    throw ConfigError("unknown wd kernel '" + wd_kernel + "' (expected linear|rbf)");
  }
  svm.C = wd_C;
  svm.gamma = wd_gamma;
  return svm;
}

namespace {

// Canonical key=value serialization of the semantic fields. output_dir,
// threads and the manifest location stay out of the hash: the same data
// and settings are the same experiment wherever they run.
std::vector<std::pair<std::string, std::string>> semantic_fields(
    const ExperimentConfig& c) {
  auto fmt = [](double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
  };
  return {
      {"name", c.name},
      {"architecture", c.architecture},
      {"protocol", c.protocol},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"lambda", fmt(c.lambda)},
      {"base_lr", fmt(c.base_lr)},
      {"momentum", fmt(c.momentum)},
      {"weight_decay", fmt(c.weight_decay)},
      {"use_forgeries", c.use_forgeries ? "true" : "false"},
      {"seed", std::to_string(c.seed)},
      {"max_pad_fraction", fmt(c.max_pad_fraction)},
      {"crop_h", std::to_string(c.crop_h)},
      {"crop_w", std::to_string(c.crop_w)},
      {"input_h", std::to_string(c.input_h)},
      {"input_w", std::to_string(c.input_w)},
      {"canvas_h", std::to_string(c.canvas_h)},
      {"canvas_w", std::to_string(c.canvas_w)},
      {"wd_references", std::to_string(c.wd_references)},
      {"wd_negatives_per_writer", std::to_string(c.wd_negatives_per_writer)},
      {"wd_policy", c.wd_policy},
      {"wd_kernel", c.wd_kernel},
      {"wd_C", fmt(c.wd_C)},
      {"wd_gamma", fmt(c.wd_gamma)},
  };
}

}  // namespace

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&hash](const std::string& s) {
    for (unsigned char ch : s) {
      hash ^= ch;
      hash *= 0x100000001b3ULL;
    }
  };
  for (const auto& [key, value] : semantic_fields(config)) {
    feed(key);
    feed("=");
    feed(value);
    feed("\n");
  }
  std::ostringstream out;
  out << std::hex << hash;
  return out.str();
}

void require_config_hash(const std::string& artifact_hash, const std::string& expected,
                         const std::string& what) {
  if (!artifact_hash.empty() && !expected.empty() && artifact_hash != expected) {
    throw DataError("config hash mismatch: " + what +
                    " was produced by a different configuration (" + artifact_hash +
                    " != " + expected + ")");
  }
}

ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const auto begin = s.find_first_not_of(" \t\r");
      const auto end = s.find_last_not_of(" \t\r");
      return begin == std::string::npos ? std::string() : s.substr(begin, end - begin + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "name") config.name = value;
      else if (key == "architecture") config.architecture = value;
      else if (key == "protocol") config.protocol = value;
      else if (key == "epochs") config.epochs = std::stoi(value);
      else if (key == "batch_size") config.batch_size = std::stoi(value);
      else if (key == "lambda") config.lambda = std::stod(value);
      else if (key == "base_lr") config.base_lr = std::stod(value);
      else if (key == "momentum") config.momentum = std::stod(value);
      else if (key == "weight_decay") config.weight_decay = std::stod(value);
      else if (key == "use_forgeries") config.use_forgeries = value == "true" || value == "1";
      else if (key == "seed") config.seed = std::stoull(value);
      else if (key == "max_pad_fraction") config.max_pad_fraction = std::stod(value);
      else if (key == "crop_h") config.crop_h = std::stoi(value);
      else if (key == "crop_w") config.crop_w = std::stoi(value);
      else if (key == "input_h") config.input_h = std::stoi(value);
      else if (key == "input_w") config.input_w = std::stoi(value);
      else if (key == "canvas_h") config.canvas_h = std::stoi(value);
      else if (key == "canvas_w") config.canvas_w = std::stoi(value);
      else if (key == "wd_references") config.wd_references = std::stoi(value);
      else if (key == "wd_negatives_per_writer") config.wd_negatives_per_writer = std::stoi(value);
      else if (key == "wd_policy") config.wd_policy = value;
      else if (key == "wd_kernel") config.wd_kernel = value;
      else if (key == "wd_C") config.wd_C = std::stod(value);
      else if (key == "wd_gamma") config.wd_gamma = std::stod(value);
      else if (key == "manifest") config.manifest_path = value;
      else if (key == "output_dir") config.output_dir = value;
      else if (key == "threads") config.threads = std::stoi(value);
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad value for " + key);
    } catch (const std::out_of_range&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": value out of range for " + key);
    }
  }
  return config;
}

void save_experiment_config(const std::string& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config file: " + path);
  for (const auto& [key, value] : semantic_fields(config)) {
    out << key << " = " << value << "\n";
  }
  out << "manifest = " << config.manifest_path << "\n";
  out << "output_dir = " << config.output_dir << "\n";
  out << "threads = " << config.threads << "\n";
}

std::vector<PreparedSample> load_and_preprocess(const DatasetManifest& manifest) {
  std::vector<PreparedSample> prepared;
  prepared.reserve(manifest.records.size());
  for (const auto& record : manifest.records) {
    PreparedSample sample;
    GrayImage raw = read_png_gray(manifest.resolve(record));
    sample.image = manifest.preprocessed ? std::move(raw)
                                         : remove_background_and_invert(raw);
    sample.writer_id = record.writer_id;
    sample.forgery = record.forgery;
    sample.dpi = record.dpi;
    sample.split = record.split;
    sample.image_id = fs::path(record.path).stem().string();
    prepared.push_back(std::move(sample));
  }
  return prepared;
}

DevTrainingData prepare_dev_training(const std::vector<PreparedSample>& prepared,
                                     const ExperimentConfig& config) {
  DevTrainingData data;
  std::set<int> writers;
  std::vector<const PreparedSample*> dev;
  for (const auto& s : prepared) {
    if (s.split != "dev") continue;
    if (s.forgery && !config.use_forgeries) continue;
    dev.push_back(&s);
    writers.insert(s.writer_id);
  }
  if (dev.empty()) throw DataError("prepare_dev_training: no dev samples");
  data.writer_ids.assign(writers.begin(), writers.end());
  auto label_of = [&](int writer_id) {
    return static_cast<int>(std::lower_bound(data.writer_ids.begin(), data.writer_ids.end(),
                                             writer_id) -
                            data.writer_ids.begin());
  };

  std::vector<ImageDims> dims;
  dims.reserve(dev.size());
  for (const auto* s : dev) dims.push_back(ImageDims{s->image.height, s->image.width});
  data.canvases = compute_canvas_set(dims);
  data.canvas_collapse_warning = data.canvases.collapsed;

  if (config.train_protocol() == TrainProtocol::kMulti) {
    data.groups.resize(data.canvases.canvases.size());
    for (std::size_t i = 0; i < data.groups.size(); ++i) {
      data.groups[i].canvas_id = static_cast<int>(i);
    }
    for (const auto* s : dev) {
      const int canvas_id =
          assign_canvas(ImageDims{s->image.height, s->image.width}, data.canvases);
      const CanvasSize canvas = data.canvases.canvases[canvas_id];
      TrainSample sample;
      sample.image = center_in_canvas(s->image, canvas.height, canvas.width);
      sample.label = label_of(s->writer_id);
      sample.forgery_flag = s->forgery ? 1 : 0;
      data.groups[canvas_id].sample_indices.push_back(static_cast<int>(data.samples.size()));
      data.samples.push_back(std::move(sample));
    }
  } else {
    const int canvas_h = config.canvas_h > 0 ? config.canvas_h : data.canvases.max_h;
    const int canvas_w = config.canvas_w > 0 ? config.canvas_w : data.canvases.max_w;
    // Architectures without spp take a fixed input: the canvas is resized
    // to the nominal network input after centering. spp architectures
    // train directly on the canvas.
    const NetworkSpec probe =
        build_architecture(config.architecture, config.input_h, config.input_w, 1, false);
    for (const auto* s : dev) {
      GrayImage sized = s->image;
      if (sized.height > canvas_h || sized.width > canvas_w) {
        sized = resize_bilinear(sized, canvas_h, canvas_w);
      }
      GrayImage canvas = center_in_canvas(sized, canvas_h, canvas_w);
      TrainSample sample;
      sample.image = probe.has_spp()
                         ? std::move(canvas)
                         : resize_bilinear(canvas, probe.input_height, probe.input_width);
      sample.label = label_of(s->writer_id);
      sample.forgery_flag = s->forgery ? 1 : 0;
      data.samples.push_back(std::move(sample));
    }
    SizeGroup group;
    group.canvas_id = 0;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      group.sample_indices.push_back(static_cast<int>(i));
    }
    data.groups.push_back(std::move(group));
  }
  return data;
}

void save_scores(const std::string& path, const std::vector<ScoreRecord>& records,
                 const std::string& hash) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write score file: " + path);
  json header;
  header["type"] = "sigspp-scores";
  header["version"] = 1;
  header["config_hash"] = hash;
  out << header.dump() << "\n";
  for (const auto& r : records) {
    json line;
    line["writer"] = r.writer_id;
    line["image"] = r.image_id;
    line["class"] = r.cls;
    line["score"] = r.score;
    out << line.dump() << "\n";
  }
}

std::vector<ScoreRecord> load_scores(const std::string& path, std::string* hash) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file: " + path);
  std::vector<ScoreRecord> records;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("bad score line in " + path + ": " + e.what());
    }
    if (first) {
      first = false;
      if (doc.value("type", "") == "sigspp-scores") {
        if (hash) *hash = doc.value("config_hash", "");
        continue;
      }
    }
    ScoreRecord r;
    r.writer_id = doc.at("writer");
    r.image_id = doc.at("image");
    r.cls = doc.at("class");
    r.score = doc.at("score");
    records.push_back(std::move(r));
  }
  return records;
}

ScoreSet scores_to_set(const std::vector<ScoreRecord>& records) {
  ScoreSet set;
  for (const auto& r : records) {
    WriterScores& ws = set[r.writer_id];
    if (r.cls == "genuine") ws.genuine.push_back(r.score);
    else if (r.cls == "random") ws.random.push_back(r.score);
    else if (r.cls == "simple") ws.simple.push_back(r.score);
    else if (r.cls == "skilled") ws.skilled.push_back(r.score);
    else throw DataError("unknown score class '" + r.cls + "'");
  }
  return set;
}

void save_report(const std::string& json_path, const std::string& text_path,
                 const MetricsReport& report, const std::string& hash) {
  json doc;
  doc["type"] = "sigspp-report";
  doc["version"] = 1;
  doc["config_hash"] = hash;
  doc["writers"] = report.writers;
  doc["writers_skipped"] = report.writers_skipped;
  doc["eer_global_percent"] = report.eer_global_percent;
  doc["eer_global_threshold"] = report.eer_global_threshold;
  doc["eer_user_percent"] = report.eer_user_percent;
  doc["eer_user_random_percent"] = report.eer_user_random_percent;
  doc["frr_percent"] = report.frr_percent;
  doc["far_random_percent"] = report.far_random_percent;
  doc["far_skilled_percent"] = report.far_skilled_percent;
  if (report.far_simple_percent) doc["far_simple_percent"] = *report.far_simple_percent;
  if (report.aer_result) {
    doc["aer"] = report.aer_result->aer;
    doc["aer_genuine_skilled"] = report.aer_result->aer_genuine_skilled;
  }
  std::ofstream out(json_path);
  if (!out) throw DataError("cannot write report: " + json_path);
  out << doc.dump(2) << "\n";
  if (!text_path.empty()) {
    std::ofstream text(text_path);
    if (!text) throw DataError("cannot write report: " + text_path);
    text << format_report_table(report);
  }
}

void save_features(const std::string& bin_path, const std::string& json_path,
                   const std::vector<FeatureRecord>& records,
                   const std::vector<std::string>& splits, const std::string& hash) {
  if (!splits.empty() && splits.size() != records.size()) {
    throw ShapeError("save_features: split annotations do not match records");
  }
  const int dim = records.empty() ? 0 : static_cast<int>(records.front().values.size());
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot write feature file: " + bin_path);
  for (const auto& r : records) {
    if (static_cast<int>(r.values.size()) != dim) {
      throw ShapeError("save_features: inconsistent feature lengths");
    }
    for (float v : r.values) {
      std::uint32_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, 4);
      const unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff),
                                      static_cast<unsigned char>((bits >> 8) & 0xff),
                                      static_cast<unsigned char>((bits >> 16) & 0xff),
                                      static_cast<unsigned char>((bits >> 24) & 0xff)};
      bin.write(reinterpret_cast<const char*>(bytes), 4);
    }
  }

  json index;
  index["type"] = "sigspp-features";
  index["version"] = 1;
  index["config_hash"] = hash;
  index["feature_length"] = dim;
  index["count"] = records.size();
  index["records"] = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    json entry;
    entry["id"] = records[i].image_id;
    entry["writer"] = records[i].writer_id;
    entry["forgery"] = records[i].forgery;
    if (!splits.empty()) entry["split"] = splits[i];
    index["records"].push_back(std::move(entry));
  }
  std::ofstream out(json_path);
  if (!out) throw DataError("cannot write feature index: " + json_path);
  out << index.dump(2) << "\n";
}

std::vector<FeatureRecord> load_features(const std::string& bin_path,
                                         const std::string& json_path,
                                         std::vector<std::string>* splits,
                                         std::string* hash) {
  std::ifstream idx(json_path);
  if (!idx) throw DataError("cannot open feature index: " + json_path);
  json index;
  try {
    idx >> index;
  } catch (const json::exception& e) {
    throw DataError("bad feature index " + json_path + ": " + e.what());
  }
  if (index.value("type", "") != "sigspp-features") {
    throw DataError("not a feature index: " + json_path);
  }
  if (hash) *hash = index.value("config_hash", "");
  const int dim = index.at("feature_length");
  const std::size_t count = index.at("count");

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot open feature file: " + bin_path);
  std::vector<FeatureRecord> records;
  records.reserve(count);
  if (splits) splits->clear();
  for (const auto& entry : index.at("records")) {
    FeatureRecord r;
    r.image_id = entry.at("id");
    r.writer_id = entry.at("writer");
    r.forgery = entry.at("forgery");
    r.values.resize(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      unsigned char bytes[4];
      if (!bin.read(reinterpret_cast<char*>(bytes), 4)) {
        throw DataError("truncated feature file: " + bin_path);
      }
      std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                           (static_cast<std::uint32_t>(bytes[1]) << 8) |
                           (static_cast<std::uint32_t>(bytes[2]) << 16) |
                           (static_cast<std::uint32_t>(bytes[3]) << 24);
      std::memcpy(&r.values[d], &bits, 4);
    }
    if (splits) splits->push_back(entry.value("split", ""));
    records.push_back(std::move(r));
  }
  if (records.size() != count) {
    throw DataError("feature index count mismatch in " + json_path);
  }
  return records;
}

void save_canvas_set(const std::string& path, const CanvasSet& set, const std::string& hash) {
  json doc;
  doc["type"] = "sigspp-canvases";
  doc["version"] = 1;
  doc["config_hash"] = hash;
  doc["mean_h"] = set.mean_h;
  doc["std_h"] = set.std_h;
  doc["mean_w"] = set.mean_w;
  doc["std_w"] = set.std_w;
  doc["max_h"] = set.max_h;
  doc["max_w"] = set.max_w;
  doc["tau_h"] = set.tau_h;
  doc["tau_w"] = set.tau_w;
  doc["median_h"] = set.median_h;
  doc["median_w"] = set.median_w;
  doc["collapsed"] = set.collapsed;
  doc["canvases"] = json::array();
  for (const auto& c : set.canvases) {
    doc["canvases"].push_back({{"height", c.height}, {"width", c.width}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write canvas set: " + path);
  out << doc.dump(2) << "\n";
}

CanvasSet load_canvas_set(const std::string& path, std::string* hash) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open canvas set: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("bad canvas set " + path + ": " + e.what());
  }
  if (doc.value("type", "") != "sigspp-canvases") {
    throw DataError("not a canvas set file: " + path);
  }
  if (hash) *hash = doc.value("config_hash", "");
  CanvasSet set;
  set.mean_h = doc.at("mean_h");
  set.std_h = doc.at("std_h");
  set.mean_w = doc.at("mean_w");
  set.std_w = doc.at("std_w");
  set.max_h = doc.at("max_h");
  set.max_w = doc.at("max_w");
  set.tau_h = doc.at("tau_h");
  set.tau_w = doc.at("tau_w");
  set.median_h = doc.at("median_h");
  set.median_w = doc.at("median_w");
  set.collapsed = doc.at("collapsed");
  const auto& canvases = doc.at("canvases");
  for (std::size_t i = 0; i < set.canvases.size(); ++i) {
    set.canvases[i].height = canvases.at(i).at("height");
    set.canvases[i].width = canvases.at(i).at("width");
  }
  return set;
}

namespace {

struct StageLogger {
  std::ofstream log;
  std::string current_stage;

  explicit StageLogger(const std::string& path) : log(path, std::ios::app) {}

  void begin(const std::string& stage) {
    current_stage = stage;
    log << "stage " << stage << " begin\n";
    log.flush();
  }
  void end() {
    log << "stage " << current_stage << " end\n";
    log.flush();
    current_stage.clear();
  }
};

ExtractionSettings extraction_settings_for(const ExperimentConfig& config,
                                           const NetworkSpec& spec,
                                           const CanvasSet& canvases) {
  ExtractionSettings settings;
  const bool spp = spec.has_spp();
  if (!spp) {
    settings.protocol = ExtractionProtocol::kNonSpp;
  } else {
    settings.protocol = config.train_protocol() == TrainProtocol::kMulti
                            ? ExtractionProtocol::kSppMulti
                            : ExtractionProtocol::kSppFixed;
  }
  settings.canvas_h = config.canvas_h > 0 ? config.canvas_h : canvases.max_h;
  settings.canvas_w = config.canvas_w > 0 ? config.canvas_w : canvases.max_w;
  // extraction feeds the network input directly (crop size when crops
  // were used in training, otherwise the configured/nominal input)
  settings.input_h = config.crop_h > 0 ? config.crop_h : config.input_h;
  settings.input_w = config.crop_w > 0 ? config.crop_w : config.input_w;
  return settings;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::string hash = config_hash(config);

  fs::create_directories(config.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(config.output_dir) / name).string();
  };
  StageLogger logger(out_path("run_log.txt"));
  save_experiment_config(out_path("config.resolved"), config);

  ExperimentResult result;
  result.hash = hash;

  try {
    logger.begin("load+preprocess");
    if (config.manifest_path.empty()) throw ConfigError("config is missing the manifest path");
    const DatasetManifest manifest = load_manifest(config.manifest_path);
    const std::vector<PreparedSample> prepared = load_and_preprocess(manifest);
    logger.end();

    logger.begin("canvas-partition");
    DevTrainingData dev = prepare_dev_training(prepared, config);
    if (dev.canvas_collapse_warning) {
      logger.log << "warning: canvas collapse (some canvas sizes coincide)\n";
      logger.log.flush();
    }
    save_canvas_set(out_path("canvases.json"), dev.canvases, hash);
    logger.end();

    logger.begin("train-cnn");
    const int dev_writers = static_cast<int>(dev.writer_ids.size());
    bool dev_has_forgeries = false;
    for (const auto& s : dev.samples) dev_has_forgeries = dev_has_forgeries || s.forgery_flag;
    const bool forgery_head = config.use_forgeries && dev_has_forgeries;

    // with random-crop augmentation the network input is the crop size;
    // config.input_* is then the pre-crop resize target
    const int model_in_h = config.crop_h > 0 ? config.crop_h : config.input_h;
    const int model_in_w = config.crop_w > 0 ? config.crop_w : config.input_w;
    NetworkSpec spec = build_architecture(config.architecture, model_in_h, model_in_w,
                                          dev_writers, forgery_head);
    Model<float> model = glorot_init<float>(spec, config.seed);
    Network<float> net(model);
    OptimizerState<float> opt = OptimizerState<float>::make(
        model, config.base_lr, config.momentum, config.weight_decay);

    TrainConfig train;
    train.epochs = config.epochs;
    train.batch_size = config.batch_size;
    train.lambda = config.lambda;
    train.base_lr = config.base_lr;
    train.momentum = config.momentum;
    train.weight_decay = config.weight_decay;
    train.protocol = config.train_protocol();
    train.seed = config.seed;
    train.crop_h = config.crop_h;
    train.crop_w = config.crop_w;
    // padding bound from the smallest canvas
    const CanvasSize smallest = dev.canvases.canvases[0];
    train.max_pad = PadAmount{
        static_cast<int>(smallest.height * config.max_pad_fraction),
        static_cast<int>(smallest.width * config.max_pad_fraction)};

    std::ofstream train_log(out_path("train_log.jsonl"));
    train_log << json{{"type", "sigspp-train-log"}, {"version", 1}, {"config_hash", hash}}.dump()
              << "\n";
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const auto t_epoch = std::chrono::steady_clock::now();
      EpochStats stats =
          train.protocol == TrainProtocol::kMulti
              ? train_epoch_multisize(net, dev.samples, dev.groups, train, opt, epoch)
              : train_epoch_fixed(net, dev.samples, train, opt, epoch);
      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                    t_epoch)
              .count();
      json line;
      line["epoch"] = epoch;
      line["lr"] = stats.learning_rate;
      line["loss"] = stats.mean_loss;
      line["loss_user"] = stats.mean_user_loss;
      line["loss_forgery"] = stats.mean_forgery_loss;
      line["batches"] = stats.batches;
      line["wall_ms"] = wall_ms;
      train_log << line.dump() << "\n";
      train_log.flush();
    }
    result.train_accuracy = classification_accuracy(model, dev.samples);
    save_model(out_path("model.bin"), model, &opt, hash);
    result.model_path = out_path("model.bin");
    logger.end();

    logger.begin("extract-features");
    const ExtractionSettings settings =
        extraction_settings_for(config, model.spec, dev.canvases);
    std::vector<FeatureRecord> features;
    std::vector<std::string> splits;
    {
      std::vector<const GrayImage*> images;
      for (const auto& s : prepared) images.push_back(&s.image);
      const auto vectors = extract_features_batch(model, images, settings, config.threads);
      for (std::size_t i = 0; i < prepared.size(); ++i) {
        FeatureRecord record;
        record.values = vectors[i];
        record.writer_id = prepared[i].writer_id;
        record.forgery = prepared[i].forgery;
        record.image_id = prepared[i].image_id;
        features.push_back(std::move(record));
        splits.push_back(prepared[i].split);
      }
    }
    save_features(out_path("features.bin"), out_path("features.json"), features, splits,
                  hash);
    logger.end();

    logger.begin("train-wd+score");
    std::vector<FeatureRecord> dev_features, exploit_features;
    for (std::size_t i = 0; i < features.size(); ++i) {
      (splits[i] == "dev" ? dev_features : exploit_features).push_back(features[i]);
    }
    if (exploit_features.empty()) throw DataError("manifest has no exploit records");

    WdProtocol wd;
    wd.references = config.wd_references;
    wd.negatives_per_writer = config.wd_negatives_per_writer;
    wd.policy = negative_policy_from_string(config.wd_policy);
    wd.seed = config.seed;
    const SvmConfig svm = config.svm_config();

    std::set<int> exploit_writers;
    for (const auto& r : exploit_features) exploit_writers.insert(r.writer_id);

    // shared negative pool ids for the peer policy (excluded from random
    // forgery scoring below)
    std::set<std::string> peer_pool_ids;
    if (wd.policy == NegativePolicy::kPeer) {
      for (std::size_t i : sample_negative_pool(exploit_features, wd.k(), wd.seed)) {
        peer_pool_ids.insert(exploit_features[i].image_id);
      }
    }

    std::vector<ScoreRecord> score_records;
    fs::create_directories(out_path("classifiers"));
    for (int writer : exploit_writers) {
      const WdTrainingSet training =
          build_wd_dataset(exploit_features, dev_features, writer, wd);
      const WDClassifier classifier = train_svm(training.features, training.labels, svm, writer);
      save_classifier(out_path("classifiers/wd_" + std::to_string(writer) + ".json"),
                      classifier, hash);
      const std::set<std::string> references(training.positive_ids.begin(),
                                             training.positive_ids.end());
      for (const auto& record : exploit_features) {
        const bool is_reference = references.count(record.image_id) > 0;
        std::string cls;
        if (record.writer_id == writer) {
          if (record.forgery) cls = "skilled";
          else if (is_reference) continue;  // training references are not scored
          else cls = "genuine";
        } else if (!record.forgery) {
          if (peer_pool_ids.count(record.image_id) > 0) continue;  // trained negatives
          cls = "random";
        } else {
          continue;  // other writers' forgeries enter no one's score set
        }
        score_records.push_back(ScoreRecord{writer, record.image_id, cls,
                                            classifier.decide(record.values)});
      }
    }
    save_scores(out_path("scores.jsonl"), score_records, hash);
    logger.end();

    logger.begin("metrics");
    result.report = compute_metrics(scores_to_set(score_records));
    save_report(out_path("report.json"), out_path("report.txt"), result.report, hash);
    result.report_json_path = out_path("report.json");

    json stats;
    stats["type"] = "sigspp-run-stats";
    stats["config_hash"] = hash;
    stats["train_accuracy"] = result.train_accuracy;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    stats["wall_seconds"] = result.wall_seconds;
    std::ofstream stats_out(out_path("stats.json"));
    stats_out << stats.dump(2) << "\n";
    logger.end();
  } catch (const Error& e) {
    const std::string stage = logger.current_stage.empty() ? "unknown" : logger.current_stage;
    logger.log << "stage " << stage << " FAILED: " << e.what() << "\n";
    logger.log.flush();
    const std::string message = "stage " + stage + ": " + e.what();
    // rethrow with the stage name, preserving the error class for exit codes
    if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(message);
    if (dynamic_cast<const ShapeError*>(&e)) throw ShapeError(message);
    if (dynamic_cast<const DataError*>(&e)) throw DataError(message);
    if (dynamic_cast<const NumericError*>(&e)) throw NumericError(message);
    if (dynamic_cast<const StateError*>(&e)) throw StateError(message);
    throw Error(message);
  }
  return result;
}

}  // namespace sigspp
