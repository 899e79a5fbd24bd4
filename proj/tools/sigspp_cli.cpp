// Command line front end: every subcommand maps onto one pipeline stage,
// `run` chains them all. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numeric failure, 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sigspp/architectures.hpp"
#include "sigspp/experiment.hpp"
#include "sigspp/model_io.hpp"
#include "sigspp/network.hpp"
#include "sigspp/optimizer.hpp"
#include "sigspp/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Environment overrides: output directory and thread count only.
void apply_env_overrides(sigspp::ExperimentConfig& config) {
  if (const char* dir = std::getenv("SIGSPP_OUTPUT_DIR")) config.output_dir = dir;
  if (const char* threads = std::getenv("SIGSPP_THREADS")) {
    config.threads = std::max(1, std::atoi(threads));
  }
}

void add_config_flags(CLI::App* cmd, sigspp::ExperimentConfig& config,
                      std::string& config_path) {
  cmd->add_option("--config", config_path, "experiment config file (key = value lines)");
  cmd->add_option("--name", config.name);
  cmd->add_option("--architecture", config.architecture);
  cmd->add_option("--protocol", config.protocol, "training protocol: fixed|multi");
  cmd->add_option("--epochs", config.epochs);
  cmd->add_option("--batch-size", config.batch_size);
  cmd->add_option("--lambda", config.lambda);
  cmd->add_option("--base-lr", config.base_lr);
  cmd->add_option("--momentum", config.momentum);
  cmd->add_option("--weight-decay", config.weight_decay);
  cmd->add_option("--use-forgeries", config.use_forgeries);
  cmd->add_option("--seed", config.seed);
  cmd->add_option("--max-pad-fraction", config.max_pad_fraction);
  cmd->add_option("--crop-h", config.crop_h);
  cmd->add_option("--crop-w", config.crop_w);
  cmd->add_option("--input-h", config.input_h);
  cmd->add_option("--input-w", config.input_w);
  cmd->add_option("--canvas-h", config.canvas_h);
  cmd->add_option("--canvas-w", config.canvas_w);
  cmd->add_option("--wd-references", config.wd_references);
  cmd->add_option("--wd-negatives-per-writer", config.wd_negatives_per_writer);
  cmd->add_option("--wd-policy", config.wd_policy, "dev|peer");
  cmd->add_option("--wd-kernel", config.wd_kernel, "linear|rbf");
  cmd->add_option("--wd-C", config.wd_C);
  cmd->add_option("--wd-gamma", config.wd_gamma);
  cmd->add_option("--manifest", config.manifest_path);
  cmd->add_option("--out", config.output_dir, "output directory");
  cmd->add_option("--threads", config.threads);
}

// Loads the config file first (when given), then lets explicit flags win.
sigspp::ExperimentConfig resolve_config(const CLI::App* cmd,
                                        const sigspp::ExperimentConfig& flags,
                                        const std::string& config_path) {
  if (config_path.empty()) {
    sigspp::ExperimentConfig config = flags;
    apply_env_overrides(config);
    return config;
  }
  sigspp::ExperimentConfig config = sigspp::parse_experiment_config(config_path);
  auto take = [&](const std::string& flag, auto member) {
    if (cmd->count(flag) > 0) config.*member = flags.*member;
  };
  take("--name", &sigspp::ExperimentConfig::name);
  take("--architecture", &sigspp::ExperimentConfig::architecture);
  take("--protocol", &sigspp::ExperimentConfig::protocol);
  take("--epochs", &sigspp::ExperimentConfig::epochs);
  take("--batch-size", &sigspp::ExperimentConfig::batch_size);
  take("--lambda", &sigspp::ExperimentConfig::lambda);
  take("--base-lr", &sigspp::ExperimentConfig::base_lr);
  take("--momentum", &sigspp::ExperimentConfig::momentum);
  take("--weight-decay", &sigspp::ExperimentConfig::weight_decay);
  take("--use-forgeries", &sigspp::ExperimentConfig::use_forgeries);
  take("--seed", &sigspp::ExperimentConfig::seed);
  take("--max-pad-fraction", &sigspp::ExperimentConfig::max_pad_fraction);
  take("--crop-h", &sigspp::ExperimentConfig::crop_h);
  take("--crop-w", &sigspp::ExperimentConfig::crop_w);
  take("--input-h", &sigspp::ExperimentConfig::input_h);
  take("--input-w", &sigspp::ExperimentConfig::input_w);
  take("--canvas-h", &sigspp::ExperimentConfig::canvas_h);
  take("--canvas-w", &sigspp::ExperimentConfig::canvas_w);
  take("--wd-references", &sigspp::ExperimentConfig::wd_references);
  take("--wd-negatives-per-writer", &sigspp::ExperimentConfig::wd_negatives_per_writer);
  take("--wd-policy", &sigspp::ExperimentConfig::wd_policy);
  take("--wd-kernel", &sigspp::ExperimentConfig::wd_kernel);
  take("--wd-C", &sigspp::ExperimentConfig::wd_C);
  take("--wd-gamma", &sigspp::ExperimentConfig::wd_gamma);
  take("--manifest", &sigspp::ExperimentConfig::manifest_path);
  take("--out", &sigspp::ExperimentConfig::output_dir);
  take("--threads", &sigspp::ExperimentConfig::threads);
  apply_env_overrides(config);
  return config;
}

void require_same_hash(const std::string& a, const std::string& b,
                       const std::string& what) {
  sigspp::require_config_hash(a, b, what);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Signature verification pipeline with spatial pyramid pooling"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic signature dataset");
  sigspp::SynthDatasetConfig synth_config;
  std::string synth_out = "dataset";
  synth->add_option("--out", synth_out, "dataset directory")->required();
  synth->add_option("--writers", synth_config.writers);
  synth->add_option("--dev-writers", synth_config.dev_writers);
  synth->add_option("--genuine", synth_config.genuine_per_writer);
  synth->add_option("--forgeries", synth_config.forgeries_per_writer);
  synth->add_option("--min-h", synth_config.sizes.min_h);
  synth->add_option("--max-h", synth_config.sizes.max_h);
  synth->add_option("--min-w", synth_config.sizes.min_w);
  synth->add_option("--max-w", synth_config.sizes.max_w);
  synth->add_option("--seed", synth_config.seed);
  synth->add_option("--dpi", synth_config.dpi);
  synth->callback([&] {
    const auto manifest = sigspp::generate_synthetic_dataset(synth_config, synth_out);
    std::cout << "wrote " << manifest.records.size() << " images and manifest to "
              << synth_out << "\n";
  });

  // Shared config-backed state for the pipeline subcommands.
  sigspp::ExperimentConfig flags;
  std::string config_path;

  // ---- preprocess ----
  auto* preprocess = app.add_subcommand(
      "preprocess", "remove backgrounds, invert, and write the cleaned dataset");
  std::string pre_manifest, pre_out;
  preprocess->add_option("--manifest", pre_manifest)->required();
  preprocess->add_option("--out", pre_out)->required();
  preprocess->callback([&] {
    const auto manifest = sigspp::load_manifest(pre_manifest);
    const auto prepared = sigspp::load_and_preprocess(manifest);
    fs::create_directories(pre_out);
    sigspp::DatasetManifest cleaned;
    cleaned.provenance = "preprocessed from " + pre_manifest;
    cleaned.preprocessed = true;
    cleaned.base_dir = pre_out;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const auto& record = manifest.records[i];
      const std::string name = fs::path(record.path).filename().string();
      sigspp::write_png_gray((fs::path(pre_out) / name).string(), prepared[i].image);
      sigspp::ManifestRecord out = record;
      out.path = name;
      cleaned.records.push_back(out);
    }
    sigspp::save_manifest((fs::path(pre_out) / "manifest.jsonl").string(), cleaned);
    std::cout << "preprocessed " << prepared.size() << " images into " << pre_out << "\n";
  });

  // ---- train ----
  auto* train = app.add_subcommand("train", "learn the feature representation (CNN)");
  add_config_flags(train, flags, config_path);
  train->callback([&] {
    auto config = resolve_config(train, flags, config_path);
    if (config.manifest_path.empty()) {
      throw sigspp::ConfigError("train: --manifest (or manifest= in the config) is required");
    }
    // run everything up to the trained model; later stages have their own
    // subcommands, `run` chains the whole pipeline
    const auto manifest = sigspp::load_manifest(config.manifest_path);
    const auto prepared = sigspp::load_and_preprocess(manifest);
    auto dev = sigspp::prepare_dev_training(prepared, config);
    const std::string hash = sigspp::config_hash(config);
    fs::create_directories(config.output_dir);
    sigspp::save_canvas_set((fs::path(config.output_dir) / "canvases.json").string(),
                            dev.canvases, hash);
    if (dev.canvas_collapse_warning) {
      std::cerr << "warning: canvas collapse (some canvas sizes coincide)\n";
    }

    bool dev_has_forgeries = false;
    for (const auto& s : dev.samples) dev_has_forgeries |= s.forgery_flag != 0;
    const int model_in_h = config.crop_h > 0 ? config.crop_h : config.input_h;
    const int model_in_w = config.crop_w > 0 ? config.crop_w : config.input_w;
    const auto spec = sigspp::build_architecture(
        config.architecture, model_in_h, model_in_w,
        static_cast<int>(dev.writer_ids.size()),
        config.use_forgeries && dev_has_forgeries);
    auto model = sigspp::glorot_init<float>(spec, config.seed);
    sigspp::Network<float> net(model);
    auto opt = sigspp::OptimizerState<float>::make(model, config.base_lr, config.momentum,
                                                   config.weight_decay);
    sigspp::TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.lambda = config.lambda;
    tc.base_lr = config.base_lr;
    tc.momentum = config.momentum;
    tc.weight_decay = config.weight_decay;
    tc.protocol = config.train_protocol();
    tc.seed = config.seed;
    tc.crop_h = config.crop_h;
    tc.crop_w = config.crop_w;
    tc.max_pad = sigspp::PadAmount{
        static_cast<int>(dev.canvases.canvases[0].height * config.max_pad_fraction),
        static_cast<int>(dev.canvases.canvases[0].width * config.max_pad_fraction)};
    std::ofstream log((fs::path(config.output_dir) / "train_log.jsonl").string());
    log << json{{"type", "sigspp-train-log"}, {"version", 1}, {"config_hash", hash}}.dump()
        << "\n";
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const auto stats =
          tc.protocol == sigspp::TrainProtocol::kMulti
              ? sigspp::train_epoch_multisize(net, dev.samples, dev.groups, tc, opt, epoch)
              : sigspp::train_epoch_fixed(net, dev.samples, tc, opt, epoch);
      log << json{{"epoch", epoch},
                  {"lr", stats.learning_rate},
                  {"loss", stats.mean_loss},
                  {"loss_user", stats.mean_user_loss},
                  {"loss_forgery", stats.mean_forgery_loss},
                  {"batches", stats.batches}}
                 .dump()
          << "\n";
      log.flush();
      std::cout << "epoch " << epoch << " loss " << stats.mean_loss << "\n";
    }
    sigspp::save_model((fs::path(config.output_dir) / "model.bin").string(), model, &opt,
                       hash);
    std::cout << "model written to " << config.output_dir << "/model.bin\n";
  });

  // ---- finetune ----
  auto* finetune = app.add_subcommand(
      "finetune", "adapt a trained model to a new writer set (fresh softmax head)");
  std::string ft_model_path;
  sigspp::FinetuneConfig ft;
  finetune->add_option("--model", ft_model_path, "source model file")->required();
  finetune->add_option("--lr", ft.learning_rate, "reduced learning rate (default 5e-4)");
  finetune->add_option("--keep-forgery-head", ft.keep_forgery_head);
  add_config_flags(finetune, flags, config_path);
  finetune->callback([&] {
    auto config = resolve_config(finetune, flags, config_path);
    if (config.manifest_path.empty()) {
      throw sigspp::ConfigError("finetune: target manifest is required");
    }
    const auto source = sigspp::load_model(ft_model_path);
    const auto manifest = sigspp::load_manifest(config.manifest_path);
    const auto prepared = sigspp::load_and_preprocess(manifest);
    auto dev = sigspp::prepare_dev_training(prepared, config);
    ft.epochs = config.epochs;  // --epochs doubles as the finetune epoch count
    ft.new_user_classes = static_cast<int>(dev.writer_ids.size());
    ft.seed = config.seed;
    ft.batch_size = config.batch_size;
    ft.lambda = config.lambda;
    ft.momentum = config.momentum;
    ft.weight_decay = config.weight_decay;
    ft.max_pad = sigspp::PadAmount{
        static_cast<int>(dev.canvases.canvases[0].height * config.max_pad_fraction),
        static_cast<int>(dev.canvases.canvases[0].width * config.max_pad_fraction)};
    const auto tuned = sigspp::finetune(source, dev.samples, dev.groups, ft);
    fs::create_directories(config.output_dir);
    const std::string hash = sigspp::config_hash(config);
    sigspp::save_model((fs::path(config.output_dir) / "model_finetuned.bin").string(),
                       tuned, nullptr, hash);
    std::cout << "finetuned model written to " << config.output_dir
              << "/model_finetuned.bin\n";
  });

  // ---- extract ----
  auto* extract = app.add_subcommand("extract", "extract phi(X) features for a manifest");
  std::string ex_model_path;
  extract->add_option("--model", ex_model_path)->required();
  add_config_flags(extract, flags, config_path);
  extract->callback([&] {
    auto config = resolve_config(extract, flags, config_path);
    if (config.manifest_path.empty()) {
      throw sigspp::ConfigError("extract: manifest is required");
    }
    std::string model_hash;
    auto model = sigspp::load_model(ex_model_path, nullptr, &model_hash);
    const std::string hash = sigspp::config_hash(config);
    require_same_hash(model_hash, hash, "model " + ex_model_path);
    const auto manifest = sigspp::load_manifest(config.manifest_path);
    const auto prepared = sigspp::load_and_preprocess(manifest);

    sigspp::CanvasSet canvases;
    const std::string canvases_path =
        (fs::path(config.output_dir) / "canvases.json").string();
    if (fs::exists(canvases_path)) {
      std::string canvas_hash;
      canvases = sigspp::load_canvas_set(canvases_path, &canvas_hash);
      require_same_hash(canvas_hash, hash, "canvas set " + canvases_path);
    } else {
      std::vector<sigspp::ImageDims> dims;
      for (const auto& s : prepared) {
        if (s.split == "dev") dims.push_back({s.image.height, s.image.width});
      }
      if (dims.size() >= 2) canvases = sigspp::compute_canvas_set(dims);
      else canvases.canvases[4] = {config.canvas_h, config.canvas_w};
    }

    sigspp::ExtractionSettings settings;
    settings.protocol = model.spec.has_spp()
                            ? (config.train_protocol() == sigspp::TrainProtocol::kMulti
                                   ? sigspp::ExtractionProtocol::kSppMulti
                                   : sigspp::ExtractionProtocol::kSppFixed)
                            : sigspp::ExtractionProtocol::kNonSpp;
    settings.canvas_h = config.canvas_h > 0 ? config.canvas_h : canvases.max_h;
    settings.canvas_w = config.canvas_w > 0 ? config.canvas_w : canvases.max_w;
    settings.input_h = config.crop_h > 0 ? config.crop_h : config.input_h;
    settings.input_w = config.crop_w > 0 ? config.crop_w : config.input_w;

    std::vector<const sigspp::GrayImage*> images;
    for (const auto& s : prepared) images.push_back(&s.image);
    const auto vectors =
        sigspp::extract_features_batch(model, images, settings, config.threads);
    std::vector<sigspp::FeatureRecord> records;
    std::vector<std::string> splits;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      records.push_back(sigspp::FeatureRecord{vectors[i], prepared[i].writer_id,
                                              prepared[i].forgery, prepared[i].image_id});
      splits.push_back(prepared[i].split);
    }
    fs::create_directories(config.output_dir);
    sigspp::save_features((fs::path(config.output_dir) / "features.bin").string(),
                          (fs::path(config.output_dir) / "features.json").string(),
                          records, splits, hash);
    std::cout << "extracted " << records.size() << " feature vectors ("
              << (records.empty() ? 0 : records.front().values.size()) << " dims)\n";
  });

  // ---- train-wd ----
  auto* train_wd =
      app.add_subcommand("train-wd", "train per-writer SVMs on extracted features");
  add_config_flags(train_wd, flags, config_path);
  train_wd->callback([&] {
    auto config = resolve_config(train_wd, flags, config_path);
    const std::string hash = sigspp::config_hash(config);
    std::vector<std::string> splits;
    std::string feat_hash;
    const auto records = sigspp::load_features(
        (fs::path(config.output_dir) / "features.bin").string(),
        (fs::path(config.output_dir) / "features.json").string(), &splits, &feat_hash);
    require_same_hash(feat_hash, hash, "features");
    std::vector<sigspp::FeatureRecord> dev, exploit;
    for (std::size_t i = 0; i < records.size(); ++i) {
      (splits[i] == "dev" ? dev : exploit).push_back(records[i]);
    }
    sigspp::WdProtocol wd;
    wd.references = config.wd_references;
    wd.negatives_per_writer = config.wd_negatives_per_writer;
    wd.policy = sigspp::negative_policy_from_string(config.wd_policy);
    wd.seed = config.seed;
    const auto svm = config.svm_config();
    std::set<int> writers;
    for (const auto& r : exploit) writers.insert(r.writer_id);
    fs::create_directories(fs::path(config.output_dir) / "classifiers");
    for (int writer : writers) {
      const auto training = sigspp::build_wd_dataset(exploit, dev, writer, wd);
      const auto classifier = sigspp::train_svm(training.features, training.labels, svm, writer);
      sigspp::save_classifier(
          (fs::path(config.output_dir) / "classifiers" /
           ("wd_" + std::to_string(writer) + ".json")).string(),
          classifier, hash);
    }
    std::cout << "trained " << writers.size() << " writer-dependent classifiers\n";
  });

  // ---- evaluate ----
  auto* evaluate =
      app.add_subcommand("evaluate", "score the exploitation set with the WD classifiers");
  add_config_flags(evaluate, flags, config_path);
  evaluate->callback([&] {
    auto config = resolve_config(evaluate, flags, config_path);
    const std::string hash = sigspp::config_hash(config);
    std::vector<std::string> splits;
    std::string feat_hash;
    const auto records = sigspp::load_features(
        (fs::path(config.output_dir) / "features.bin").string(),
        (fs::path(config.output_dir) / "features.json").string(), &splits, &feat_hash);
    require_same_hash(feat_hash, hash, "features");
    std::vector<sigspp::FeatureRecord> dev, exploit;
    for (std::size_t i = 0; i < records.size(); ++i) {
      (splits[i] == "dev" ? dev : exploit).push_back(records[i]);
    }
    sigspp::WdProtocol wd;
    wd.references = config.wd_references;
    wd.negatives_per_writer = config.wd_negatives_per_writer;
    wd.policy = sigspp::negative_policy_from_string(config.wd_policy);
    wd.seed = config.seed;
    std::set<std::string> peer_pool_ids;
    if (wd.policy == sigspp::NegativePolicy::kPeer) {
      for (std::size_t i : sigspp::sample_negative_pool(exploit, wd.k(), wd.seed)) {
        peer_pool_ids.insert(exploit[i].image_id);
      }
    }
    std::set<int> writers;
    for (const auto& r : exploit) writers.insert(r.writer_id);
    std::vector<sigspp::ScoreRecord> scores;
    for (int writer : writers) {
      std::string cls_hash;
      const auto classifier = sigspp::load_classifier(
          (fs::path(config.output_dir) / "classifiers" /
           ("wd_" + std::to_string(writer) + ".json")).string(),
          &cls_hash);
      require_same_hash(cls_hash, hash, "classifier for writer " + std::to_string(writer));
      // references were drawn with the same protocol seed; rebuild the set
      const auto training = sigspp::build_wd_dataset(exploit, dev, writer, wd);
      const std::set<std::string> references(training.positive_ids.begin(),
                                             training.positive_ids.end());
      for (const auto& record : exploit) {
        std::string cls;
        if (record.writer_id == writer) {
          if (record.forgery) cls = "skilled";
          else if (references.count(record.image_id)) continue;
          else cls = "genuine";
        } else if (!record.forgery) {
          if (peer_pool_ids.count(record.image_id)) continue;
          cls = "random";
        } else {
          continue;
        }
        scores.push_back(sigspp::ScoreRecord{writer, record.image_id, cls,
                                             classifier.decide(record.values)});
      }
    }
    sigspp::save_scores((fs::path(config.output_dir) / "scores.jsonl").string(), scores,
                        hash);
    std::cout << "wrote " << scores.size() << " scores\n";
  });

  // ---- report ----
  auto* report = app.add_subcommand("report", "compute EER/AER metrics from score files");
  std::string report_scores, report_out_json, report_out_text;
  report->add_option("--scores", report_scores, "scores.jsonl")->required();
  report->add_option("--out-json", report_out_json);
  report->add_option("--out-text", report_out_text);
  report->callback([&] {
    std::string hash;
    const auto records = sigspp::load_scores(report_scores, &hash);
    const auto metrics = sigspp::compute_metrics(sigspp::scores_to_set(records));
    std::cout << sigspp::format_report_table(metrics);
    if (!report_out_json.empty()) {
      sigspp::save_report(report_out_json, report_out_text, metrics, hash);
    }
  });

  // ---- run ----
  auto* run = app.add_subcommand("run", "full pipeline: preprocess, train, extract, "
                                        "train-wd, evaluate, report");
  add_config_flags(run, flags, config_path);
  run->callback([&] {
    auto config = resolve_config(run, flags, config_path);
    const auto result = sigspp::run_experiment(config);
    std::cout << sigspp::format_report_table(result.report);
    std::cout << "train_accuracy " << result.train_accuracy * 100.0 << "%\n";
    std::cout << "wall_seconds " << result.wall_seconds << "\n";
    std::cout << "artifacts in " << config.output_dir << " (config " << result.hash
              << ")\n";
  });

  // ---- catalog (small helper) ----
  auto* catalog = app.add_subcommand("catalog", "list the architecture catalog");
  catalog->callback([&] {
    for (const auto& name : sigspp::architecture_names()) {
      const auto spec = sigspp::build_architecture(name, 0, 0, 10, true);
      std::cout << name << ": " << spec.to_string() << "\n";
    }
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const sigspp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sigspp::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const sigspp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const sigspp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
