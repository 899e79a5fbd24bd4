#include "sigspp/features.hpp"

#include <algorithm>
#include <map>
#include <thread>

#include "sigspp/network.hpp"
#include "sigspp/preprocess.hpp"
#include "sigspp/trainer.hpp"

namespace sigspp {

ExtractionProtocol extraction_protocol_from_string(const std::string& s) {
  if (s == "non-spp") return ExtractionProtocol::kNonSpp;
  if (s == "spp-fixed") return ExtractionProtocol::kSppFixed;
  if (s == "spp-multi") return ExtractionProtocol::kSppMulti;
  throw ConfigError("unknown extraction protocol '" + s + "'");
}

std::string to_string(ExtractionProtocol protocol) {
  switch (protocol) {
    case ExtractionProtocol::kNonSpp: return "non-spp";
    case ExtractionProtocol::kSppFixed: return "spp-fixed";
    case ExtractionProtocol::kSppMulti: return "spp-multi";
  }
  throw ConfigError("bad extraction protocol value");
}

GrayImage prepare_for_extraction(const GrayImage& image, const ExtractionSettings& settings,
                                 const NetworkSpec& spec) {
  switch (settings.protocol) {
    case ExtractionProtocol::kNonSpp: {
      if (settings.canvas_h < 1 || settings.canvas_w < 1) {
        throw ConfigError("non-spp extraction needs a canvas size");
      }
      GrayImage sized = image;
      if (image.height > settings.canvas_h || image.width > settings.canvas_w) {
        sized = resize_bilinear(image, settings.canvas_h, settings.canvas_w);
      }
      GrayImage canvas = center_in_canvas(sized, settings.canvas_h, settings.canvas_w);
      const int in_h = settings.input_h > 0 ? settings.input_h : spec.input_height;
      const int in_w = settings.input_w > 0 ? settings.input_w : spec.input_width;
      return resize_bilinear(canvas, in_h, in_w);
    }
    case ExtractionProtocol::kSppFixed: {
      if (settings.canvas_h < 1 || settings.canvas_w < 1) {
        throw ConfigError("spp-fixed extraction needs a canvas size");
      }
      if (image.height > settings.canvas_h || image.width > settings.canvas_w) {
        return image;  // oversized inputs keep their original size
      }
      return center_in_canvas(image, settings.canvas_h, settings.canvas_w);
    }
    case ExtractionProtocol::kSppMulti:
      return image;
  }
  throw ConfigError("bad extraction protocol value");
}

std::vector<float> extract_features(Model<float>& model, const GrayImage& image,
                                    const ExtractionSettings& settings) {
  if (settings.protocol == ExtractionProtocol::kNonSpp && model.spec.has_spp()) {
    throw ConfigError("non-spp extraction protocol applied to an spp model");
  }
  if (settings.protocol != ExtractionProtocol::kNonSpp && !model.spec.has_spp()) {
    throw ConfigError("spp extraction protocol applied to a non-spp model");
  }
  const GrayImage prepared = prepare_for_extraction(image, settings, model.spec);
  Network<float> net(model);
  const auto out = net.forward(batch_to_tensor({&prepared}), /*training=*/false);
  std::vector<float> features(static_cast<std::size_t>(out.features.channels()));
  for (int j = 0; j < out.features.channels(); ++j) features[j] = out.features(0, j, 0, 0);
  return features;
}

std::vector<std::vector<float>> extract_features_batch(
    Model<float>& model, const std::vector<const GrayImage*>& images,
    const ExtractionSettings& settings, int threads) {
  std::vector<std::vector<float>> result(images.size());
  if (images.empty()) return result;

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      result[i] = extract_features(model, *images[i], settings);
    }
  };
  if (threads <= 1 || images.size() < 2) {
    worker(0, images.size());
  } else {
    // Feature extraction is read-only on the trained model.
    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(threads), images.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (images.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(images.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return result;
}

}  // namespace sigspp
