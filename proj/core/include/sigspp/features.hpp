#ifndef SIGSPP_FEATURES_HPP_
#define SIGSPP_FEATURES_HPP_

#include <string>
#include <vector>

#include "sigspp/image.hpp"
#include "sigspp/model.hpp"

namespace sigspp {

// How images are sized before the forward pass, per training protocol:
//  kNonSpp:   center in the fixed canvas; larger images are resized to the
//             canvas first; the canvas is then resized to the network input.
//  kSppFixed: center in the fixed canvas; larger images are processed in
//             their original size.
//  kSppMulti: all images are processed in their original size.
enum class ExtractionProtocol { kNonSpp, kSppFixed, kSppMulti };

ExtractionProtocol extraction_protocol_from_string(const std::string& s);
std::string to_string(ExtractionProtocol protocol);

struct ExtractionSettings {
  ExtractionProtocol protocol = ExtractionProtocol::kSppMulti;
  int canvas_h = 0, canvas_w = 0;  // fixed canvas, required unless kSppMulti
  // Network input for kNonSpp; 0 uses the model spec's nominal input.
  int input_h = 0, input_w = 0;
};

// Sizes the image per protocol without running the network.
GrayImage prepare_for_extraction(const GrayImage& image, const ExtractionSettings& settings,
                                 const NetworkSpec& spec);

// phi(X): forward pass in eval mode up to the last fully-connected layer
// before the heads (post batch-norm, post activation). Output length is
// the model's feature dim regardless of the image size for spp models.
std::vector<float> extract_features(Model<float>& model, const GrayImage& image,
                                    const ExtractionSettings& settings);

// Batched convenience over a list of images (grouped by size internally).
std::vector<std::vector<float>> extract_features_batch(
    Model<float>& model, const std::vector<const GrayImage*>& images,
    const ExtractionSettings& settings, int threads = 1);

struct FeatureRecord {
  std::vector<float> values;
  int writer_id = 0;
  bool forgery = false;
  std::string image_id;
};

}  // namespace sigspp

#endif  // SIGSPP_FEATURES_HPP_
