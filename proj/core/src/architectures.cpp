#include "sigspp/architectures.hpp"

#include <map>

namespace sigspp {

namespace {

struct CatalogEntry {
  const char* rows;
  int nominal_h;
  int nominal_w;
};

// Layer rows per architecture; batch-norm + relu follow every conv and fc
// row implicitly, the heads are appended from the spec flags.
const std::map<std::string, CatalogEntry>& catalog() {
  static const std::map<std::string, CatalogEntry> entries = {
      {"SigNet",
       {"conv11-96-s4-p0,pool3-s2-p0,conv5-256-p2,pool3-s2-p0,conv3-384-p1,"
        "conv3-384-p1,conv3-256-p1,pool3-s2-p0,FC1-2048,FC2-2048",
        170, 242}},
      {"SigNet-SPP",
       {"conv11-96-s4-p0,pool3-s2-p0,conv5-256-p2,pool3-s2-p0,conv3-384-p1,"
        "conv3-384-p1,conv3-180-p1,spp-4-2-1,FC1-2048,FC2-2048",
        170, 242}},
      {"SigNet-300dpi",
       {"conv11-32-s3-p5,pool3-s2-p0,conv5-64-p2,pool3-s3-p0,conv3-128-p1,"
        "conv3-128-p1,pool3-s2-p0,conv3-128-p1,pool3-s3-p0,FC1-2048,FC2-2048",
        390, 548}},
      {"SigNet-SPP-300dpi",
       {"conv11-32-s3-p5,pool3-s2-p0,conv5-64-p2,pool3-s3-p0,conv3-128-p1,"
        "conv3-128-p1,pool3-s2-p0,conv3-128-p1,spp-4-2-1,FC1-2048,FC2-2048",
        390, 548}},
      {"SigNet-600dpi",
       {"conv11-32-s4-p5,pool3-s3-p0,conv5-64-p2,pool3-s2-p0,conv3-128-p1,"
        "conv3-128-p1,pool2-s2-p0,conv3-128-p1,pool4-s4-p0,FC1-2048,FC2-2048",
        780, 1095}},
      {"SigNet-SPP-600dpi",
       {"conv11-32-s4-p5,pool3-s3-p0,conv5-64-p2,pool3-s2-p0,conv3-128-p1,"
        "conv3-128-p1,pool2-s2-p0,conv3-128-p1,spp-4-2-1,FC1-2048,FC2-2048",
        780, 1095}},
      // Scaled-down variant so the whole pipeline runs in minutes on one
      // CPU core. Not from the published catalog.
      {"SigNet-SPP-desk",
       {"conv7-24-s4-p3,pool3-s2-p0,conv5-32-s2-p2,conv3-32-p1,conv3-32-p1,"
        "spp-4-2-1,FC1-128,FC2-128",
        150, 200}},
  };
  return entries;
}

}  // namespace

NetworkSpec build_architecture(const std::string& name, int input_h, int input_w,
                               int user_classes, bool forgery_head) {
  const auto it = catalog().find(name);
  if (it == catalog().end()) {
    throw ConfigError("unknown architecture '" + name + "'");
  }
  NetworkSpec spec = NetworkSpec::from_string(it->second.rows);
  spec.user_classes = user_classes;
  spec.forgery_head = forgery_head;
  spec.input_channels = 1;
  spec.input_height = input_h > 0 ? input_h : it->second.nominal_h;
  spec.input_width = input_w > 0 ? input_w : it->second.nominal_w;
  return spec;
}

std::vector<std::string> architecture_names() {
  std::vector<std::string> names;
  for (const auto& [name, entry] : catalog()) names.push_back(name);
  return names;
}

}  // namespace sigspp
