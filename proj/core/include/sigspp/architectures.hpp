#ifndef SIGSPP_ARCHITECTURES_HPP_
#define SIGSPP_ARCHITECTURES_HPP_

#include <string>
#include <vector>

#include "sigspp/layer_spec.hpp"

namespace sigspp {

// Catalog names:
//   SigNet, SigNet-SPP                 (~100 dpi)
//   SigNet-300dpi, SigNet-SPP-300dpi
//   SigNet-600dpi, SigNet-SPP-600dpi
//   SigNet-SPP-desk                    (small CPU variant for desk-scale runs)
//
// input_h/input_w of 0 pick the catalog's nominal input size; spp variants
// accept inputs of any size, so the nominal size only matters for the
// fixed-pooling architectures (it determines FC1's fan-in).
NetworkSpec build_architecture(const std::string& name, int input_h, int input_w,
                               int user_classes, bool forgery_head);

std::vector<std::string> architecture_names();

}  // namespace sigspp

#endif  // SIGSPP_ARCHITECTURES_HPP_
