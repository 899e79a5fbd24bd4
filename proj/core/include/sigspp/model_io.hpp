#ifndef SIGSPP_MODEL_IO_HPP_
#define SIGSPP_MODEL_IO_HPP_

#include <string>

#include "sigspp/model.hpp"
#include "sigspp/optimizer.hpp"

namespace sigspp {

// Versioned binary container, single precision, little endian:
//   magic "SIGSPP", format version, spec text (catalog notation), M,
//   forgery-head flag, input dims, then named weight blocks with explicit
//   shape prefixes. An optional trailing section persists optimizer state
//   (velocities + epoch) so training can resume exactly. Round-trips are
//   bit exact.
void save_model(const std::string& path, const Model<float>& model,
                const OptimizerState<float>* optimizer = nullptr,
                const std::string& config_hash = "");

Model<float> load_model(const std::string& path,
                        OptimizerState<float>* optimizer = nullptr,
                        std::string* config_hash = nullptr);

}  // namespace sigspp

#endif  // SIGSPP_MODEL_IO_HPP_
