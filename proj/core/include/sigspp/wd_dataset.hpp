#ifndef SIGSPP_WD_DATASET_HPP_
#define SIGSPP_WD_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sigspp/features.hpp"

namespace sigspp {

// Where the negative samples of a writer-dependent training set come from:
//  kDevSet: genuine signatures of the development writers (GPDS/Brazilian
//           style), a pool shared by every exploitation writer;
//  kPeer:   genuine signatures of the other exploitation writers
//           (MCYT/CEDAR style).
enum class NegativePolicy { kDevSet, kPeer };

NegativePolicy negative_policy_from_string(const std::string& s);
std::string to_string(NegativePolicy policy);

struct WdProtocol {
  int references = 12;           // r genuine signatures as positives
  int negatives_per_writer = 0;  // k per source writer; 0 means k = r
  NegativePolicy policy = NegativePolicy::kDevSet;
  std::uint64_t seed = 1;

  int k() const { return negatives_per_writer > 0 ? negatives_per_writer : references; }
};

struct WdTrainingSet {
  std::vector<std::vector<float>> features;
  std::vector<int> labels;  // +1 genuine of the writer, -1 otherwise
  std::vector<std::string> positive_ids;  // image ids used as references
};

// Indices of up to k genuine records per writer, drawn with the
// dataset-level seed. The pool is shared: it does not depend on which
// exploitation writer consumes it.
std::vector<std::size_t> sample_negative_pool(const std::vector<FeatureRecord>& records,
                                              int per_writer, std::uint64_t seed);

// Training set for one writer: r random genuine signatures of the writer
// as positives, the negative pool as negatives (minus the writer's own
// entries under the peer policy). Skilled forgeries of the writer are
// structurally excluded: only genuine records are ever eligible.
WdTrainingSet build_wd_dataset(const std::vector<FeatureRecord>& exploitation,
                               const std::vector<FeatureRecord>& development,
                               int writer_id, const WdProtocol& protocol);

}  // namespace sigspp

#endif  // SIGSPP_WD_DATASET_HPP_
