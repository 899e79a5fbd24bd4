#include "sigspp/wd_dataset.hpp"

#include <algorithm>
#include <map>

#include "sigspp/rng.hpp"

namespace sigspp {

NegativePolicy negative_policy_from_string(const std::string& s) {
  if (s == "dev") return NegativePolicy::kDevSet;
  if (s == "peer") return NegativePolicy::kPeer;
  throw ConfigError("unknown negative policy '" + s + "' (expected dev|peer)");
}

std::string to_string(NegativePolicy policy) {
  return policy == NegativePolicy::kDevSet ? "dev" : "peer";
}

std::vector<std::size_t> sample_negative_pool(const std::vector<FeatureRecord>& records,
                                              int per_writer, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_writer;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].forgery) continue;  // forgeries never enter training data
    by_writer[records[i].writer_id].push_back(i);
  }
  std::vector<std::size_t> pool;
  for (auto& [writer, indices] : by_writer) {
    Rng rng(Rng::mix(seed, 0x4e454750 + static_cast<std::uint64_t>(writer)));
    rng.shuffle(indices);
    const std::size_t take = std::min<std::size_t>(indices.size(),
                                                   static_cast<std::size_t>(per_writer));
    std::vector<std::size_t> chosen(indices.begin(), indices.begin() + take);
    std::sort(chosen.begin(), chosen.end());
    pool.insert(pool.end(), chosen.begin(), chosen.end());
  }
  return pool;
}

WdTrainingSet build_wd_dataset(const std::vector<FeatureRecord>& exploitation,
                               const std::vector<FeatureRecord>& development,
                               int writer_id, const WdProtocol& protocol) {
  std::vector<std::size_t> own_genuine;
  for (std::size_t i = 0; i < exploitation.size(); ++i) {
    if (exploitation[i].writer_id == writer_id && !exploitation[i].forgery) {
      own_genuine.push_back(i);
    }
  }
  if (static_cast<int>(own_genuine.size()) < protocol.references) {
    throw DataError("writer " + std::to_string(writer_id) + " has " +
                    std::to_string(own_genuine.size()) + " genuine signatures, " +
                    std::to_string(protocol.references) + " references requested");
  }

  Rng rng(Rng::mix(protocol.seed, 0x504f5331 + static_cast<std::uint64_t>(writer_id)));
  rng.shuffle(own_genuine);
  own_genuine.resize(static_cast<std::size_t>(protocol.references));
  std::sort(own_genuine.begin(), own_genuine.end());

  WdTrainingSet set;
  for (std::size_t i : own_genuine) {
    set.features.push_back(exploitation[i].values);
    set.labels.push_back(1);
    set.positive_ids.push_back(exploitation[i].image_id);
  }

  const auto& negative_source =
      protocol.policy == NegativePolicy::kDevSet ? development : exploitation;
  const auto pool = sample_negative_pool(negative_source, protocol.k(), protocol.seed);
  for (std::size_t i : pool) {
    const FeatureRecord& record = negative_source[i];
    if (protocol.policy == NegativePolicy::kPeer && record.writer_id == writer_id) {
      continue;  // own signatures are positives, never negatives
    }
    if (record.forgery) {
      throw StateError("negative pool contains a forgery record");
    }
    set.features.push_back(record.values);
    set.labels.push_back(-1);
  }
  if (set.features.size() == own_genuine.size()) {
    throw DataError("build_wd_dataset: negative pool is empty for writer " +
                    std::to_string(writer_id));
  }
  return set;
}

}  // namespace sigspp
