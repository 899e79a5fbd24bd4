#include "sigspp/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace sigspp {

std::vector<ManifestRecord> DatasetManifest::split_records(const std::string& split) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::vector<int> DatasetManifest::writers(const std::string& split) const {
  std::set<int> ids;
  for (const auto& r : records) {
    if (r.split == split) ids.insert(r.writer_id);
  }
  return std::vector<int>(ids.begin(), ids.end());
}

std::string DatasetManifest::resolve(const ManifestRecord& record) const {
  const std::filesystem::path p(record.path);
  if (p.is_absolute() || base_dir.empty()) return record.path;
  return (std::filesystem::path(base_dir) / p).string();
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  nlohmann::json header;
  header["type"] = "sigspp-manifest";
  header["version"] = 1;
  header["provenance"] = manifest.provenance;
  header["canvas_set"] = manifest.canvas_set_path;
  header["preprocessed"] = manifest.preprocessed;
  out << header.dump() << "\n";
  for (const auto& r : manifest.records) {
    nlohmann::json line;
    line["path"] = r.path;
    line["writer"] = r.writer_id;
    line["forgery"] = r.forgery;
    line["split"] = r.split;
    line["dpi"] = r.dpi;
    out << line.dump() << "\n";
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  DatasetManifest manifest;
  manifest.base_dir = std::filesystem::path(path).parent_path().string();

  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad manifest line in " + path + ": " + e.what());
    }
    if (first && doc.value("type", "") == "sigspp-manifest") {
      manifest.provenance = doc.value("provenance", "");
      manifest.canvas_set_path = doc.value("canvas_set", "");
      manifest.preprocessed = doc.value("preprocessed", false);
      first = false;
      continue;
    }
    first = false;
    ManifestRecord record;
    record.path = doc.at("path");
    record.writer_id = doc.at("writer");
    record.forgery = doc.at("forgery");
    record.split = doc.at("split");
    record.dpi = doc.value("dpi", 0);
    if (record.split != "dev" && record.split != "exploit") {
      throw DataError("manifest record has unknown split '" + record.split + "'");
    }
    manifest.records.push_back(std::move(record));
  }

  // dev and exploit writer sets must be disjoint
  std::set<int> dev, exploit;
  for (const auto& r : manifest.records) {
    (r.split == "dev" ? dev : exploit).insert(r.writer_id);
  }
  std::vector<int> overlap;
  std::set_intersection(dev.begin(), dev.end(), exploit.begin(), exploit.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw DataError("manifest violates dev/exploit writer disjointness (writer " +
                    std::to_string(overlap.front()) + " appears in both)");
  }
  return manifest;
}

}  // namespace sigspp
