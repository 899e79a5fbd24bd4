#ifndef SIGSPP_MANIFEST_HPP_
#define SIGSPP_MANIFEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sigspp/errors.hpp"

namespace sigspp {

struct ManifestRecord {
  std::string path;  // image file, relative to the manifest's directory
  int writer_id = 0;
  bool forgery = false;
  std::string split;  // "dev" or "exploit"
  int dpi = 0;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::string provenance;       // e.g. "synthetic seed=42" or "external"
  std::string canvas_set_path;  // optional canvases.json reference
  std::string base_dir;         // directory the record paths resolve against
  bool preprocessed = false;    // background already removed + inverted

  std::vector<ManifestRecord> split_records(const std::string& split) const;
  std::vector<int> writers(const std::string& split) const;  // sorted unique
  std::string resolve(const ManifestRecord& record) const;
};

// JSON-lines: a header object, then one record object per line.
void save_manifest(const std::string& path, const DatasetManifest& manifest);

// Throws DataError when the dev and exploit writer sets intersect.
DatasetManifest load_manifest(const std::string& path);

}  // namespace sigspp

#endif  // SIGSPP_MANIFEST_HPP_
