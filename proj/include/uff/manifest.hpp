#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace uff {

/// One dataset sample: a cloud file, its object class, and (for
/// segmentation sets) a per-point part label file. Paths are relative to the
/// manifest's directory unless absolute.
struct SampleRef {
  std::string cloud;
  int label = -1;
  std::string parts;  // empty when the sample has no part labels
};

/// JSON dataset description. Splits may be empty except that at least one
/// sample must exist somewhere. Loading verifies every referenced file
/// exists; contents are checked when the files are actually read.
struct DatasetManifest {
  std::filesystem::path root;  // directory the relative paths resolve against
  int point_count = 0;         // declared points per cloud, 0 = unchecked
  std::vector<std::string> class_names;            // optional, indexed by class id
  std::map<int, std::vector<int>> class_parts;     // class id -> part vocabulary
  std::vector<SampleRef> train, val, test;

  std::filesystem::path resolve(const std::string& rel) const;
  std::span<const SampleRef> split(const std::string& name) const;  // "train"|"val"|"test"
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace uff
