#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "uff/learners.hpp"
#include "uff/pipeline.hpp"

namespace uff {

/// Plain-text run configuration: `key = value` lines, '#' comments. Every
/// key has a default; unknown keys are rejected so typos cannot silently
/// fall back. The resolved settings echo into run logs verbatim.
class RunConfig {
 public:
  RunConfig();  // defaults only

  /// Parse a config file over the defaults.
  void load(const std::filesystem::path& path);
  /// Same syntax from an in-memory string (e.g. the settings a model file
  /// carries).
  void load_text(const std::string& text, const std::string& origin = "config text");
  /// Single override (CLI), validated like a file line.
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// Pipeline settings; `declared_points` feeds the "auto" schedule (from
  /// the manifest's point_count).
  PipelineConfig pipeline(int declared_points) const;

  RfParams rf_params() const;      // shape classifier forest
  RfParams seg_rf_params() const;  // segmentation head forests

  /// All keys as sorted "key = value" lines.
  std::string echo() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace uff
