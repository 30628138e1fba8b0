#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "uff/learners.hpp"
#include "uff/pipeline.hpp"

namespace uff {

/// Everything a run can persist: the fitted pipeline plus whichever
/// classifier heads have been trained so far. `run_settings` is the resolved
/// key-value configuration of the fitting run, kept with the model so later
/// commands ingest data the same way (normalization in particular).
struct UffModel {
  PipelineConfig config;
  EncoderModel encoder;
  DecoderModel decoder;
  std::optional<LsqClassifier> cls_lsq;
  std::optional<RandomForest> cls_rf;
  std::vector<SegmentationHead> seg_heads;
  std::string run_settings;
};

/// Binary model container: magic "UFFMDL01", format version, tagged
/// sections, and a trailing FNV-1a 64 fingerprint over all preceding bytes.
/// Numeric payloads are stored as raw little-endian IEEE bit patterns, so
/// save -> load -> save is byte-identical.
void save_model(const UffModel& model, const std::filesystem::path& path);

/// Rejects unknown versions and any fingerprint mismatch (single corrupted
/// byte included).
UffModel load_model(const std::filesystem::path& path);

/// Fingerprint of the in-memory model: the same value save_model embeds.
std::uint64_t model_fingerprint(const UffModel& model);

/// Row-major matrix container ("UFFFEAT1"): shape features, point features.
void save_features(const Matrix& features, const std::filesystem::path& path);
Matrix load_features(const std::filesystem::path& path);

}  // namespace uff
