// Command-line driver: fit -> encode -> train/eval heads -> export, plus the
// synthetic dataset generator. Every artifact-producing command writes a
// deterministic `<artifact>.log` holding the resolved configuration, the
// model fingerprint, and the run's key figures, so two runs with equal logs
// produced equal outputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "uff/eval.hpp"
#include "uff/io.hpp"
#include "uff/learners.hpp"
#include "uff/manifest.hpp"
#include "uff/model_io.hpp"
#include "uff/pipeline.hpp"
#include "uff/run_config.hpp"
#include "uff/synth.hpp"

namespace {

using namespace uff;
namespace fs = std::filesystem;

// Same stream-splitting constant the learners use for derived RNG streams.
constexpr std::uint64_t kStreamStep = 0x9e3779b97f4a7c15ULL;

using KvList = std::vector<std::pair<std::string, std::string>>;

void apply_threads_env() {
#ifdef _OPENMP
  if (const char* v = std::getenv("UFF_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Settings priority: model's stored settings < --config file < --set flags.
RunConfig layered_config(const std::string& base_text, const std::string& config_path,
                         const std::vector<std::string>& sets) {
  RunConfig run;
  if (!base_text.empty()) run.load_text(base_text, "model settings");
  if (!config_path.empty()) run.load(config_path);
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got \"" + kv + "\"");
    }
    run.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return run;
}

struct LoadedSample {
  PointCloud cloud;
  int label = -1;
  std::vector<int> parts;  // empty when the sample has none
  std::string source;      // manifest-relative cloud path, for messages
};

std::vector<LoadedSample> load_split(const DatasetManifest& manifest, const std::string& split_name,
                                     const RunConfig& run, bool need_parts) {
  const auto refs = manifest.split(split_name);
  if (refs.empty()) {
    throw std::runtime_error("manifest split \"" + split_name + "\" has no samples");
  }
  const std::string& norm = run.get("normalize");
  std::vector<LoadedSample> out(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const SampleRef& ref = refs[i];
    const fs::path path = manifest.resolve(ref.cloud);
    PointCloud cloud = load_cloud(path);
    if (manifest.point_count > 0 && static_cast<int>(cloud.size()) != manifest.point_count) {
      throw std::runtime_error(path.string() + ": " + std::to_string(cloud.size()) +
                               " points where the manifest declares " +
                               std::to_string(manifest.point_count));
    }
    LoadedSample s;
    s.cloud = norm == "sphere" ? normalize_unit_sphere(cloud) : std::move(cloud);
    s.label = ref.label;
    s.source = ref.cloud;
    if (!ref.parts.empty()) {
      s.parts = load_labels(manifest.resolve(ref.parts), static_cast<int>(s.cloud.size()));
    } else if (need_parts) {
      throw std::runtime_error(ref.cloud + ": sample has no part labels");
    }
    out[i] = std::move(s);
  }
  return out;
}

int class_count(const DatasetManifest& manifest, std::span<const LoadedSample> samples) {
  int count = static_cast<int>(manifest.class_names.size());
  for (const LoadedSample& s : samples) {
    if (s.label < 0) throw std::runtime_error(s.source + ": sample has no class label");
    count = std::max(count, s.label + 1);
  }
  return count;
}

/// Seeded, stratified-by-class sample selection: ceil(fraction * n) per
/// class, so even a 1% draw covers every class. Returns ascending indices.
std::vector<std::size_t> stratified_subset(std::span<const LoadedSample> samples, double fraction,
                                           std::uint64_t seed) {
  std::vector<std::size_t> picked;
  if (fraction >= 1.0) {
    picked.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) picked[i] = i;
    return picked;
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].label].push_back(i);
  std::uint64_t ordinal = 0;
  for (auto& [cls, members] : by_class) {
    std::mt19937_64 rng(seed + kStreamStep * ++ordinal);
    std::shuffle(members.begin(), members.end(), rng);
    const auto keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(members.size())));
    picked.insert(picked.end(), members.begin(),
                  members.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, keep)));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<LoadedSample> take_samples(std::vector<LoadedSample>& samples,
                                       std::span<const std::size_t> idx) {
  std::vector<LoadedSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(std::move(samples[i]));
  return out;
}

struct EncodedFeatures {
  Matrix shape;                // one row per sample (when requested)
  std::vector<Matrix> points;  // per-sample point features (when requested)
};

/// Dataset-parallel map with slot-per-sample writes; the assembled outputs
/// do not depend on the thread schedule.
EncodedFeatures compute_features(std::span<const LoadedSample> samples, const UffModel& model,
                                 bool want_shape, bool want_points) {
  const auto n = static_cast<std::int64_t>(samples.size());
  EncodedFeatures out;
  std::vector<Vector> shape_rows(want_shape ? samples.size() : 0);
  if (want_points) out.points.resize(samples.size());

  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    if (error) continue;
    try {
      const auto idx = static_cast<std::size_t>(i);
      const auto records = encode(model.encoder, samples[idx].cloud);
      if (want_shape) shape_rows[idx] = shape_feature(records, model.config.schemes);
      if (want_points) out.points[idx] = point_features(records, model.decoder, model.config);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  if (want_shape) {
    out.shape.resize(n, shape_rows[0].size());
    for (std::int64_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      if (shape_rows[idx].size() != out.shape.cols()) {
        throw std::runtime_error(samples[idx].source + ": shape feature dimension mismatch");
      }
      out.shape.row(i) = shape_rows[idx].transpose();
    }
  }
  return out;
}

/// `<artifact>.log`: the command's inputs and figures, the model
/// fingerprint, and the full resolved configuration. Deliberately free of
/// timestamps so identical runs write identical logs.
void write_log(const fs::path& artifact, const RunConfig& run, const UffModel* model,
               const KvList& entries) {
  const fs::path path = artifact.string() + ".log";
  std::ofstream log(path);
  if (!log) throw std::runtime_error("cannot write log " + path.string());
  for (const auto& [key, value] : entries) log << key << " = " << value << '\n';
  if (model) log << "model_fingerprint = " << fingerprint_hex(model_fingerprint(*model)) << '\n';
  log << "\n# resolved configuration\n" << run.echo();
}

void write_kv(const fs::path& path, const KvList& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
}

/// Two-space aligned columns; first row is the header.
std::string format_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += row[c];
      if (c + 1 < row.size()) line.append(widths[c] - row[c].size() + 2, ' ');
    }
    out << line << '\n';
  }
  return out.str();
}

std::string class_display(const DatasetManifest& manifest, int cls) {
  const auto idx = static_cast<std::size_t>(cls);
  if (cls >= 0 && idx < manifest.class_names.size() && !manifest.class_names[idx].empty()) {
    return manifest.class_names[idx];
  }
  return "class " + std::to_string(cls);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_fit(const std::string& manifest_path, const std::string& config_path,
             const std::vector<std::string>& sets, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig run = layered_config("", config_path, sets);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const PipelineConfig pc = run.pipeline(manifest.point_count);

  std::vector<LoadedSample> samples = load_split(manifest, "train", run, false);
  const auto stats_idx =
      stratified_subset(samples, run.get_double("stats_fraction"), run.get_u64("seed"));
  std::vector<PointCloud> clouds;
  clouds.reserve(stats_idx.size());
  for (std::size_t i : stats_idx) clouds.push_back(std::move(samples[i].cloud));

  UffModel model;
  model.config = pc;
  std::vector<std::vector<LayerRecord>> encoded;
  model.encoder = fit_encoder(clouds, pc, &encoded);
  model.decoder = fit_decoder(encoded, pc);
  model.run_settings = run.echo();
  save_model(model, out_path);

  KvList log{{"command", "fit"},
             {"manifest", manifest_path},
             {"train_samples", std::to_string(samples.size())},
             {"stats_samples", std::to_string(stats_idx.size())}};
  for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
    log.emplace_back("encoder_dim_" + std::to_string(l + 1),
                     std::to_string(model.encoder.layers[l].output_dim()));
  }
  for (std::size_t s = 0; s < model.decoder.steps.size(); ++s) {
    log.emplace_back("decoder_dim_" + std::to_string(s + 1),
                     std::to_string(model.decoder.steps[s].output_dim()));
  }
  write_log(out_path, run, &model, log);

  std::cout << "fitted encoder (" << model.encoder.layers.size() << " layers) and decoder ("
            << model.decoder.steps.size() << " steps) from " << stats_idx.size() << "/"
            << samples.size() << " training clouds\n";
  for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
    std::cout << "  encoder layer " << l + 1 << ": " << model.encoder.layers[l].output_dim()
              << " channels\n";
  }
  std::cout << "wrote " << out_path << " (fingerprint "
            << fingerprint_hex(model_fingerprint(model)) << ") in " << fmt(seconds_since(t0), 1)
            << " s\n";
}

void cmd_encode(const std::string& model_path, const std::string& manifest_path,
                const std::string& split, const std::string& what, const std::string& config_path,
                const std::vector<std::string>& sets, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const UffModel model = load_model(model_path);
  RunConfig run = layered_config(model.run_settings, config_path, sets);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::vector<LoadedSample> samples = load_split(manifest, split, run, false);

  KvList log{{"command", "encode"},
             {"model", model_path},
             {"manifest", manifest_path},
             {"split", split},
             {"what", what},
             {"samples", std::to_string(samples.size())}};

  if (what == "shape") {
    const EncodedFeatures feats = compute_features(samples, model, true, false);
    save_features(feats.shape, out_path);
    std::vector<int> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
    save_labels(out_path + ".labels", labels);
    log.emplace_back("feature_dim", std::to_string(feats.shape.cols()));
    write_log(out_path, run, &model, log);
    std::cout << "wrote " << feats.shape.rows() << " x " << feats.shape.cols()
              << " shape features to " << out_path << " in " << fmt(seconds_since(t0), 1)
              << " s\n";
  } else if (what == "point") {
    fs::create_directories(out_path);
    const EncodedFeatures feats = compute_features(samples, model, false, true);
    std::ofstream index(fs::path(out_path) / "index.txt");
    if (!index) throw std::runtime_error("cannot write " + out_path + "/index.txt");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "points_%05zu.ufff", i);
      save_features(feats.points[i], fs::path(out_path) / name);
      index << name << ' ' << samples[i].label << ' ' << samples[i].source << '\n';
    }
    log.emplace_back("feature_dim", std::to_string(feats.points[0].cols()));
    write_log(fs::path(out_path) / "encode", run, &model, log);
    std::cout << "wrote point features for " << samples.size() << " clouds ("
              << feats.points[0].cols() << " columns) under " << out_path << " in "
              << fmt(seconds_since(t0), 1) << " s\n";
  } else {
    throw std::invalid_argument("--what must be shape or point, not \"" + what + "\"");
  }
}

void cmd_train_cls(const std::string& model_path, const std::string& manifest_path,
                   const std::string& config_path, const std::vector<std::string>& sets,
                   const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  UffModel model = load_model(model_path);
  RunConfig run = layered_config(model.run_settings, config_path, sets);
  const DatasetManifest manifest = load_manifest(manifest_path);

  std::vector<LoadedSample> all = load_split(manifest, "train", run, false);
  const auto idx = stratified_subset(all, run.get_double("train_fraction"), run.get_u64("seed"));
  const std::vector<LoadedSample> samples = take_samples(all, idx);
  const int num_classes = class_count(manifest, samples);

  const EncodedFeatures feats = compute_features(samples, model, true, false);
  std::vector<int> labels(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;

  const std::string& head = run.get("cls_head");
  KvList log{{"command", "train-cls"},
             {"model_in", model_path},
             {"manifest", manifest_path},
             {"train_samples", std::to_string(samples.size())},
             {"classes", std::to_string(num_classes)},
             {"feature_dim", std::to_string(feats.shape.cols())}};

  if (head == "lsq" || head == "both") {
    model.cls_lsq = lsq_fit(feats.shape, labels, num_classes, run.get_double("ridge"));
    const auto pred = model.cls_lsq->predict_rows(feats.shape);
    log.emplace_back("train_oa_lsq", fmt(overall_accuracy(pred, labels)));
  }
  if (head == "rf" || head == "both") {
    model.cls_rf = rf_fit(feats.shape, labels, num_classes, run.rf_params(), run.get_u64("seed"));
    const auto pred = rf_predict_rows(*model.cls_rf, feats.shape);
    log.emplace_back("train_oa_rf", fmt(overall_accuracy(pred, labels)));
  }

  model.run_settings = run.echo();
  save_model(model, out_path);
  write_log(out_path, run, &model, log);

  std::cout << "trained " << head << " head(s) on " << samples.size() << " samples ("
            << num_classes << " classes, " << feats.shape.cols() << " features)\n";
  for (const auto& [key, value] : log) {
    if (key.rfind("train_oa_", 0) == 0) std::cout << "  " << key << " = " << value << '\n';
  }
  std::cout << "wrote " << out_path << " in " << fmt(seconds_since(t0), 1) << " s\n";
}

void cmd_eval_cls(const std::string& model_path, const std::string& manifest_path,
                  const std::string& split, const std::string& config_path,
                  const std::vector<std::string>& sets, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const UffModel model = load_model(model_path);
  if (!model.cls_lsq && !model.cls_rf) {
    throw std::runtime_error("model has no classification head; run train-cls first");
  }
  RunConfig run = layered_config(model.run_settings, config_path, sets);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::vector<LoadedSample> samples = load_split(manifest, split, run, false);

  const EncodedFeatures feats = compute_features(samples, model, true, false);
  std::vector<int> labels(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;

  KvList metrics{{"split", split}, {"samples", std::to_string(samples.size())}};
  std::vector<std::vector<std::string>> table{{"head", "overall accuracy", "correct", "total"}};
  const auto add_head = [&](const std::string& name, const std::vector<int>& pred) {
    const double oa = overall_accuracy(pred, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (pred[i] == labels[i]) ++correct;
    }
    metrics.emplace_back("oa_" + name, fmt(oa));
    table.push_back({name, fmt(oa), std::to_string(correct), std::to_string(labels.size())});
  };
  if (model.cls_lsq) add_head("lsq", model.cls_lsq->predict_rows(feats.shape));
  if (model.cls_rf) add_head("rf", rf_predict_rows(*model.cls_rf, feats.shape));

  write_kv(out_path, metrics);
  KvList log{{"command", "eval-cls"}, {"model", model_path}, {"manifest", manifest_path}};
  log.insert(log.end(), metrics.begin(), metrics.end());
  write_log(out_path, run, &model, log);

  std::cout << format_table(table) << "wrote " << out_path << " in " << fmt(seconds_since(t0), 1)
            << " s\n";
}

void cmd_train_seg(const std::string& model_path, const std::string& manifest_path,
                   const std::string& config_path, const std::vector<std::string>& sets,
                   const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  UffModel model = load_model(model_path);
  RunConfig run = layered_config(model.run_settings, config_path, sets);
  const DatasetManifest manifest = load_manifest(manifest_path);

  std::vector<LoadedSample> all = load_split(manifest, "train", run, true);
  const auto idx = stratified_subset(all, run.get_double("train_fraction"), run.get_u64("seed"));
  const std::vector<LoadedSample> samples = take_samples(all, idx);

  const EncodedFeatures feats = compute_features(samples, model, false, true);

  // Optional per-shape point subsample to bound forest training cost.
  const int per_shape = run.get_int("seg_point_sample");
  const std::uint64_t seed = run.get_u64("seed");
  std::map<int, std::vector<std::size_t>> class_samples;
  for (std::size_t i = 0; i < samples.size(); ++i) class_samples[samples[i].label].push_back(i);

  std::vector<SegTrainGroup> groups;
  KvList log{{"command", "train-seg"},
             {"model_in", model_path},
             {"manifest", manifest_path},
             {"train_samples", std::to_string(samples.size())}};

  for (const auto& [cls, members] : class_samples) {
    SegTrainGroup group;
    group.object_class = cls;
    if (const auto it = manifest.class_parts.find(cls); it != manifest.class_parts.end()) {
      group.vocabulary = it->second;
    } else {
      for (std::size_t i : members) {
        group.vocabulary.insert(group.vocabulary.end(), samples[i].parts.begin(),
                                samples[i].parts.end());
      }
      std::sort(group.vocabulary.begin(), group.vocabulary.end());
      group.vocabulary.erase(std::unique(group.vocabulary.begin(), group.vocabulary.end()),
                             group.vocabulary.end());
    }

    std::vector<std::pair<std::size_t, int>> rows;  // (sample, point)
    for (std::size_t i : members) {
      const auto n = static_cast<int>(samples[i].cloud.size());
      std::vector<int> points(static_cast<std::size_t>(n));
      for (int p = 0; p < n; ++p) points[static_cast<std::size_t>(p)] = p;
      if (per_shape > 0 && per_shape < n) {
        std::mt19937_64 rng(seed + kStreamStep * (i + 1));
        for (int p = 0; p < per_shape; ++p) {
          std::uniform_int_distribution<int> pick(p, n - 1);
          std::swap(points[static_cast<std::size_t>(p)],
                    points[static_cast<std::size_t>(pick(rng))]);
        }
        points.resize(static_cast<std::size_t>(per_shape));
        std::sort(points.begin(), points.end());
      }
      for (int p : points) rows.emplace_back(i, p);
    }

    group.features.resize(static_cast<Eigen::Index>(rows.size()), feats.points[members[0]].cols());
    group.part_labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto [i, p] = rows[r];
      group.features.row(static_cast<Eigen::Index>(r)) = feats.points[i].row(p);
      group.part_labels[r] = samples[i].parts[static_cast<std::size_t>(p)];
    }
    log.emplace_back("class_" + std::to_string(cls) + "_points", std::to_string(rows.size()));
    groups.push_back(std::move(group));
  }

  model.seg_heads = fit_segmentation_heads(groups, run.seg_rf_params(), seed);
  model.run_settings = run.echo();
  save_model(model, out_path);
  write_log(out_path, run, &model, log);

  std::cout << "trained " << model.seg_heads.size() << " segmentation head(s) from "
            << samples.size() << " shapes\n"
            << "wrote " << out_path << " in " << fmt(seconds_since(t0), 1) << " s\n";
}

void cmd_eval_seg(const std::string& model_path, const std::string& manifest_path,
                  const std::string& split, const std::string& label_mode,
                  const std::string& dump_dir, const std::string& config_path,
                  const std::vector<std::string>& sets, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const UffModel model = load_model(model_path);
  if (model.seg_heads.empty()) {
    throw std::runtime_error("model has no segmentation heads; run train-seg first");
  }
  LabelMode mode;
  if (label_mode == "predicted") {
    mode = LabelMode::Predicted;
  } else if (label_mode == "ground-truth") {
    mode = LabelMode::GroundTruth;
  } else {
    throw std::invalid_argument("--label-mode must be predicted or ground-truth");
  }

  RunConfig run = layered_config(model.run_settings, config_path, sets);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::vector<LoadedSample> samples = load_split(manifest, split, run, true);

  std::function<int(const Vector&)> classify;
  if (mode == LabelMode::Predicted) {
    if (model.cls_rf) {
      classify = [&](const Vector& f) { return rf_predict(*model.cls_rf, f); };
    } else if (model.cls_lsq) {
      classify = [&](const Vector& f) { return model.cls_lsq->predict(f); };
    } else {
      throw std::runtime_error(
          "label-mode predicted needs a classification head; run train-cls first");
    }
  }

  const EncodedFeatures feats = compute_features(samples, model, true, true);
  if (!dump_dir.empty()) fs::create_directories(dump_dir);

  std::vector<SegEvalInput> inputs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto it = manifest.class_parts.find(samples[i].label);
    if (it == manifest.class_parts.end()) {
      throw std::runtime_error("manifest has no part vocabulary for class " +
                               std::to_string(samples[i].label));
    }
    const Vector sf = feats.shape.row(static_cast<Eigen::Index>(i)).transpose();
    std::vector<int> pred =
        segment(sf, feats.points[i], classify, model.seg_heads, mode, samples[i].label);
    if (!dump_dir.empty()) {
      const std::string stem = fs::path(samples[i].source).stem().string();
      save_labels(fs::path(dump_dir) / (stem + ".pred"), pred);
    }
    inputs[i] = {samples[i].label, samples[i].parts, std::move(pred), it->second};
  }

  const MiouReport report = miou_report(inputs);

  std::vector<std::vector<std::string>> table{{"category", "shapes", "mIoU"}};
  KvList metrics{{"split", split},
                 {"label_mode", label_mode},
                 {"samples", std::to_string(samples.size())}};
  for (const auto& [cls, miou] : report.category_miou) {
    table.push_back({class_display(manifest, cls), std::to_string(report.category_counts.at(cls)),
                     fmt(miou)});
    metrics.emplace_back("category_miou_" + std::to_string(cls), fmt(miou));
  }
  table.push_back({"Cat. mIoU", "", fmt(report.cat_miou)});
  table.push_back({"Ins. mIoU", "", fmt(report.ins_miou)});
  table.push_back({"accuracy", "", fmt(report.overall_accuracy)});
  metrics.emplace_back("cat_miou", fmt(report.cat_miou));
  metrics.emplace_back("ins_miou", fmt(report.ins_miou));
  metrics.emplace_back("overall_accuracy", fmt(report.overall_accuracy));

  write_kv(out_path, metrics);
  KvList log{{"command", "eval-seg"}, {"model", model_path}, {"manifest", manifest_path}};
  log.insert(log.end(), metrics.begin(), metrics.end());
  write_log(out_path, run, &model, log);

  std::cout << format_table(table) << "wrote " << out_path << " in " << fmt(seconds_since(t0), 1)
            << " s\n";
}

void cmd_export_ply(const std::string& cloud_path, const std::string& labels_path,
                    const std::string& out_path) {
  const PointCloud cloud = load_cloud(cloud_path);
  std::vector<int> parts(cloud.size(), 0);
  if (!labels_path.empty()) parts = load_labels(labels_path, static_cast<int>(cloud.size()));
  export_ply(out_path, cloud, parts);
  std::cout << "wrote " << cloud.size() << " colored points to " << out_path << '\n';
}

void cmd_synth(const std::string& out_dir, const std::string& kind, int classes, int train_n,
               int test_n, int points, std::uint64_t seed) {
  write_synth_dataset(out_dir, kind, classes, train_n, test_n, points, seed);
  std::cout << "wrote synthetic " << kind << " dataset under " << out_dir << " (manifest "
            << (fs::path(out_dir) / "manifest.json").string() << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  apply_threads_env();

  CLI::App app{"Statistics-fitted point-cloud feature learning: encoder/decoder pipeline, "
               "classification and part-segmentation heads"};
  app.require_subcommand(1);

  std::string manifest_path, model_path, config_path, out_path, split = "test";
  std::string what = "shape", label_mode = "predicted", dump_dir, cloud_path, labels_path;
  std::string kind = "cls", train_fraction;
  std::vector<std::string> sets;
  int classes = 3, train_n = 100, test_n = 50, points = 512;
  std::uint64_t seed = 1;

  const auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value configuration file");
    cmd->add_option("--set", sets, "single configuration override, key=value")
        ->allow_extra_args(false);
  };
  // Shorthand for --set train_fraction=F; explicit --set still wins.
  const auto resolved_sets = [&] {
    std::vector<std::string> out;
    if (!train_fraction.empty()) out.push_back("train_fraction=" + train_fraction);
    out.insert(out.end(), sets.begin(), sets.end());
    return out;
  };

  CLI::App* fit = app.add_subcommand("fit", "fit the encoder/decoder pipeline on a train split");
  fit->add_option("--manifest", manifest_path, "dataset manifest (JSON)")->required();
  fit->add_option("--out", out_path, "model file to write")->required();
  add_config(fit);

  CLI::App* enc = app.add_subcommand("encode", "compute shape or point features for a split");
  enc->add_option("--model", model_path, "fitted model file")->required();
  enc->add_option("--manifest", manifest_path, "dataset manifest (JSON)")->required();
  enc->add_option("--split", split, "train, val or test (default test)");
  enc->add_option("--what", what, "shape (one row per cloud) or point (one file per cloud)");
  enc->add_option("--out", out_path, "features file (shape) or directory (point)")->required();
  add_config(enc);

  CLI::App* tcls = app.add_subcommand("train-cls", "train classification head(s) on shape features");
  tcls->add_option("--model", model_path, "fitted model file")->required();
  tcls->add_option("--manifest", manifest_path, "dataset manifest (JSON)")->required();
  tcls->add_option("--out", out_path, "model file to write")->required();
  tcls->add_option("--train-fraction", train_fraction,
                   "stratified, seeded training-set fraction in (0, 1]");
  add_config(tcls);

  CLI::App* ecls = app.add_subcommand("eval-cls", "overall accuracy of the classification head(s)");
  ecls->add_option("--model", model_path, "fitted model file")->required();
  ecls->add_option("--manifest", manifest_path, "dataset manifest (JSON)")->required();
  ecls->add_option("--split", split, "train, val or test (default test)");
  ecls->add_option("--out", out_path, "metrics file (key = value lines)")->required();
  add_config(ecls);

  CLI::App* tseg = app.add_subcommand("train-seg", "train per-class part segmentation forests");
  tseg->add_option("--model", model_path, "fitted model file")->required();
  tseg->add_option("--manifest", manifest_path, "dataset manifest (JSON)")->required();
  tseg->add_option("--out", out_path, "model file to write")->required();
  tseg->add_option("--train-fraction", train_fraction,
                   "stratified, seeded training-set fraction in (0, 1]");
  add_config(tseg);

  CLI::App* eseg = app.add_subcommand("eval-seg", "mIoU report for the segmentation heads");
  eseg->add_option("--model", model_path, "fitted model file")->required();
  eseg->add_option("--manifest", manifest_path, "dataset manifest (JSON)")->required();
  eseg->add_option("--split", split, "train, val or test (default test)");
  eseg->add_option("--label-mode", label_mode,
                   "predicted (classify first) or ground-truth (use the true object class)");
  eseg->add_option("--dump-predictions", dump_dir, "directory for per-shape .pred label files");
  eseg->add_option("--out", out_path, "metrics file (key = value lines)")->required();
  add_config(eseg);

  CLI::App* ply = app.add_subcommand("export-ply", "write a cloud as colored-by-part ASCII PLY");
  ply->add_option("--cloud", cloud_path, "point cloud file (any supported format)")->required();
  ply->add_option("--labels", labels_path, "per-point part labels, one per line");
  ply->add_option("--out", out_path, "PLY file to write")->required();

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset with a manifest");
  synth->add_option("--out", out_path, "dataset directory to create")->required();
  synth->add_option("--kind", kind, "cls (3 shape classes) or seg (2 two-part classes)");
  synth->add_option("--classes", classes, "class count for cls (2 or 3)");
  synth->add_option("--n", train_n, "training samples per class");
  synth->add_option("--test", test_n, "test samples per class");
  synth->add_option("--points", points, "points per cloud");
  synth->add_option("--seed", seed, "generator seed");

  fit->callback([&] { cmd_fit(manifest_path, config_path, resolved_sets(), out_path); });
  enc->callback([&] { cmd_encode(model_path, manifest_path, split, what, config_path,
                                 resolved_sets(), out_path); });
  tcls->callback(
      [&] { cmd_train_cls(model_path, manifest_path, config_path, resolved_sets(), out_path); });
  ecls->callback([&] { cmd_eval_cls(model_path, manifest_path, split, config_path,
                                    resolved_sets(), out_path); });
  tseg->callback(
      [&] { cmd_train_seg(model_path, manifest_path, config_path, resolved_sets(), out_path); });
  eseg->callback([&] { cmd_eval_seg(model_path, manifest_path, split, label_mode, dump_dir,
                                    config_path, resolved_sets(), out_path); });
  ply->callback([&] { cmd_export_ply(cloud_path, labels_path, out_path); });
  synth->callback([&] { cmd_synth(out_path, kind, classes, train_n, test_n, points, seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
