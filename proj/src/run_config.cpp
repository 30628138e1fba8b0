#include "uff/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace uff {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw std::invalid_argument("config: " + key + " = \"" + value + "\": expected " + want);
}

// Single value broadcast to n entries, or a comma list of exactly n.
std::vector<int> int_list(const std::string& key, const std::string& value, int n) {
  const auto parts = split_commas(value);
  std::vector<int> out;
  for (const std::string& p : parts) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(p, &used);
      if (used != p.size()) throw std::invalid_argument(p);
      out.push_back(v);
    } catch (const std::exception&) {
      bad_value(key, value, "an integer or comma-separated integers");
    }
  }
  if (out.size() == 1) out.assign(static_cast<std::size_t>(n), out[0]);
  if (out.size() != static_cast<std::size_t>(n)) {
    bad_value(key, value, std::to_string(n) + " values");
  }
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  values_ = {
      {"layers", "4"},
      {"schedule", "auto"},         // auto: N, N/2, N/4, ... from the manifest point count
      {"encoder_k", "32"},
      {"decoder_k", "8"},
      {"keep_threshold", "0.999"},
      {"keep_cap", "64"},
      {"aggregations", "mean,l1,l2,linf"},
      {"normalize", "sphere"},
      {"seed", "1"},
      {"stats_fraction", "1.0"},    // fraction of training clouds used for fitting statistics
      {"train_fraction", "1.0"},    // stratified fraction of training data for classifier heads
      {"ridge", "1e-6"},
      {"cls_head", "both"},         // lsq | rf | both
      {"rf_trees", "100"},
      {"rf_max_features", "0"},     // 0 = ceil(sqrt(D))
      {"rf_min_leaf", "1"},
      {"seg_rf_trees", "100"},
      {"seg_rf_max_features", "0"},
      {"seg_rf_min_leaf", "1"},
      {"seg_point_sample", "0"},    // training points kept per shape for the heads; 0 = all
  };
}

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  load_text(text.str(), path.string());
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ": line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("config: unknown key \"" + key + "\"");
  }
  if (value.empty()) throw std::invalid_argument("config: empty value for \"" + key + "\"");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("config: unknown key \"" + key + "\"");
  }
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    bad_value(key, v, "an integer");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const unsigned long long out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
}

PipelineConfig RunConfig::pipeline(int declared_points) const {
  PipelineConfig c;
  c.num_layers = get_int("layers");
  if (c.num_layers < 2) throw std::invalid_argument("config: layers must be >= 2");

  const std::string& sched = get("schedule");
  if (sched == "auto") {
    if (declared_points < 1) {
      throw std::invalid_argument(
          "config: schedule = auto needs a manifest with a positive point_count");
    }
    c.points_per_layer.resize(static_cast<std::size_t>(c.num_layers));
    for (int l = 0; l < c.num_layers; ++l) {
      c.points_per_layer[static_cast<std::size_t>(l)] = std::max(1, declared_points >> l);
    }
  } else {
    c.points_per_layer = int_list("schedule", sched, c.num_layers);
  }

  c.encoder_k = int_list("encoder_k", get("encoder_k"), c.num_layers);
  c.decoder_k = int_list("decoder_k", get("decoder_k"), c.num_layers - 1);

  KeepPolicy kp;
  kp.mode = KeepPolicy::Mode::Energy;
  kp.threshold = get_double("keep_threshold");
  kp.max_dim = get_int("keep_cap");
  c.encoder_keep.assign(static_cast<std::size_t>(c.num_layers), kp);
  c.decoder_keep.assign(static_cast<std::size_t>(c.num_layers - 1), kp);

  c.schemes.clear();
  for (const std::string& name : split_commas(get("aggregations"))) {
    if (name == "mean") {
      c.schemes.push_back(AggScheme::Mean);
    } else if (name == "l1") {
      c.schemes.push_back(AggScheme::L1);
    } else if (name == "l2") {
      c.schemes.push_back(AggScheme::L2);
    } else if (name == "linf") {
      c.schemes.push_back(AggScheme::Linf);
    } else {
      bad_value("aggregations", get("aggregations"), "names from mean,l1,l2,linf");
    }
  }

  const std::string& norm = get("normalize");
  if (norm != "sphere" && norm != "none") {
    bad_value("normalize", norm, "sphere or none");
  }
  const double stats_fraction = get_double("stats_fraction");
  if (!(stats_fraction > 0.0 && stats_fraction <= 1.0)) {
    bad_value("stats_fraction", get("stats_fraction"), "a fraction in (0, 1]");
  }
  const double train_fraction = get_double("train_fraction");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    bad_value("train_fraction", get("train_fraction"), "a fraction in (0, 1]");
  }
  const std::string& head = get("cls_head");
  if (head != "lsq" && head != "rf" && head != "both") {
    bad_value("cls_head", head, "lsq, rf or both");
  }

  c.validate();
  return c;
}

RfParams RunConfig::rf_params() const {
  RfParams p;
  p.trees = get_int("rf_trees");
  p.max_features = get_int("rf_max_features");
  p.min_leaf = get_int("rf_min_leaf");
  return p;
}

RfParams RunConfig::seg_rf_params() const {
  RfParams p;
  p.trees = get_int("seg_rf_trees");
  p.max_features = get_int("seg_rf_max_features");
  p.min_leaf = get_int("seg_rf_min_leaf");
  return p;
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
  return out.str();
}

}  // namespace uff
