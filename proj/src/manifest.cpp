#include "uff/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace uff {

namespace {

using nlohmann::json;

std::vector<SampleRef> parse_split(const json& j, const std::string& name) {
  std::vector<SampleRef> out;
  if (!j.contains(name)) return out;
  const json& arr = j.at(name);
  if (!arr.is_array()) throw std::runtime_error("manifest: \"" + name + "\" must be an array");
  for (const json& e : arr) {
    SampleRef s;
    s.cloud = e.at("cloud").get<std::string>();
    s.label = e.at("label").get<int>();
    if (e.contains("parts")) s.parts = e.at("parts").get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

json dump_split(std::span<const SampleRef> samples) {
  json arr = json::array();
  for (const SampleRef& s : samples) {
    json e{{"cloud", s.cloud}, {"label", s.label}};
    if (!s.parts.empty()) e["parts"] = s.parts;
    arr.push_back(std::move(e));
  }
  return arr;
}

}  // namespace

std::filesystem::path DatasetManifest::resolve(const std::string& rel) const {
  const std::filesystem::path p(rel);
  return p.is_absolute() ? p : root / p;
}

std::span<const SampleRef> DatasetManifest::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split \"" + name + "\" (train, val, test)");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }

  DatasetManifest m;
  m.root = path.parent_path();
  if (j.contains("root")) m.root = m.root / j.at("root").get<std::string>();
  if (j.contains("point_count")) m.point_count = j.at("point_count").get<int>();
  if (j.contains("class_names")) {
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
  }
  if (j.contains("class_parts")) {
    for (const auto& [key, value] : j.at("class_parts").items()) {
      m.class_parts[std::stoi(key)] = value.get<std::vector<int>>();
    }
  }
  try {
    m.train = parse_split(j, "train");
    m.val = parse_split(j, "val");
    m.test = parse_split(j, "test");
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (m.train.empty() && m.val.empty() && m.test.empty()) {
    throw std::runtime_error(path.string() + ": no samples in any split");
  }

  for (const auto* split : {&m.train, &m.val, &m.test}) {
    for (const SampleRef& s : *split) {
      if (!std::filesystem::exists(m.resolve(s.cloud))) {
        throw std::runtime_error(path.string() + ": missing cloud file " +
                                 m.resolve(s.cloud).string());
      }
      if (!s.parts.empty() && !std::filesystem::exists(m.resolve(s.parts))) {
        throw std::runtime_error(path.string() + ": missing parts file " +
                                 m.resolve(s.parts).string());
      }
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json j;
  if (manifest.point_count > 0) j["point_count"] = manifest.point_count;
  if (!manifest.class_names.empty()) j["class_names"] = manifest.class_names;
  if (!manifest.class_parts.empty()) {
    json parts = json::object();
    for (const auto& [cls, vocab] : manifest.class_parts) {
      parts[std::to_string(cls)] = vocab;
    }
    j["class_parts"] = std::move(parts);
  }
  if (!manifest.train.empty()) j["train"] = dump_split(manifest.train);
  if (!manifest.val.empty()) j["val"] = dump_split(manifest.val);
  if (!manifest.test.empty()) j["test"] = dump_split(manifest.test);

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace uff
