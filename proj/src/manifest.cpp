// manifest.cpp -- JSON (de)serialization of dataset manifests

#include <set>
#include <string>

#include "json.hpp"

#include "bdcl/dataset.hpp"

namespace bdcl {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("manifest: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

DatasetManifest parse_manifest_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("manifest: top level must be an object");
  reject_unknown_keys(
      j, {"name", "n", "k", "views", "labels_file", "normalization", "seed"},
      "manifest");

  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.n = j.at("n").get<Index>();
    m.k = j.at("k").get<Index>();
    m.normalization = j.at("normalization").get<std::string>();
    if (j.contains("labels_file") && !j["labels_file"].is_null())
      m.labels_file = j["labels_file"].get<std::string>();
    if (j.contains("seed") && !j["seed"].is_null())
      m.seed = j["seed"].get<std::uint64_t>();
    for (const auto& jv : j.at("views")) {
      if (!jv.is_object())
        throw ConfigError("manifest: each view entry must be an object");
      reject_unknown_keys(jv, {"file", "dim"}, "views[]");
      m.views.push_back(
          {jv.at("file").get<std::string>(), jv.at("dim").get<Index>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }

  if (m.name.empty()) throw ConfigError("manifest: name must be non-empty");
  if (m.n < 1) throw ConfigError("manifest: n must be >= 1");
  if (m.k < 1) throw ConfigError("manifest: k must be >= 1");
  if (m.views.empty()) throw ConfigError("manifest: need at least one view");
  if (m.normalization != "none" && m.normalization != "minmax" &&
      m.normalization != "zscore")
    throw ConfigError("manifest: normalization must be none|minmax|zscore");
  for (const auto& v : m.views) {
    if (v.file.empty()) throw ConfigError("manifest: view file must be non-empty");
    if (v.dim < 1) throw ConfigError("manifest: view dim must be >= 1");
  }
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  j["n"] = m.n;
  j["k"] = m.k;
  json views = json::array();
  for (const auto& v : m.views) views.push_back({{"file", v.file}, {"dim", v.dim}});
  j["views"] = std::move(views);
  j["labels_file"] = m.labels_file ? json(*m.labels_file) : json(nullptr);
  j["normalization"] = m.normalization;
  j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  return j.dump(2);
}

}  // namespace bdcl
