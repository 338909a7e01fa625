#include "motionseg/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>

#include "motionseg/error.hpp"

namespace motionseg {

void LifecycleConfig::validate() const {
  require(min_new_fraction >= 0.0 && min_new_fraction < 1.0, ErrorCode::kConfig,
          "lifecycle.min_new_fraction must lie in [0, 1)");
  require(retire_fraction >= 0.0 && retire_fraction < 1.0, ErrorCode::kConfig,
          "lifecycle.retire_fraction must lie in [0, 1)");
  require(retire_frames >= 1, ErrorCode::kConfig, "lifecycle.retire_frames must be >= 1");
  require(max_models >= 1, ErrorCode::kConfig, "lifecycle.max_models must be >= 1");
}

void PipelineConfig::validate() const {
  require(std::isfinite(focal) && focal > 0.0, ErrorCode::kConfig, "focal must be > 0");
  von_mises.validate();
  ransac.validate();
  otsu.validate();
  require(slic.region_size >= 2, ErrorCode::kConfig, "slic.region_size must be >= 2");
  require(slic.regularizer >= 0.0, ErrorCode::kConfig, "slic.regularizer must be >= 0");
  require(slic.iterations >= 1, ErrorCode::kConfig, "slic.iterations must be >= 1");
  lifecycle.validate();
  require(std::isfinite(smoothing_sigma) && smoothing_sigma >= 0.0, ErrorCode::kConfig,
          "smoothing_sigma must be >= 0");
  require(fit_stride >= 1, ErrorCode::kConfig, "fit_stride must be >= 1");
  require(background_refits >= 0, ErrorCode::kConfig, "background_refits must be >= 0");
}

namespace {

using nlohmann::json;

void check_keys(const json& object, std::string_view section,
                std::initializer_list<std::string_view> known) {
  if (!object.is_object()) {
    throw Error(ErrorCode::kConfig, std::string(section) + " must be an object");
  }
  for (const auto& [key, value] : object.items()) {
    bool found = false;
    for (const auto k : known) found = found || key == k;
    if (!found) {
      throw Error(ErrorCode::kConfig, "unknown config key " + std::string(section) + "." + key);
    }
  }
}

template <typename T>
void read(const json& object, const char* key, T& out) {
  const auto it = object.find(key);
  if (it == object.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad value for ") + key + ": " + e.what());
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  check_keys(j, "config",
             {"focal", "smoothing_sigma", "use_ransac", "fit_stride", "background_refits", "seed", "von_mises", "ransac",
              "otsu", "slic", "lifecycle"});
  read(j, "focal", c.focal);
  read(j, "smoothing_sigma", c.smoothing_sigma);
  read(j, "use_ransac", c.use_ransac);
  read(j, "fit_stride", c.fit_stride);
  read(j, "background_refits", c.background_refits);
  read(j, "seed", c.seed);
  if (j.contains("von_mises")) {
    const auto& s = j["von_mises"];
    check_keys(s, "von_mises", {"a", "b"});
    read(s, "a", c.von_mises.a);
    read(s, "b", c.von_mises.b);
  }
  if (j.contains("ransac")) {
    const auto& s = j["ransac"];
    check_keys(s, "ransac",
               {"trials", "patches_per_trial", "forced_corner_patches", "inlier_threshold",
                "corner_fraction", "pixels_per_patch"});
    read(s, "trials", c.ransac.trials);
    read(s, "patches_per_trial", c.ransac.patches_per_trial);
    read(s, "forced_corner_patches", c.ransac.forced_corner_patches);
    read(s, "inlier_threshold", c.ransac.inlier_threshold);
    read(s, "corner_fraction", c.ransac.corner_fraction);
    read(s, "pixels_per_patch", c.ransac.pixels_per_patch);
  }
  if (j.contains("otsu")) {
    const auto& s = j["otsu"];
    check_keys(s, "otsu",
               {"effectiveness_stop", "bins", "connectivity", "min_component_fraction",
                "min_component_error", "max_components"});
    read(s, "effectiveness_stop", c.otsu.effectiveness_stop);
    read(s, "bins", c.otsu.bins);
    read(s, "connectivity", c.otsu.connectivity);
    read(s, "min_component_fraction", c.otsu.min_component_fraction);
    read(s, "min_component_error", c.otsu.min_component_error);
    read(s, "max_components", c.otsu.max_components);
  }
  if (j.contains("slic")) {
    const auto& s = j["slic"];
    check_keys(s, "slic", {"region_size", "regularizer", "iterations"});
    read(s, "region_size", c.slic.region_size);
    read(s, "regularizer", c.slic.regularizer);
    read(s, "iterations", c.slic.iterations);
  }
  if (j.contains("lifecycle")) {
    const auto& s = j["lifecycle"];
    check_keys(s, "lifecycle", {"min_new_fraction", "retire_fraction", "retire_frames", "max_models"});
    read(s, "min_new_fraction", c.lifecycle.min_new_fraction);
    read(s, "retire_fraction", c.lifecycle.retire_fraction);
    read(s, "retire_frames", c.lifecycle.retire_frames);
    read(s, "max_models", c.lifecycle.max_models);
  }
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  return {
      {"focal", c.focal},
      {"smoothing_sigma", c.smoothing_sigma},
      {"use_ransac", c.use_ransac},
      {"fit_stride", c.fit_stride},
      {"background_refits", c.background_refits},
      {"seed", c.seed},
      {"von_mises", {{"a", c.von_mises.a}, {"b", c.von_mises.b}}},
      {"ransac",
       {{"trials", c.ransac.trials},
        {"patches_per_trial", c.ransac.patches_per_trial},
        {"forced_corner_patches", c.ransac.forced_corner_patches},
        {"inlier_threshold", c.ransac.inlier_threshold},
        {"corner_fraction", c.ransac.corner_fraction},
        {"pixels_per_patch", c.ransac.pixels_per_patch}}},
      {"otsu",
       {{"effectiveness_stop", c.otsu.effectiveness_stop},
        {"bins", c.otsu.bins},
        {"connectivity", c.otsu.connectivity},
        {"min_component_fraction", c.otsu.min_component_fraction},
        {"min_component_error", c.otsu.min_component_error},
        {"max_components", c.otsu.max_components}}},
      {"slic",
       {{"region_size", c.slic.region_size},
        {"regularizer", c.slic.regularizer},
        {"iterations", c.slic.iterations}}},
      {"lifecycle",
       {{"min_new_fraction", c.lifecycle.min_new_fraction},
        {"retire_fraction", c.lifecycle.retire_fraction},
        {"retire_frames", c.lifecycle.retire_frames},
        {"max_models", c.lifecycle.max_models}}},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace motionseg
