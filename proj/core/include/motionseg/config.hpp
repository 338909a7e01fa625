#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "motionseg/inference.hpp"
#include "motionseg/init.hpp"
#include "motionseg/superpixels.hpp"

namespace motionseg {

// When motion components are created and dropped.
struct LifecycleConfig {
  // New-motion regions at least this fraction of the image become models.
  double min_new_fraction = 0.001;
  // Models whose posterior mass stays below this fraction of the image for
  // retire_frames consecutive frames are dropped.
  double retire_fraction = 0.0005;
  int retire_frames = 2;
  // Upper bound on k, background included.
  int max_models = 8;

  void validate() const;
};

struct PipelineConfig {
  double focal = 1.0;
  VonMisesParams von_mises;
  RansacConfig ransac;
  OtsuConfig otsu;
  SlicParams slic;
  LifecycleConfig lifecycle;
  double smoothing_sigma = 10.0;
  // false: the first frame's background is fit to every pixel.
  bool use_ransac = true;
  // Pixel stride of the background and object fits after the first frame.
  int fit_stride = 2;
  // Rounds of dropping background pixels with MBH error above the inlier
  // threshold and refitting, after the first frame.
  int background_refits = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

// Keys missing from the JSON keep their defaults; unknown keys throw kConfig.
PipelineConfig config_from_json(const nlohmann::json& json);
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace motionseg
