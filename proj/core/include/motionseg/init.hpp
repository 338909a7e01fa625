#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "motionseg/egomotion.hpp"
#include "motionseg/superpixels.hpp"

namespace motionseg {

struct RansacConfig {
  int trials = 5000;
  int patches_per_trial = 10;
  int forced_corner_patches = 3;
  double inlier_threshold = 0.1;
  double corner_fraction = 0.04;
  // Pixels drawn from each sampled superpixel (evenly strided).
  int pixels_per_patch = 24;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RansacResult {
  MotionFit fit;
  std::size_t outliers = 0;
  int best_trial = -1;
  int skipped_trials = 0;
  std::vector<int> patches;  // superpixel ids of the winning sample
};

// Robust background motion: every trial fits estimate_motion to 3 superpixels
// from 3 distinct corners plus uniformly drawn others, scores the whole frame
// by MBH outlier count (both translation signs), and keeps the minimum by
// (outliers, residual, trial index). Throws kInitFailure if every trial is
// degenerate.
RansacResult constrained_ransac(const FlowField& flow, const SuperpixelMap& superpixels,
                                const CameraIntrinsics& intrinsics, const RansacConfig& config);

struct OtsuResult {
  double threshold = 0.0;   // values >= threshold form the upper class
  double effectiveness = 0.0;  // between-class / total variance
  int bin = 0;              // first histogram bin of the upper class
  bool degenerate = false;  // all values equal
};

// Otsu over a histogram of bin counts with unit-spaced bin centres.
OtsuResult otsu_from_histogram(std::span<const double> counts);

// Histogram of `bins` equal bins over [0, max(values)], then Otsu.
OtsuResult otsu_threshold(std::span<const double> values, int bins = 256);

// Bin of `value` in a histogram of `bins` bins over [0, max_value].
int histogram_bin(double value, double max_value, int bins);

struct OtsuConfig {
  double effectiveness_stop = 0.6;
  int bins = 256;
  int connectivity = 8;
  // Components smaller than this fraction of the image go back to background.
  double min_component_fraction = 0.001;
  // Components whose mean error does not exceed this are background inliers.
  double min_component_error = 0.1;
  int max_components = 8;

  void validate() const;
};

// Iterative Otsu split of an error image: each round thresholds the pixels
// still unassigned, takes the high-error connected component with the largest
// mean error as the next object label, and removes it. Stops once the Otsu
// effectiveness drops below effectiveness_stop. Label 0 is background.
Grid<int> extract_components(const Grid<double>& error_image, const OtsuConfig& config);

}  // namespace motionseg
