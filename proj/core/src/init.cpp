#include "motionseg/init.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

#include <opencv2/imgproc.hpp>

namespace motionseg {

void RansacConfig::validate() const {
  require(trials >= 1, ErrorCode::kConfig, "ransac.trials must be >= 1");
  require(patches_per_trial >= 1, ErrorCode::kConfig, "ransac.patches_per_trial must be >= 1");
  require(forced_corner_patches >= 0 &&
              forced_corner_patches <= std::min(4, patches_per_trial),
          ErrorCode::kConfig, "ransac.forced_corner_patches must be <= min(4, patches_per_trial)");
  require(inlier_threshold > 0.0, ErrorCode::kConfig, "ransac.inlier_threshold must be > 0");
  require(corner_fraction > 0.0 && corner_fraction <= 1.0, ErrorCode::kConfig,
          "ransac.corner_fraction must lie in (0, 1]");
  require(pixels_per_patch >= 1, ErrorCode::kConfig, "ransac.pixels_per_patch must be >= 1");
}

void OtsuConfig::validate() const {
  require(effectiveness_stop > 0.0 && effectiveness_stop < 1.0, ErrorCode::kConfig,
          "otsu.effectiveness_stop must lie in (0, 1)");
  require(bins >= 2, ErrorCode::kConfig, "otsu.bins must be >= 2");
  require(connectivity == 4 || connectivity == 8, ErrorCode::kConfig,
          "otsu.connectivity must be 4 or 8");
  require(min_component_fraction >= 0.0 && min_component_fraction < 1.0, ErrorCode::kConfig,
          "otsu.min_component_fraction must lie in [0, 1)");
  require(min_component_error >= 0.0, ErrorCode::kConfig, "otsu.min_component_error must be >= 0");
  require(max_components >= 0, ErrorCode::kConfig, "otsu.max_components must be >= 0");
}

namespace {

int uniform_index(std::mt19937_64& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

// Evenly strided subsample of one superpixel's pixels.
std::vector<std::size_t> patch_sample(const std::vector<std::size_t>& pixels, int limit) {
  const std::size_t count = pixels.size();
  const auto take = std::min<std::size_t>(count, static_cast<std::size_t>(limit));
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t k = 0; k < take; ++k) out.push_back(pixels[k * count / take]);
  return out;
}

}  // namespace

RansacResult constrained_ransac(const FlowField& flow, const SuperpixelMap& superpixels,
                                const CameraIntrinsics& intrinsics, const RansacConfig& config) {
  config.validate();
  flow.validate();
  if (!superpixels.labels.same_shape(flow.u)) {
    throw Error(ErrorCode::kDimensionMismatch, "superpixel map and flow differ in size");
  }
  const int count = superpixels.count();
  require(count > 0, ErrorCode::kPrecondition, "no superpixels");

  const auto corners = corner_superpixels_or_nearest(superpixels, config.corner_fraction);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < superpixels.labels.size(); ++i) {
    members[static_cast<std::size_t>(superpixels.labels[i])].push_back(i);
  }
  std::vector<std::vector<std::size_t>> samples(static_cast<std::size_t>(count));
  for (int id = 0; id < count; ++id) {
    samples[static_cast<std::size_t>(id)] =
        patch_sample(members[static_cast<std::size_t>(id)], config.pixels_per_patch);
  }

  const MotionScorer scorer(flow, intrinsics);
  std::mt19937_64 rng(config.seed);

  RansacResult best;
  best.outliers = std::numeric_limits<std::size_t>::max();
  std::vector<int> chosen;
  std::vector<std::size_t> indices;
  std::vector<char> used(static_cast<std::size_t>(count));

  for (int trial = 0; trial < config.trials; ++trial) {
    chosen.clear();
    std::fill(used.begin(), used.end(), 0);

    std::array<int, 4> corner_order = {0, 1, 2, 3};
    for (int k = 0; k < config.forced_corner_patches; ++k) {
      std::swap(corner_order[static_cast<std::size_t>(k)],
                corner_order[static_cast<std::size_t>(k + uniform_index(rng, 4 - k))]);
      const auto& candidates = corners[static_cast<std::size_t>(corner_order[static_cast<std::size_t>(k)])];
      const int id = candidates[static_cast<std::size_t>(
          uniform_index(rng, static_cast<int>(candidates.size())))];
      if (!used[static_cast<std::size_t>(id)]) {
        used[static_cast<std::size_t>(id)] = 1;
        chosen.push_back(id);
      }
    }
    const int wanted = std::min(config.patches_per_trial, count);
    while (static_cast<int>(chosen.size()) < wanted) {
      const int id = uniform_index(rng, count);
      if (used[static_cast<std::size_t>(id)]) continue;
      used[static_cast<std::size_t>(id)] = 1;
      chosen.push_back(id);
    }

    indices.clear();
    for (const int id : chosen) {
      const auto& s = samples[static_cast<std::size_t>(id)];
      indices.insert(indices.end(), s.begin(), s.end());
    }
    const auto pixels = WeightedPixelSet::from_indices(flow, intrinsics, indices);

    MotionFit fit;
    try {
      fit = estimate_motion(pixels, intrinsics);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateFlow) throw;
      ++best.skipped_trials;
      continue;
    }

    const auto [forward, backward] =
        scorer.count_outliers_both_signs(fit.motion, config.inlier_threshold, best.outliers);
    std::size_t outliers = forward;
    if (backward < forward) {
      fit.motion.translation = -fit.motion.translation;
      outliers = backward;
    }
    // Earlier trials win ties, so strict comparison.
    if (best.best_trial < 0 ||
        std::tie(outliers, fit.residual) < std::tie(best.outliers, best.fit.residual)) {
      best.fit = fit;
      best.outliers = outliers;
      best.best_trial = trial;
      best.patches = chosen;
    }
  }
  if (best.best_trial < 0) {
    throw Error(ErrorCode::kInitFailure, "every RANSAC trial was degenerate");
  }
  return best;
}

OtsuResult otsu_from_histogram(std::span<const double> counts) {
  const std::size_t bins = counts.size();
  require(bins >= 2, ErrorCode::kPrecondition, "histogram needs >= 2 bins");
  double total = 0.0;
  double first_moment = 0.0;
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < bins; ++i) {
    require(counts[i] >= 0.0, ErrorCode::kPrecondition, "negative histogram count");
    total += counts[i];
    first_moment += static_cast<double>(i) * counts[i];
    occupied += counts[i] > 0.0;
  }
  OtsuResult result;
  if (occupied < 2) {
    result.degenerate = true;
    return result;
  }
  const double mean = first_moment / total;
  double total_variance = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double d = static_cast<double>(i) - mean;
    total_variance += counts[i] * d * d;
  }
  total_variance /= total;

  double lower_count = 0.0;
  double lower_moment = 0.0;
  double best = -1.0;
  for (std::size_t t = 1; t < bins; ++t) {
    lower_count += counts[t - 1];
    lower_moment += static_cast<double>(t - 1) * counts[t - 1];
    const double upper_count = total - lower_count;
    if (lower_count <= 0.0 || upper_count <= 0.0) continue;
    const double lower_mean = lower_moment / lower_count;
    const double upper_mean = (first_moment - lower_moment) / upper_count;
    const double gap = lower_mean - upper_mean;
    const double between = (lower_count / total) * (upper_count / total) * gap * gap;
    if (between > best) {
      best = between;
      result.bin = static_cast<int>(t);
    }
  }
  result.effectiveness = std::clamp(best / total_variance, 0.0, 1.0);
  return result;
}

int histogram_bin(double value, double max_value, int bins) {
  if (max_value <= 0.0) return 0;
  const auto bin = static_cast<int>(std::floor(value / max_value * bins));
  return std::clamp(bin, 0, bins - 1);
}

OtsuResult otsu_threshold(std::span<const double> values, int bins) {
  require(bins >= 2, ErrorCode::kPrecondition, "need >= 2 bins");
  double max_value = 0.0;
  for (const double v : values) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::kPrecondition,
            "values must be finite and non-negative");
    max_value = std::max(max_value, v);
  }
  std::vector<double> histogram(static_cast<std::size_t>(bins), 0.0);
  for (const double v : values) {
    histogram[static_cast<std::size_t>(histogram_bin(v, max_value, bins))] += 1.0;
  }
  OtsuResult result = otsu_from_histogram(histogram);
  result.threshold = result.degenerate ? max_value : result.bin * max_value / bins;
  return result;
}

Grid<int> extract_components(const Grid<double>& error_image, const OtsuConfig& config) {
  config.validate();
  for (const double e : error_image) {
    require(std::isfinite(e) && e >= 0.0, ErrorCode::kPrecondition,
            "error image must be finite and non-negative");
  }
  const int w = error_image.width();
  const int h = error_image.height();
  Grid<int> labels(w, h, 0);
  std::vector<char> remaining(error_image.size(), 1);
  const auto min_size = static_cast<int>(
      std::ceil(config.min_component_fraction * static_cast<double>(error_image.size())));

  std::vector<double> values;
  cv::Mat high(h, w, CV_8UC1);
  cv::Mat components;
  int next_label = 1;
  while (next_label <= config.max_components) {
    values.clear();
    double max_value = 0.0;
    for (std::size_t i = 0; i < error_image.size(); ++i) {
      if (!remaining[i]) continue;
      values.push_back(error_image[i]);
      max_value = std::max(max_value, error_image[i]);
    }
    if (values.empty()) break;
    const OtsuResult otsu = otsu_threshold(values, config.bins);
    if (otsu.degenerate || otsu.effectiveness < config.effectiveness_stop) break;

    high.setTo(0);
    for (int y = 0; y < h; ++y) {
      auto* row = high.ptr<std::uint8_t>(y);
      for (int x = 0; x < w; ++x) {
        const std::size_t i = error_image.index(x, y);
        if (remaining[i] && histogram_bin(error_image[i], max_value, config.bins) >= otsu.bin) {
          row[x] = 1;
        }
      }
    }
    const int n = cv::connectedComponents(high, components, config.connectivity, CV_32S);
    std::vector<double> sums(static_cast<std::size_t>(n), 0.0);
    std::vector<int> sizes(static_cast<std::size_t>(n), 0);
    for (int y = 0; y < h; ++y) {
      const int* row = components.ptr<int>(y);
      for (int x = 0; x < w; ++x) {
        if (row[x] == 0) continue;
        sums[static_cast<std::size_t>(row[x])] += error_image(x, y);
        ++sizes[static_cast<std::size_t>(row[x])];
      }
    }
    int best = 0;
    double best_mean = -1.0;
    for (int c = 1; c < n; ++c) {
      if (sizes[static_cast<std::size_t>(c)] < min_size) continue;
      const double mean = sums[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)];
      if (mean > best_mean) {
        best_mean = mean;
        best = c;
      }
    }
    if (best == 0) {
      // Only speckle above threshold: it stays background.
      for (int y = 0; y < h; ++y) {
        const int* row = components.ptr<int>(y);
        for (int x = 0; x < w; ++x) {
          if (row[x] != 0) remaining[error_image.index(x, y)] = 0;
        }
      }
      continue;
    }
    if (best_mean <= config.min_component_error) break;
    for (int y = 0; y < h; ++y) {
      const int* row = components.ptr<int>(y);
      for (int x = 0; x < w; ++x) {
        if (row[x] != best) continue;
        labels(x, y) = next_label;
        remaining[error_image.index(x, y)] = 0;
      }
    }
    ++next_label;
  }
  return labels;
}

}  // namespace motionseg
