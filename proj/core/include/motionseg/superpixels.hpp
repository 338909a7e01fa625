#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <opencv2/core/mat.hpp>

#include "motionseg/flow_io.hpp"
#include "motionseg/grid.hpp"

namespace motionseg {

// Multi-channel float image in the feature space SLIC clusters in.
struct FeatureImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;  // interleaved, row-major

  const float* pixel(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
};

// CIELAB features (L in [0, 100]) from an 8-bit BGR or grayscale frame.
FeatureImage lab_features(const cv::Mat& frame);

// Flow magnitude rescaled to [0, 100], for flow-only input.
FeatureImage flow_magnitude_features(const FlowField& flow);

struct SlicParams {
  int region_size = 20;
  double regularizer = 0.5;
  int iterations = 10;
};

struct SuperpixelMap {
  Grid<int> labels;
  std::vector<Eigen::Vector2d> centroids;  // (x, y) in pixels
  std::vector<int> counts;

  int count() const noexcept { return static_cast<int>(counts.size()); }
  std::vector<std::size_t> pixels_of(int id) const;
};

// SLIC k-means in (feature, xy) space with compactness
// m = regularizer * region_size, seeded on the region_size grid, followed by
// absorption of disconnected fragments into their largest neighbour.
SuperpixelMap slic(const FeatureImage& image, const SlicParams& params = {});

// Superpixels whose centroid falls in each corner rectangle of area
// corner_fraction * image area (same aspect as the image). Order: top-left,
// top-right, bottom-left, bottom-right. Throws kEmptyCorner when a rectangle
// holds no centroid.
std::array<std::vector<int>, 4> corner_superpixels(const SuperpixelMap& map,
                                                   double corner_fraction = 0.04);

// As corner_superpixels, but an empty corner falls back to the superpixel
// whose centroid is nearest to the corner point.
std::array<std::vector<int>, 4> corner_superpixels_or_nearest(const SuperpixelMap& map,
                                                              double corner_fraction = 0.04);

}  // namespace motionseg
