#include <algorithm>
#include <queue>
#include <random>
#include <set>

#include <gtest/gtest.h>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "motionseg/error.hpp"
#include "motionseg/superpixels.hpp"

using namespace motionseg;

namespace {

cv::Mat uniform_frame(int w, int h) { return cv::Mat(h, w, CV_8UC3, cv::Scalar(90, 140, 60)); }

cv::Mat two_tone(int w, int h, int boundary) {
  cv::Mat img(h, w, CV_8UC3, cv::Scalar(20, 20, 200));
  img.colRange(boundary, w).setTo(cv::Scalar(200, 220, 30));
  return img;
}

cv::Mat noisy_frame(int w, int h, std::uint64_t seed) {
  cv::Mat img(h, w, CV_8UC3);
  cv::RNG rng(seed);
  rng.fill(img, cv::RNG::UNIFORM, 0, 256);
  return img;
}

bool four_connected(const Grid<int>& labels, int id) {
  std::size_t start = labels.size();
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == id) {
      if (start == labels.size()) start = i;
      ++total;
    }
  }
  if (total == 0) return false;
  std::vector<std::uint8_t> seen(labels.size(), 0);
  std::queue<std::size_t> queue;
  queue.push(start);
  seen[start] = 1;
  std::size_t reached = 0;
  const int w = labels.width();
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop();
    ++reached;
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (!labels.contains(nx, ny)) continue;
      const std::size_t j = labels.index(nx, ny);
      if (!seen[j] && labels[j] == id) {
        seen[j] = 1;
        queue.push(j);
      }
    }
  }
  return reached == total;
}

void expect_valid_map(const SuperpixelMap& map) {
  ASSERT_GT(map.count(), 0);
  ASSERT_EQ(map.centroids.size(), map.counts.size());
  std::vector<int> counted(static_cast<std::size_t>(map.count()), 0);
  for (int label : map.labels) {
    ASSERT_GE(label, 0);
    ASSERT_LT(label, map.count());
    ++counted[static_cast<std::size_t>(label)];
  }
  EXPECT_EQ(counted, map.counts);
  for (int id = 0; id < map.count(); ++id) {
    EXPECT_GT(map.counts[static_cast<std::size_t>(id)], 0);
    EXPECT_TRUE(four_connected(map.labels, id)) << "superpixel " << id;
  }
}

SuperpixelMap grid_map(int w, int h, int cell) {
  SuperpixelMap map;
  map.labels = Grid<int>(w, h, 0);
  const int cols = w / cell;
  const int rows = h / cell;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) map.labels(x, y) = (y / cell) * cols + x / cell;
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      map.centroids.emplace_back(c * cell + 0.5 * (cell - 1), r * cell + 0.5 * (cell - 1));
      map.counts.push_back(cell * cell);
    }
  }
  return map;
}

}  // namespace

TEST(Slic, UniformImageGivesRegularGrid) {
  const auto map = slic(lab_features(uniform_frame(100, 100)));
  expect_valid_map(map);
  EXPECT_EQ(map.count(), 25);
  for (int c : map.counts) {
    EXPECT_GE(c, 200);
    EXPECT_LE(c, 600);
  }
}

TEST(Slic, FollowsHardColourEdge) {
  const int boundary = 47;
  const auto map = slic(lab_features(two_tone(100, 80, boundary)));
  expect_valid_map(map);
  int aligned = 0;
  for (int y = 0; y < 80; ++y) {
    if (map.labels(boundary - 1, y) != map.labels(boundary, y)) ++aligned;
  }
  EXPECT_GE(aligned, static_cast<int>(0.95 * 80));
  // No superpixel has pixels on both sides.
  for (int id = 0; id < map.count(); ++id) {
    bool left = false, right = false;
    for (int y = 0; y < 80; ++y) {
      for (int x = 0; x < 100; ++x) {
        if (map.labels(x, y) != id) continue;
        (x < boundary ? left : right) = true;
      }
    }
    EXPECT_FALSE(left && right) << "superpixel " << id;
  }
}

TEST(Slic, SmallImageCount) {
  const auto map = slic(lab_features(noisy_frame(40, 40, 1)));
  expect_valid_map(map);
  EXPECT_GE(map.count(), 3);
  EXPECT_LE(map.count(), 6);
}

TEST(Slic, PartitionConnectivityDeterminism) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto frame = noisy_frame(73, 51, seed);
    cv::Mat smooth;
    cv::blur(frame, smooth, cv::Size(9, 9));
    const auto a = slic(lab_features(smooth));
    const auto b = slic(lab_features(smooth));
    expect_valid_map(a);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.counts, b.counts);
  }
}

TEST(Slic, GrayscaleAndFlowFeatures) {
  cv::Mat gray(30, 50, CV_8UC1, cv::Scalar(10));
  gray.colRange(25, 50).setTo(cv::Scalar(240));
  expect_valid_map(slic(lab_features(gray), {10, 0.5, 10}));

  FlowField flow(50, 30);
  for (int y = 0; y < 30; ++y) {
    for (int x = 30; x < 50; ++x) flow.u(x, y) = 2.0;
  }
  const auto features = flow_magnitude_features(flow);
  EXPECT_EQ(features.channels, 1);
  EXPECT_FLOAT_EQ(*features.pixel(40, 10), 100.0f);
  EXPECT_FLOAT_EQ(*features.pixel(5, 10), 0.0f);
  expect_valid_map(slic(features, {10, 0.5, 10}));
}

TEST(Slic, RejectsBadFrames) {
  EXPECT_THROW(lab_features(cv::Mat()), Error);
  EXPECT_THROW(lab_features(cv::Mat(4, 4, CV_16UC1, cv::Scalar(0))), Error);
}

TEST(Corners, RegularGridOneEach) {
  const auto map = grid_map(100, 100, 20);
  const auto corners = corner_superpixels(map, 0.04);
  EXPECT_EQ(corners[0], std::vector<int>{0});
  EXPECT_EQ(corners[1], std::vector<int>{4});
  EXPECT_EQ(corners[2], std::vector<int>{20});
  EXPECT_EQ(corners[3], std::vector<int>{24});
}

TEST(Corners, FullFractionContainsEverything) {
  const auto map = grid_map(100, 100, 20);
  const auto corners = corner_superpixels(map, 1.0);
  for (const auto& c : corners) EXPECT_EQ(c.size(), 25u);
}

TEST(Corners, ZeroFractionIsEmpty) {
  const auto map = grid_map(100, 100, 20);
  try {
    corner_superpixels(map, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCorner);
  }
  const auto nearest = corner_superpixels_or_nearest(map, 0.0);
  EXPECT_EQ(nearest[0], std::vector<int>{0});
  EXPECT_EQ(nearest[3], std::vector<int>{24});
}

TEST(Corners, SlicMapHasAllFourCorners) {
  const auto map = slic(lab_features(noisy_frame(160, 120, 3)));
  const auto corners = corner_superpixels_or_nearest(map);
  std::set<int> seen;
  std::size_t total = 0;
  for (const auto& c : corners) {
    ASSERT_FALSE(c.empty());
    seen.insert(c.begin(), c.end());
    total += c.size();
  }
  // The four rectangles do not overlap, so neither do their sets.
  EXPECT_EQ(seen.size(), total);
}
