#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "motionseg/error.hpp"
#include "motionseg/init.hpp"
#include "motionseg/synth.hpp"
#include "support/otsu_oracle.hpp"

using namespace motionseg;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

RansacConfig quick_ransac(int trials = 300, std::uint64_t seed = 1) {
  RansacConfig c;
  c.trials = trials;
  c.seed = seed;
  return c;
}

Grid<double> blob_image(int w, int h, double background) {
  return Grid<double>(w, h, background);
}

void paint(Grid<double>& g, int x0, int y0, int x1, int y1, double value) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) g(x, y) = value;
  }
}

}  // namespace

TEST(Otsu, PerfectlyBimodal) {
  std::vector<double> values(100, 0.0);
  values.insert(values.end(), 100, 10.0);
  const auto r = otsu_threshold(values);
  EXPECT_FALSE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.effectiveness, 1.0);
  EXPECT_GT(r.threshold, 0.0);
  EXPECT_LE(r.threshold, 10.0);
  int above = 0;
  for (double v : values) above += v >= r.threshold;
  EXPECT_EQ(above, 100);
}

TEST(Otsu, AllEqualIsDegenerate) {
  const std::vector<double> values(50, 3.0);
  const auto r = otsu_threshold(values);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.effectiveness, 0.0);
  const std::vector<double> zeros(50, 0.0);
  EXPECT_TRUE(otsu_threshold(zeros).degenerate);
}

TEST(Otsu, RejectsNegativeValues) {
  const std::vector<double> values{1.0, -1.0};
  EXPECT_THROW(otsu_threshold(values), Error);
}

TEST(Otsu, MatchesBruteForceOnRandomHistograms) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const int bins = std::uniform_int_distribution<int>(2, 256)(rng);
    const double sparsity = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins));
    std::uniform_int_distribution<std::int64_t> count(0, 500);
    std::bernoulli_distribution empty(sparsity);
    for (auto& c : counts) c = empty(rng) ? 0 : count(rng);
    const std::vector<double> as_double(counts.begin(), counts.end());
    const auto oracle = motionseg::testing::brute_force_otsu(counts);
    const auto r = otsu_from_histogram(as_double);
    ASSERT_EQ(r.degenerate, oracle.degenerate) << "trial " << trial;
    if (oracle.degenerate) continue;
    EXPECT_EQ(r.bin, oracle.bin) << "trial " << trial;
    EXPECT_NEAR(r.effectiveness, static_cast<double>(oracle.effectiveness), 1e-12);
  }
}

TEST(Otsu, BimodalMixtureSplitsBetweenModes) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> low(1.0, 0.2), high(5.0, 0.3);
  std::vector<double> values;
  for (int i = 0; i < 2000; ++i) values.push_back(std::max(0.0, low(rng)));
  for (int i = 0; i < 1000; ++i) values.push_back(high(rng));
  const auto r = otsu_threshold(values);
  ASSERT_FALSE(r.degenerate);
  // Every empty bin between the modes ties; the first one wins, so the split
  // sits just above the low mode.
  const double top = *std::max_element(values.begin(), values.end());
  for (int i = 0; i < 2000; ++i) EXPECT_LT(histogram_bin(values[i], top, 256), r.bin);
  for (int i = 2000; i < 3000; ++i) EXPECT_GE(histogram_bin(values[i], top, 256), r.bin);
  EXPECT_LT(r.threshold, 2.5);
  EXPECT_GT(r.effectiveness, 0.9);
}

TEST(HistogramBin, Edges) {
  EXPECT_EQ(histogram_bin(0.0, 10.0, 256), 0);
  EXPECT_EQ(histogram_bin(10.0, 10.0, 256), 255);
  EXPECT_EQ(histogram_bin(5.0, 10.0, 256), 128);
  EXPECT_EQ(histogram_bin(3.0, 0.0, 256), 0);
}

TEST(ExtractComponents, UniformImageHasNoObjects) {
  const auto labels = extract_components(Grid<double>(30, 20, 0.7), {});
  for (int l : labels) EXPECT_EQ(l, 0);
}

TEST(ExtractComponents, SingleBlob) {
  auto img = blob_image(40, 30, 0.01);
  paint(img, 10, 8, 20, 16, 2.0);
  const auto labels = extract_components(img, {});
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      const bool inside = x >= 10 && x < 20 && y >= 8 && y < 16;
      EXPECT_EQ(labels(x, y), inside ? 1 : 0) << x << "," << y;
    }
  }
}

TEST(ExtractComponents, TwoBlobsInDescendingMeanOrder) {
  auto img = blob_image(60, 40, 0.0);
  paint(img, 5, 5, 15, 15, 1.0);
  paint(img, 35, 20, 50, 35, 3.0);
  const auto labels = extract_components(img, {});
  EXPECT_EQ(labels(40, 25), 1);
  EXPECT_EQ(labels(10, 10), 2);
  EXPECT_EQ(labels(0, 0), 0);
  EXPECT_EQ(labels(25, 25), 0);
}

TEST(ExtractComponents, LabelsAreContiguousAndAboveBackground) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> noise(0.0, 0.05);
  Grid<double> img(80, 60);
  for (auto& v : img) v = noise(rng);
  paint(img, 5, 5, 20, 20, 1.5);
  paint(img, 40, 10, 55, 30, 0.8);
  paint(img, 60, 40, 75, 55, 2.5);
  const auto labels = extract_components(img, {});
  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);
  EXPECT_EQ(max_label, 3);
  std::vector<double> sum(4, 0.0);
  std::vector<int> n(4, 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    sum[static_cast<std::size_t>(labels[i])] += img[i];
    ++n[static_cast<std::size_t>(labels[i])];
  }
  for (int l = 1; l <= 3; ++l) {
    ASSERT_GT(n[static_cast<std::size_t>(l)], 0);
    EXPECT_GT(sum[static_cast<std::size_t>(l)] / n[static_cast<std::size_t>(l)], sum[0] / n[0]);
  }
  EXPECT_EQ(labels(62, 42), 1);
  EXPECT_EQ(labels(10, 10), 2);
  EXPECT_EQ(labels(45, 20), 3);
}

TEST(ExtractComponents, SpeckleStaysBackground) {
  auto img = blob_image(100, 100, 0.0);
  img(50, 50) = 5.0;  // one pixel, below 0.1% of the image
  paint(img, 10, 10, 20, 20, 1.0);
  const auto labels = extract_components(img, {});
  EXPECT_EQ(labels(50, 50), 0);
  EXPECT_EQ(labels(15, 15), 1);
}

TEST(ExtractComponents, ConnectivityMatters) {
  // Two diagonal squares touching at a corner.
  auto img = blob_image(40, 40, 0.0);
  paint(img, 5, 5, 15, 15, 1.0);
  paint(img, 15, 15, 25, 25, 1.0);
  OtsuConfig eight;
  const auto joined = extract_components(img, eight);
  EXPECT_EQ(joined(10, 10), 1);
  EXPECT_EQ(joined(20, 20), 1);
  OtsuConfig four;
  four.connectivity = 4;
  const auto split = extract_components(img, four);
  EXPECT_NE(split(10, 10), 0);
  EXPECT_NE(split(20, 20), 0);
  EXPECT_NE(split(10, 10), split(20, 20));
}

TEST(OtsuConfig, Validation) {
  OtsuConfig c;
  c.effectiveness_stop = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.connectivity = 6;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.bins = 1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(RansacConfig, Validation) {
  RansacConfig c;
  EXPECT_NO_THROW(c.validate());
  c.forced_corner_patches = 5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.patches_per_trial = 2;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.trials = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.inlier_threshold = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

class RansacScene : public ::testing::Test {
 protected:
  static SyntheticSequence make(const std::string& name, double noise) {
    return generate(standard_scene(name, 0, noise));
  }
};

TEST_F(RansacScene, SingleMotionHasNoOutliers) {
  SceneSpec spec = standard_scene("lateral-car", 0, 0.0);
  spec.objects.clear();
  spec.frames = 1;
  const auto seq = generate(spec);
  const auto sp = slic(flow_magnitude_features(seq.flows[0]));
  const auto r = constrained_ransac(seq.flows[0], sp, seq.intrinsics, quick_ransac(50));
  EXPECT_EQ(r.outliers, 0u);
  EXPECT_LT(angular_error(r.fit.motion.translation, seq.motions[0].translation), 0.5 * kDeg);
  EXPECT_LT((r.fit.motion.rotation - seq.motions[0].rotation).cwiseAbs().maxCoeff(), 1e-3);
}

TEST_F(RansacScene, BigForegroundFindsBackground) {
  const auto seq = make("big-foreground", 0.05);
  const auto& flow = seq.flows[0];
  const auto sp = slic(flow_magnitude_features(flow));
  const auto r = constrained_ransac(flow, sp, seq.intrinsics, quick_ransac(1000));
  EXPECT_LT(angular_error(r.fit.motion.translation, seq.motions[0].translation), 2.0 * kDeg);
  const auto score = score_model(flow, r.fit.motion, seq.intrinsics, 0.1);
  std::size_t object = 0, flagged = 0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (seq.truth[0].labels[i] == 0) continue;
    ++object;
    flagged += score.inliers[i] == 0;
  }
  ASSERT_GT(object, 0u);
  EXPECT_GE(static_cast<double>(flagged) / object, 0.9);
}

TEST_F(RansacScene, DeterministicForSeed) {
  const auto seq = make("forward-walk", 0.05);
  const auto sp = slic(flow_magnitude_features(seq.flows[0]));
  const auto a = constrained_ransac(seq.flows[0], sp, seq.intrinsics, quick_ransac(200, 5));
  const auto b = constrained_ransac(seq.flows[0], sp, seq.intrinsics, quick_ransac(200, 5));
  EXPECT_EQ(a.outliers, b.outliers);
  EXPECT_EQ(a.best_trial, b.best_trial);
  EXPECT_EQ(a.patches, b.patches);
  EXPECT_EQ(a.fit.motion.translation, b.fit.motion.translation);
  EXPECT_EQ(a.fit.motion.rotation, b.fit.motion.rotation);
  EXPECT_EQ(a.fit.residual, b.fit.residual);
}

TEST_F(RansacScene, OutliersNonIncreasingInTrials) {
  const auto seq = make("complex-depth", 0.05);
  const auto sp = slic(flow_magnitude_features(seq.flows[0]));
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (int trials : {1, 5, 25, 125}) {
    const auto r = constrained_ransac(seq.flows[0], sp, seq.intrinsics, quick_ransac(trials, 9));
    EXPECT_LE(r.outliers, previous) << trials << " trials";
    previous = r.outliers;
  }
}

TEST_F(RansacScene, SamplesThreeDistinctCorners) {
  const auto seq = make("lateral-car", 0.05);
  const auto sp = slic(flow_magnitude_features(seq.flows[0]));
  const auto corners = corner_superpixels_or_nearest(sp);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = constrained_ransac(seq.flows[0], sp, seq.intrinsics, quick_ransac(1, seed));
    ASSERT_EQ(r.patches.size(), 10u);
    int corners_hit = 0;
    for (const auto& c : corners) {
      for (int k = 0; k < 3; ++k) {
        if (std::find(c.begin(), c.end(), r.patches[static_cast<std::size_t>(k)]) != c.end()) {
          ++corners_hit;
          break;
        }
      }
    }
    EXPECT_GE(corners_hit, 3);
  }
}

TEST(Ransac, AllDegenerateIsInitFailure) {
  FlowField zero(40, 40);
  SuperpixelMap sp = slic(flow_magnitude_features(zero));
  try {
    constrained_ransac(zero, sp, CameraIntrinsics::for_image(40, 40), quick_ransac(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInitFailure);
  }
}

TEST(Ransac, SizeMismatch) {
  FlowField flow(40, 40);
  SuperpixelMap sp = slic(flow_magnitude_features(FlowField(30, 40)));
  EXPECT_THROW(constrained_ransac(flow, sp, CameraIntrinsics::for_image(40, 40), quick_ransac(1)),
               Error);
}
