#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "motionseg/egomotion.hpp"
#include "motionseg/error.hpp"
#include "motionseg/synth.hpp"

using namespace motionseg;

namespace {

SceneSpec plain_scene(const Eigen::Vector3d& velocity, const Eigen::Vector3d& rotation) {
  SceneSpec s;
  s.name = "plain";
  s.width = 64;
  s.height = 48;
  s.frames = 3;
  s.camera = {{velocity, rotation}};
  s.depth = {DepthKind::kConstant, 4.0, 0.0, 0.0, {}};
  return s;
}

Eigen::Vector2d mask_centroid(const SegmentationMask& m, int label) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.labels(x, y) != label) continue;
      sum += Eigen::Vector2d(x, y);
      ++n;
    }
  }
  return sum / n;
}

}  // namespace

TEST(Synth, PureForwardTranslationIdentity) {
  const auto seq = generate(plain_scene({0, 0, 1}, {0, 0, 0}));
  const auto field = translational_angle_field({0, 0, 1}, seq.intrinsics, 64, 48);
  const auto& flow = seq.flows[0];
  EXPECT_EQ(flow, seq.noiseless[0]);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      const auto i = flow.u.index(x, y);
      ASSERT_TRUE(field.defined[i]);
      EXPECT_EQ(std::atan2(flow.v[i] + 0.0, flow.u[i] + 0.0), field.angle[i]);
      const double radius = seq.intrinsics.normalized(x, y).norm();
      EXPECT_NEAR(flow.magnitude(i), seq.intrinsics.scale * radius / 4.0, 1e-12);
    }
  }
}

TEST(Synth, DerotationRecoversTranslationalField) {
  const Eigen::Vector3d r(0.01, -0.02, 0.005);
  SceneSpec spec = plain_scene({0.2, -0.1, 0.5}, r);
  spec.depth = {DepthKind::kRamp, 5.0, 1.0, -1.0, {}};
  const auto seq = generate(spec);
  const auto depth = spec.depth.render(seq.intrinsics, 64, 48);
  const auto expected = translational_flow(spec.camera[0].velocity, seq.intrinsics, depth);
  const auto out = derotate(seq.flows[0], r, seq.intrinsics);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out.u[i], expected.u[i], 1e-6);
    EXPECT_NEAR(out.v[i], expected.v[i], 1e-6);
  }
  EXPECT_LT(angular_error(seq.motions[0].translation, spec.camera[0].velocity.normalized()), 1e-15);
}

TEST(Synth, OppositeMotionFoolsBhButNotMbh) {
  // Camera moves right, the object moves right faster: its image flow points
  // the other way along the same line.
  SceneSpec spec = plain_scene({0.1, 0, 0}, {0, 0, 0});
  ObjectSpec obj;
  obj.center = {32, 24};
  obj.half_extent = {8, 6};
  obj.velocity = {0.3, 0, 0};
  obj.depth = 3.0;
  spec.objects = {obj};
  const auto seq = generate(spec);
  const auto& flow = seq.flows[0];
  const CameraMotion cam = seq.motions[0];
  double mbh = 0.0, bh = 0.0, magnitude = 0.0;
  int n = 0;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      const auto i = flow.u.index(x, y);
      if (seq.truth[0].labels[i] != 1) continue;
      const auto xy = seq.intrinsics.normalized(x, y);
      const auto p = predicted_direction(cam.translation, 1.0, xy.x(), xy.y());
      const Eigen::Vector2d v(flow.u[i], flow.v[i]);
      mbh += mbh_error(v, p);
      bh += bh_error(v, p);
      magnitude += v.norm();
      ++n;
    }
  }
  ASSERT_GT(n, 0);
  EXPECT_NEAR(mbh, magnitude, 1e-9);
  EXPECT_LT(bh / n, 1e-12);
}

TEST(Synth, NoiseFreeIsDeterministicAndExact) {
  SceneSpec spec = standard_scene("lateral-car", 0, 0.0);
  const auto a = generate(spec);
  spec.seed = 99;
  const auto b = generate(spec);
  EXPECT_EQ(a.flows, b.flows);
  EXPECT_EQ(a.flows, a.noiseless);
  EXPECT_EQ(a.truth, b.truth);
}

TEST(Synth, SeededNoiseIsReproducible) {
  const auto a = generate(standard_scene("camouflage", 5, 0.05));
  const auto b = generate(standard_scene("camouflage", 5, 0.05));
  const auto c = generate(standard_scene("camouflage", 6, 0.05));
  EXPECT_EQ(a.flows, b.flows);
  EXPECT_NE(a.flows, c.flows);
  EXPECT_EQ(a.noiseless, c.noiseless);
}

TEST(Synth, NoiseVariance) {
  const double s = 0.3;
  const auto seq = generate(standard_scene("forward-walk", 1, s));
  double su = 0, suu = 0, sv = 0, svv = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < seq.flows.size(); ++t) {
    for (std::size_t i = 0; i < seq.flows[t].size(); ++i) {
      const double du = seq.flows[t].u[i] - seq.noiseless[t].u[i];
      const double dv = seq.flows[t].v[i] - seq.noiseless[t].v[i];
      su += du;
      suu += du * du;
      sv += dv;
      svv += dv * dv;
      ++n;
    }
  }
  ASSERT_GE(n, 100000u);
  const double var_u = suu / n - (su / n) * (su / n);
  const double var_v = svv / n - (sv / n) * (sv / n);
  EXPECT_NEAR(var_u / (s * s), 1.0, 0.05);
  EXPECT_NEAR(var_v / (s * s), 1.0, 0.05);
}

TEST(Synth, MaskAdvectionFollowsObjectFlow) {
  // Centres move by the exact mean visible flow; the rasterised mask can only
  // follow to the nearest pixel.
  for (const char* name : {"lateral-car", "forward-walk", "complex-depth", "camouflage"}) {
    const auto seq = generate(standard_scene(name, 0, 0.0));
    for (std::size_t t = 0; t + 1 < seq.truth.size(); ++t) {
      Eigen::Vector2d mean = Eigen::Vector2d::Zero();
      int n = 0;
      for (std::size_t i = 0; i < seq.noiseless[t].size(); ++i) {
        if (seq.truth[t].labels[i] != 1) continue;
        mean += Eigen::Vector2d(seq.noiseless[t].u[i], seq.noiseless[t].v[i]);
        ++n;
      }
      ASSERT_GT(n, 0);
      mean /= n;
      const Eigen::Vector2d step = seq.centers[t + 1][0] - seq.centers[t][0];
      EXPECT_LT((step - mean).norm(), 1e-9) << name << " frame " << t;
      const Eigen::Vector2d off = mask_centroid(seq.truth[t + 1], 1) - seq.centers[t + 1][0];
      EXPECT_LE(off.cwiseAbs().maxCoeff(), 1.0) << name << " frame " << t + 1;
    }
  }
}

TEST(Synth, CamouflageFlowMagnitudesMatch) {
  const auto seq = generate(standard_scene("camouflage", 0, 0.0));
  for (std::size_t t = 0; t < seq.flows.size(); ++t) {
    double object = 0.0, background = 0.0;
    int no = 0, nb = 0;
    for (std::size_t i = 0; i < seq.flows[t].size(); ++i) {
      const double m = seq.flows[t].magnitude(i);
      if (seq.truth[t].labels[i] == 1) {
        object += m;
        ++no;
      } else {
        background += m;
        ++nb;
      }
    }
    const double ratio = (object / no) / (background / nb);
    EXPECT_GE(ratio, 0.8);
    EXPECT_LE(ratio, 1.25);
  }
}

TEST(Synth, BigForegroundCoversThirtyPercent) {
  const auto seq = generate(standard_scene("big-foreground", 0, 0.0));
  std::size_t moving = 0;
  for (int l : seq.truth[0].labels) moving += l != 0;
  EXPECT_NEAR(static_cast<double>(moving) / seq.truth[0].labels.size(), 0.30, 0.01);
}

TEST(Synth, StandardSuiteShape) {
  const auto suite = standard_suite(0);
  ASSERT_EQ(suite.size(), 5u);
  for (const auto& s : suite) {
    EXPECT_EQ(s.width, 160);
    EXPECT_EQ(s.height, 120);
    EXPECT_EQ(s.noise.s, 0.05);
    EXPECT_EQ(s.objects.size(), 1u);
    const auto seq = generate(s);
    EXPECT_EQ(seq.flows.size(), static_cast<std::size_t>(s.frames));
    for (const auto& truth : seq.truth) {
      std::size_t moving = 0;
      for (int l : truth.labels) moving += l != 0;
      EXPECT_GT(moving, 0u) << s.name;
    }
  }
  EXPECT_THROW(standard_scene("nope", 0), Error);
}

TEST(Synth, EarlierObjectsOcclude) {
  SceneSpec spec = plain_scene({0.1, 0, 0}, {0, 0, 0});
  spec.frames = 1;
  ObjectSpec front, back;
  front.center = {30, 24};
  front.half_extent = {6, 6};
  front.velocity = {0, 0.2, 0};
  back.center = {36, 24};
  back.half_extent = {6, 6};
  back.velocity = {0, -0.2, 0};
  spec.objects = {front, back};
  const auto seq = generate(spec);
  EXPECT_EQ(seq.truth[0].labels(33, 24), 1);
  EXPECT_EQ(seq.truth[0].labels(40, 24), 2);
  EXPECT_EQ(seq.truth[0].labels(10, 10), 0);
}

TEST(Synth, ShapesCover) {
  ObjectSpec rect;
  rect.half_extent = {2, 1};
  EXPECT_TRUE(rect.covers({0, 0}, -2, -1));
  EXPECT_FALSE(rect.covers({0, 0}, 2, 0));
  ObjectSpec ellipse;
  ellipse.shape = ShapeKind::kEllipse;
  ellipse.half_extent = {4, 2};
  EXPECT_TRUE(ellipse.covers({10, 10}, 14, 10));
  EXPECT_FALSE(ellipse.covers({10, 10}, 13, 12));
  ObjectSpec tri;
  tri.shape = ShapeKind::kPolygon;
  tri.polygon = {{0, 0}, {10, 0}, {0, 10}};
  EXPECT_TRUE(tri.covers({0, 0}, 2, 2));
  EXPECT_FALSE(tri.covers({0, 0}, 8, 8));
}

TEST(Synth, Validation) {
  SceneSpec spec = plain_scene({0, 0, 1}, {0, 0, 0});
  spec.depth.base = -1.0;
  EXPECT_THROW(generate(spec), Error);
  spec = plain_scene({0, 0, 0}, {0, 0, 0});
  EXPECT_THROW(generate(spec), Error);
  spec = plain_scene({0, 0, 1}, {0.6, 0, 0});
  EXPECT_THROW(generate(spec), Error);
  spec = plain_scene({0, 0, 1}, {0, 0, 0});
  spec.noise.s = -0.1;
  EXPECT_THROW(generate(spec), Error);
}

TEST(Synth, ManifestHasPerFrameTruth) {
  const auto spec = standard_scene("lateral-car", 0, 0.05);
  const auto seq = generate(spec);
  const auto j = manifest_json(spec, seq);
  EXPECT_EQ(j.at("name"), "lateral-car");
  ASSERT_EQ(j.at("frames").size(), seq.flows.size());
}
