#include "motionseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <opencv2/imgproc.hpp>

#include "motionseg/error.hpp"

namespace motionseg {

Grid<double> DepthSpec::render(const CameraIntrinsics& intrinsics, int width, int height) const {
  Grid<double> depth(width, height, base);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      double z = base;
      switch (kind) {
        case DepthKind::kConstant:
          break;
        case DepthKind::kRamp: {
          const auto xy = intrinsics.normalized(col, row);
          z = base + ramp_x * xy.x() + ramp_y * xy.y();
          break;
        }
        case DepthKind::kSteps: {
          const auto band = static_cast<std::size_t>(col) * steps.size() / static_cast<std::size_t>(width);
          z = steps[band];
          break;
        }
      }
      depth(col, row) = z;
    }
  }
  return depth;
}

bool ObjectSpec::covers(const Eigen::Vector2d& c, double col, double row) const {
  const double dx = col - c.x();
  const double dy = row - c.y();
  switch (shape) {
    case ShapeKind::kRectangle:
      return dx >= -half_extent.x() && dx < half_extent.x() && dy >= -half_extent.y() &&
             dy < half_extent.y();
    case ShapeKind::kEllipse: {
      const double ex = dx / half_extent.x();
      const double ey = dy / half_extent.y();
      return ex * ex + ey * ey <= 1.0;
    }
    case ShapeKind::kPolygon: {
      std::vector<cv::Point2f> contour;
      contour.reserve(polygon.size());
      for (const auto& p : polygon) {
        contour.emplace_back(static_cast<float>(p.x()), static_cast<float>(p.y()));
      }
      return cv::pointPolygonTest(contour, cv::Point2f(static_cast<float>(dx), static_cast<float>(dy)),
                                  false) >= 0;
    }
  }
  return false;
}

void SceneSpec::validate() const {
  require(width > 1 && height > 1, ErrorCode::kPrecondition, "scene needs at least 2x2 pixels");
  require(focal > 0.0, ErrorCode::kPrecondition, "focal length must be > 0");
  require(frames >= 1, ErrorCode::kPrecondition, "scene needs at least one frame");
  require(!camera.empty(), ErrorCode::kPrecondition, "scene needs a camera motion");
  for (const auto& step : camera) {
    require(step.velocity.norm() > 0.0, ErrorCode::kPrecondition, "camera velocity must be nonzero");
    require(step.rotation.cwiseAbs().maxCoeff() <= CameraMotion::kMaxRotation,
            ErrorCode::kPrecondition, "camera rotation out of range");
  }
  require(depth.base > 0.0 || depth.kind == DepthKind::kSteps, ErrorCode::kNonPositiveDepth,
          "base depth must be > 0");
  if (depth.kind == DepthKind::kSteps) {
    require(!depth.steps.empty(), ErrorCode::kPrecondition, "step depth needs at least one band");
    for (const double z : depth.steps) {
      require(z > 0.0, ErrorCode::kNonPositiveDepth, "step depths must be > 0");
    }
  }
  for (const auto& object : objects) {
    require(object.depth > 0.0, ErrorCode::kNonPositiveDepth, "object depth must be > 0");
    require(object.shape != ShapeKind::kPolygon || object.polygon.size() >= 3,
            ErrorCode::kPrecondition, "polygon needs at least 3 vertices");
  }
  noise.validate();
}

SyntheticSequence generate(const SceneSpec& spec) {
  spec.validate();
  const int w = spec.width;
  const int h = spec.height;
  SyntheticSequence out;
  out.intrinsics = CameraIntrinsics::for_image(w, h, spec.focal);
  const auto& intr = out.intrinsics;

  const Grid<double> depth = spec.depth.render(intr, w, h);
  for (const double z : depth) {
    require(z > 0.0, ErrorCode::kNonPositiveDepth, "rendered background depth must be > 0");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise.s > 0.0 ? spec.noise.s : 1.0);

  std::vector<Eigen::Vector2d> centers;
  for (const auto& object : spec.objects) centers.push_back(object.center);

  for (int t = 0; t < spec.frames; ++t) {
    const CameraStep& cam =
        spec.camera[static_cast<std::size_t>(std::min<int>(t, static_cast<int>(spec.camera.size()) - 1))];
    const FlowField rotational = rotational_flow(cam.rotation, intr, w, h);
    FlowField flow = translational_flow(cam.velocity, intr, depth);
    SegmentationMask truth(w, h);

    // Paint back to front so earlier objects end on top.
    std::vector<Eigen::Vector2d> mean_flow(spec.objects.size(), Eigen::Vector2d::Zero());
    for (std::size_t k = spec.objects.size(); k-- > 0;) {
      const auto& object = spec.objects[k];
      const FlowField relative = translational_flow(cam.velocity - object.velocity, intr,
                                                    Grid<double>(w, h, object.depth));
      for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
          if (!object.covers(centers[k], col, row)) continue;
          flow.u(col, row) = relative.u(col, row);
          flow.v(col, row) = relative.v(col, row);
          truth.labels(col, row) = static_cast<int>(k) + 1;
        }
      }
    }
    for (std::size_t i = 0; i < flow.size(); ++i) {
      flow.u[i] += rotational.u[i];
      flow.v[i] += rotational.v[i];
    }

    // Objects move with their mean visible image flow; a hidden object uses
    // the flow its centre would have.
    std::vector<int> counts(spec.objects.size(), 0);
    for (std::size_t i = 0; i < flow.size(); ++i) {
      const int l = truth.labels[i];
      if (l == 0) continue;
      mean_flow[static_cast<std::size_t>(l - 1)] += Eigen::Vector2d(flow.u[i], flow.v[i]);
      ++counts[static_cast<std::size_t>(l - 1)];
    }
    std::vector<Eigen::Vector2d> frame_centers = centers;
    for (std::size_t k = 0; k < spec.objects.size(); ++k) {
      Eigen::Vector2d step;
      if (counts[k] > 0) {
        step = mean_flow[k] / counts[k];
      } else {
        const auto& object = spec.objects[k];
        const auto xy = intr.normalized(centers[k].x(), centers[k].y());
        const auto p = predicted_direction(cam.velocity - object.velocity, intr.focal, xy.x(), xy.y());
        const auto r = rotational_flow_at(cam.rotation, intr.focal, xy.x(), xy.y());
        step = intr.scale * (p / object.depth + r);
      }
      centers[k] += step;
    }

    out.noiseless.push_back(flow);
    if (spec.noise.s > 0.0) {
      for (std::size_t i = 0; i < flow.size(); ++i) {
        flow.u[i] += noise(rng);
        flow.v[i] += noise(rng);
      }
    }
    out.flows.push_back(std::move(flow));
    out.truth.push_back(std::move(truth));
    CameraMotion motion;
    motion.translation = cam.velocity.normalized();
    motion.rotation = cam.rotation;
    out.motions.push_back(motion);
    out.centers.push_back(std::move(frame_centers));
  }
  return out;
}

namespace {

SceneSpec base_scene(const char* name, std::uint64_t seed, double noise) {
  SceneSpec s;
  s.name = name;
  s.width = 160;
  s.height = 120;
  s.frames = 8;
  s.noise.s = noise;
  s.seed = seed;
  return s;
}

}  // namespace

std::vector<SceneSpec> standard_suite(std::uint64_t seed, double noise) {
  std::vector<SceneSpec> suite;

  // Sideways camera with a slight pan; a car crosses the other way.
  {
    SceneSpec s = base_scene("lateral-car", seed, noise);
    s.camera = {{Eigen::Vector3d(0.08, 0.0, 0.02), Eigen::Vector3d(0.0, 0.004, 0.0)}};
    s.depth = {DepthKind::kRamp, 6.0, 0.0, -2.0, {}};
    ObjectSpec car;
    car.shape = ShapeKind::kRectangle;
    car.center = {45.0, 70.0};
    car.half_extent = {18.0, 9.0};
    car.velocity = {0.3, 0.0, 0.0};
    car.depth = 4.0;
    s.objects.push_back(car);
    suite.push_back(s);
  }
  // Walking forward with some head rotation; a pedestrian crosses.
  {
    SceneSpec s = base_scene("forward-walk", seed + 1, noise);
    s.camera = {{Eigen::Vector3d(0.0, 0.0, 0.1), Eigen::Vector3d(0.003, -0.002, 0.002)}};
    s.depth = {DepthKind::kRamp, 5.0, 1.0, -1.5, {}};
    ObjectSpec walker;
    walker.shape = ShapeKind::kEllipse;
    walker.center = {112.0, 62.0};
    walker.half_extent = {9.0, 18.0};
    walker.velocity = {-0.15, 0.0, 0.0};
    walker.depth = 3.0;
    s.objects.push_back(walker);
    suite.push_back(s);
  }
  // Depth jumps between vertical bands; the object rises.
  {
    SceneSpec s = base_scene("complex-depth", seed + 2, noise);
    s.camera = {{Eigen::Vector3d(0.06, 0.02, 0.05), Eigen::Vector3d(0.002, 0.003, -0.001)}};
    s.depth = {DepthKind::kSteps, 5.0, 0.0, 0.0, {2.0, 8.0, 3.0, 10.0, 4.0}};
    ObjectSpec box;
    box.shape = ShapeKind::kPolygon;
    box.center = {95.0, 72.0};
    box.polygon = {{-14.0, -12.0}, {12.0, -14.0}, {16.0, 10.0}, {-10.0, 14.0}};
    box.velocity = {0.0, 0.12, 0.0};
    box.depth = 2.5;
    s.objects.push_back(box);
    suite.push_back(s);
  }
  // Object and background flows of equal length at right angles.
  {
    SceneSpec s = base_scene("camouflage", seed + 3, noise);
    s.camera = {{Eigen::Vector3d(0.1, 0.0, 0.0), Eigen::Vector3d(0.0, 0.0, 0.001)}};
    s.depth = {DepthKind::kConstant, 5.0, 0.0, 0.0, {}};
    ObjectSpec bug;
    bug.shape = ShapeKind::kEllipse;
    bug.center = {80.0, 60.0};
    bug.half_extent = {14.0, 11.0};
    bug.velocity = {0.1, 0.1, 0.0};
    bug.depth = 5.0;
    s.objects.push_back(bug);
    suite.push_back(s);
  }
  // A near object filling 30% of the frame.
  {
    SceneSpec s = base_scene("big-foreground", seed + 4, noise);
    s.camera = {{Eigen::Vector3d(0.05, 0.0, 0.1), Eigen::Vector3d(0.0, 0.002, 0.0)}};
    s.depth = {DepthKind::kConstant, 4.0, 0.0, 0.0, {}};
    ObjectSpec truck;
    truck.shape = ShapeKind::kRectangle;
    truck.center = {80.0, 60.0};
    truck.half_extent = {40.0, 36.0};
    truck.velocity = {0.12, 0.0, 0.0};
    truck.depth = 3.0;
    s.objects.push_back(truck);
    suite.push_back(s);
  }
  return suite;
}

SceneSpec standard_scene(const std::string& name, std::uint64_t seed, double noise) {
  for (auto& s : standard_suite(seed, noise)) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kPrecondition, "unknown scene " + name);
}

nlohmann::json manifest_json(const SceneSpec& spec, const SyntheticSequence& sequence) {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t t = 0; t < sequence.motions.size(); ++t) {
    const auto& m = sequence.motions[t];
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& c : sequence.centers[t]) centers.push_back({c.x(), c.y()});
    frames.push_back({
        {"frame", t},
        {"translation", {m.translation.x(), m.translation.y(), m.translation.z()}},
        {"rotation", {m.rotation.x(), m.rotation.y(), m.rotation.z()}},
        {"object_centers", centers},
    });
  }
  return {
      {"name", spec.name},
      {"width", spec.width},
      {"height", spec.height},
      {"focal", spec.focal},
      {"noise", spec.noise.s},
      {"seed", spec.seed},
      {"objects", spec.objects.size()},
      {"frames", frames},
  };
}

}  // namespace motionseg
