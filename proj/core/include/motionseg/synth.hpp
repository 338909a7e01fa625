#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "motionseg/flow_io.hpp"
#include "motionseg/geometry.hpp"
#include "motionseg/inference.hpp"

namespace motionseg {

enum class DepthKind {
  kConstant,  // base everywhere
  kRamp,      // base + ramp_x * x + ramp_y * y in normalized coordinates
  kSteps,     // vertical bands of equal width with depths from `steps`
};

struct DepthSpec {
  DepthKind kind = DepthKind::kConstant;
  double base = 5.0;
  double ramp_x = 0.0;
  double ramp_y = 0.0;
  std::vector<double> steps;

  Grid<double> render(const CameraIntrinsics& intrinsics, int width, int height) const;
};

enum class ShapeKind { kRectangle, kEllipse, kPolygon };

struct ObjectSpec {
  ShapeKind shape = ShapeKind::kRectangle;
  Eigen::Vector2d center{0.0, 0.0};      // pixels, first frame
  Eigen::Vector2d half_extent{8.0, 8.0};  // rectangle and ellipse
  std::vector<Eigen::Vector2d> polygon;  // vertices relative to center
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // world units per frame
  double depth = 3.0;

  bool covers(const Eigen::Vector2d& center_now, double col, double row) const;
};

// Camera velocity (not normalized) and rotation for one frame.
struct CameraStep {
  Eigen::Vector3d velocity = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
};

struct SceneSpec {
  std::string name;
  int width = 160;
  int height = 120;
  double focal = 1.0;
  // Frame t uses camera[min(t, size - 1)].
  std::vector<CameraStep> camera{CameraStep{}};
  DepthSpec depth;
  // Earlier objects occlude later ones.
  std::vector<ObjectSpec> objects;
  NoiseModel noise;
  int frames = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSequence {
  CameraIntrinsics intrinsics;
  std::vector<FlowField> flows;
  std::vector<FlowField> noiseless;
  // Labels: 0 background, i + 1 for objects[i].
  std::vector<SegmentationMask> truth;
  // Unit translation direction and rotation of the camera per frame.
  std::vector<CameraMotion> motions;
  // Object centres per frame, pixels.
  std::vector<std::vector<Eigen::Vector2d>> centers;
};

// Per frame: background flow from camera translation at scene depth plus the
// rotational field; object pixels see the relative translation
// (camera - object) at the object's depth plus the same rotational field.
// Objects move by the mean of their own image flow between frames. Gaussian
// noise of standard deviation s is added to each flow component.
SyntheticSequence generate(const SceneSpec& spec);

// Fixed test scenes: lateral-car, forward-walk, complex-depth, camouflage,
// big-foreground.
std::vector<SceneSpec> standard_suite(std::uint64_t seed, double noise = 0.05);

// Scene `name` from the standard suite; throws kPrecondition when unknown.
SceneSpec standard_scene(const std::string& name, std::uint64_t seed, double noise = 0.05);

// Ground-truth motions and object centres, for the synth manifest.
nlohmann::json manifest_json(const SceneSpec& spec, const SyntheticSequence& sequence);

}  // namespace motionseg
