#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "motionseg/flow_io.hpp"
#include "motionseg/grid.hpp"

namespace motionseg {

// Maps pixel (col, row) to normalized image coordinates
//   x = (col - cx) / scale,  y = (row - cy) / scale
// with y pointing down. Flow fields are stored in pixels, so a displacement of
// d normalized units is d * scale pixels.
struct CameraIntrinsics {
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;

  // Principal point at the image centre, scale = half the image width.
  static CameraIntrinsics for_image(int width, int height, double focal = 1.0);

  Eigen::Vector2d normalized(double col, double row) const {
    return {(col - cx) / scale, (row - cy) / scale};
  }

  void validate() const;
};

// Translation direction (U, V, W) with unit norm plus rotation rates (A, B, C)
// in radians/frame.
struct CameraMotion {
  Eigen::Vector3d translation = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();

  static constexpr double kMaxRotation = 0.5;

  void validate() const;
};

// Per-pixel flow direction; `defined` is 0 at the focus of expansion where
// the predicted direction vanishes.
struct AngleField {
  Grid<double> angle;
  Grid<std::uint8_t> defined;
};

// Image-plane direction (W x - U f, W y - V f) predicted at normalized (x, y).
Eigen::Vector2d predicted_direction(const Eigen::Vector3d& translation, double focal, double x,
                                    double y);

// atan2(W y - V f, W x - U f) at every pixel. Depth never enters.
AngleField translational_angle_field(const Eigen::Vector3d& translation,
                                     const CameraIntrinsics& intrinsics, int width, int height);

// ((W x - U f) / Z, (W y - V f) / Z) in pixels. The translation need not be
// unit length; the synthetic generator feeds scaled velocities through here.
FlowField translational_flow(const Eigen::Vector3d& translation,
                             const CameraIntrinsics& intrinsics, const Grid<double>& depth);

// Depth-independent rotational field:
//   v_x = A xy/f - B (x^2/f + f) + C y
//   v_y = A (y^2/f + f) - B xy/f - C x
Eigen::Vector2d rotational_flow_at(const Eigen::Vector3d& rotation, double focal, double x,
                                   double y);
FlowField rotational_flow(const Eigen::Vector3d& rotation, const CameraIntrinsics& intrinsics,
                          int width, int height);

// observed - rotational_flow(rotation)
FlowField derotate(const FlowField& observed, const Eigen::Vector3d& rotation,
                   const CameraIntrinsics& intrinsics);
// observed - rotational, throws kDimensionMismatch on differing sizes.
FlowField derotate(const FlowField& observed, const FlowField& rotational);

// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

}  // namespace motionseg
