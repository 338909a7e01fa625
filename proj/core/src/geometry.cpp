#include "motionseg/geometry.hpp"

#include <cmath>
#include <numbers>

namespace motionseg {

CameraIntrinsics CameraIntrinsics::for_image(int width, int height, double focal) {
  require(width > 0 && height > 0, ErrorCode::kPrecondition, "image size must be positive");
  CameraIntrinsics intrinsics;
  intrinsics.focal = focal;
  intrinsics.cx = 0.5 * (width - 1);
  intrinsics.cy = 0.5 * (height - 1);
  intrinsics.scale = 0.5 * width;
  intrinsics.validate();
  return intrinsics;
}

void CameraIntrinsics::validate() const {
  require(std::isfinite(focal) && focal > 0.0, ErrorCode::kPrecondition, "focal length must be > 0");
  require(std::isfinite(scale) && scale > 0.0, ErrorCode::kPrecondition, "pixel scale must be > 0");
  require(std::isfinite(cx) && std::isfinite(cy), ErrorCode::kPrecondition,
          "principal point must be finite");
}

void CameraMotion::validate() const {
  require(translation.allFinite() && rotation.allFinite(), ErrorCode::kNonFinite,
          "camera motion must be finite");
  require(std::abs(translation.norm() - 1.0) < 1e-9, ErrorCode::kPrecondition,
          "translation direction must have unit norm");
  require(rotation.cwiseAbs().maxCoeff() <= kMaxRotation, ErrorCode::kPrecondition,
          "rotation exceeds sanity bound");
}

Eigen::Vector2d predicted_direction(const Eigen::Vector3d& t, double focal, double x, double y) {
  return {t.z() * x - t.x() * focal, t.z() * y - t.y() * focal};
}

AngleField translational_angle_field(const Eigen::Vector3d& translation,
                                     const CameraIntrinsics& intrinsics, int width, int height) {
  intrinsics.validate();
  require(width > 0 && height > 0, ErrorCode::kPrecondition, "grid must be nonempty");
  require(std::abs(translation.norm() - 1.0) < 1e-6, ErrorCode::kPrecondition,
          "translation direction must have unit norm");
  AngleField field{Grid<double>(width, height, 0.0), Grid<std::uint8_t>(width, height, 1)};
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const auto xy = intrinsics.normalized(col, row);
      const auto p = predicted_direction(translation, intrinsics.focal, xy.x(), xy.y());
      if (p.x() == 0.0 && p.y() == 0.0) {
        field.defined(col, row) = 0;
        field.angle(col, row) = 0.0;
      } else {
        // + 0.0 folds -0 into +0 so the result stays in (-pi, pi].
        field.angle(col, row) = std::atan2(p.y() + 0.0, p.x() + 0.0);
      }
    }
  }
  return field;
}

FlowField translational_flow(const Eigen::Vector3d& translation,
                             const CameraIntrinsics& intrinsics, const Grid<double>& depth) {
  intrinsics.validate();
  require(!depth.empty(), ErrorCode::kPrecondition, "depth map is empty");
  FlowField flow(depth.width(), depth.height());
  for (int row = 0; row < depth.height(); ++row) {
    for (int col = 0; col < depth.width(); ++col) {
      const double z = depth(col, row);
      if (!(std::isfinite(z) && z > 0.0)) {
        throw Error(ErrorCode::kNonPositiveDepth, "depth must be finite and > 0");
      }
      const auto xy = intrinsics.normalized(col, row);
      const auto p = predicted_direction(translation, intrinsics.focal, xy.x(), xy.y());
      flow.u(col, row) = intrinsics.scale * p.x() / z;
      flow.v(col, row) = intrinsics.scale * p.y() / z;
    }
  }
  return flow;
}

Eigen::Vector2d rotational_flow_at(const Eigen::Vector3d& r, double f, double x, double y) {
  const double a = r.x();
  const double b = r.y();
  const double c = r.z();
  return {a * x * y / f - b * (x * x / f + f) + c * y,
          a * (y * y / f + f) - b * x * y / f - c * x};
}

FlowField rotational_flow(const Eigen::Vector3d& rotation, const CameraIntrinsics& intrinsics,
                          int width, int height) {
  intrinsics.validate();
  FlowField flow(width, height);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const auto xy = intrinsics.normalized(col, row);
      const auto r = rotational_flow_at(rotation, intrinsics.focal, xy.x(), xy.y());
      flow.u(col, row) = intrinsics.scale * r.x();
      flow.v(col, row) = intrinsics.scale * r.y();
    }
  }
  return flow;
}

FlowField derotate(const FlowField& observed, const Eigen::Vector3d& rotation,
                   const CameraIntrinsics& intrinsics) {
  require(!observed.empty(), ErrorCode::kPrecondition, "flow field is empty");
  return derotate(observed,
                  rotational_flow(rotation, intrinsics, observed.width(), observed.height()));
}

FlowField derotate(const FlowField& observed, const FlowField& rotational) {
  if (!observed.u.same_shape(rotational.u)) {
    throw Error(ErrorCode::kDimensionMismatch, "flow and rotation field differ in size");
  }
  FlowField out = observed;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.u[i] -= rotational.u[i];
    out.v[i] -= rotational.v[i];
  }
  return out;
}

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, kTwoPi);
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

}  // namespace motionseg
