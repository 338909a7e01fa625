#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "motionseg/flow_io.hpp"
#include "motionseg/geometry.hpp"

namespace motionseg {

// Classic Bruss-Horn residual: length of the component of v orthogonal to p.
// Throws kZeroPrediction when p is the zero vector.
double bh_error(const Eigen::Vector2d& v, const Eigen::Vector2d& p);

// Like bh_error, but a flow pointing away from p (v . p < 0) costs its full
// length.
double mbh_error(const Eigen::Vector2d& v, const Eigen::Vector2d& p);

// Pixels taking part in a motion fit. Coordinates are normalized, flow is in
// pixels, weights lie in [0, 1].
class WeightedPixelSet {
 public:
  static constexpr std::size_t kMinEffectivePixels = 5;

  WeightedPixelSet() = default;

  // Every pixel with weight > min_weight, sampled every `stride` pixels in
  // both directions. A null `weights` means unit weights.
  static WeightedPixelSet from_field(const FlowField& flow, const CameraIntrinsics& intrinsics,
                                     const Grid<double>* weights = nullptr,
                                     double min_weight = 0.0, int stride = 1);
  // Unit-weight pixels at the given linear indices.
  static WeightedPixelSet from_indices(const FlowField& flow, const CameraIntrinsics& intrinsics,
                                       std::span<const std::size_t> indices);

  void add(double x, double y, double u, double v, double weight);

  std::size_t size() const noexcept { return x_.size(); }
  std::size_t effective_count() const noexcept;

  // Throws kPrecondition for bad weights and kDegenerateFlow for fewer than
  // kMinEffectivePixels positive weights.
  void validate() const;

  std::span<const double> x() const noexcept { return x_; }
  std::span<const double> y() const noexcept { return y_; }
  std::span<const double> u() const noexcept { return u_; }
  std::span<const double> v() const noexcept { return v_; }
  std::span<const double> weights() const noexcept { return w_; }

 private:
  std::vector<double> x_, y_, u_, v_, w_;
};

struct TranslationFit {
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
  // Sum of w_i * e_i^2 with e_i the orthogonal (Bruss-Horn) residual.
  double residual = 0.0;
};

struct MotionFit {
  CameraMotion motion;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Unit direction minimizing the weighted sum of squared orthogonal residuals.
// The objective is even in the direction, so the result is canonicalized to
// W >= 0 (then U >= 0, then V >= 0).
TranslationFit estimate_translation(const WeightedPixelSet& pixels,
                                    const CameraIntrinsics& intrinsics);

struct MotionSearchOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  double gradient_step = 1e-6;
};

// Nested minimization: rotation by quasi-Newton descent with central
// difference gradients, translation in closed form at every evaluation. The
// returned translation sign is the one with the lower weighted MBH error.
MotionFit estimate_motion(const WeightedPixelSet& pixels, const CameraIntrinsics& intrinsics,
                          const Eigen::Vector3d& init_rotation = Eigen::Vector3d::Zero(),
                          const MotionSearchOptions& options = {});

// Picks between `translation` and its negation by weighted MBH error of the
// flow derotated by `rotation`.
Eigen::Vector3d orient_translation(const WeightedPixelSet& pixels,
                                   const CameraIntrinsics& intrinsics,
                                   const Eigen::Vector3d& translation,
                                   const Eigen::Vector3d& rotation);

// Per-pixel MBH error of the derotated flow against the predicted
// translational direction. At the focus of expansion the error is the flow
// length.
Grid<double> mbh_error_image(const FlowField& flow, const CameraMotion& motion,
                             const CameraIntrinsics& intrinsics);

struct ModelScore {
  Grid<std::uint8_t> inliers;
  std::size_t outliers = 0;
};

// A pixel is an outlier iff its MBH error exceeds `threshold`.
ModelScore score_model(const FlowField& flow, const CameraMotion& motion,
                       const CameraIntrinsics& intrinsics, double threshold);

// Precomputed per-pixel geometry for scoring many hypotheses against the
// same flow field.
class MotionScorer {
 public:
  MotionScorer(const FlowField& flow, const CameraIntrinsics& intrinsics);

  std::size_t count_outliers(const CameraMotion& motion, double threshold) const;
  // Outlier counts for the motion as given and with its translation negated.
  // Counting stops early once both exceed `limit`.
  std::pair<std::size_t, std::size_t> count_outliers_both_signs(
      const CameraMotion& motion, double threshold,
      std::size_t limit = static_cast<std::size_t>(-1)) const;
  double error_at(std::size_t i, const CameraMotion& motion) const;
  std::size_t size() const noexcept { return x_.size(); }

 private:
  double focal_;
  std::vector<double> x_, y_, u_, v_;
  // Rotational flow per unit A, B, C (pixels).
  std::vector<double> ra_u_, ra_v_, rb_u_, rb_v_, rc_u_, rc_v_;
};

// Angle between two directions in radians, in [0, pi].
double angular_error(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace motionseg
