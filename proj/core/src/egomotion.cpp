#include "motionseg/egomotion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

namespace motionseg {

namespace {

// Floor on |p|^2 in the orthogonal residual; keeps the focus of expansion
// from dominating the fit.
constexpr double kMinPredictionNormSq = 1e-6;
constexpr int kReweightPasses = 3;
constexpr double kCanonicalZero = 1e-9;

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

Eigen::Vector3d canonicalize(Eigen::Vector3d t) {
  t.normalize();
  bool flip = false;
  if (std::abs(t.z()) > kCanonicalZero) {
    flip = t.z() < 0.0;
  } else if (std::abs(t.x()) > kCanonicalZero) {
    flip = t.x() < 0.0;
  } else {
    flip = t.y() < 0.0;
  }
  return flip ? Eigen::Vector3d(-t) : t;
}

// Row i of the linear system: (v x p)(t) = a_i . t with
//   a_i = (f v_y, -f v_x, v_x y - v_y x).
struct Constraint {
  double a0, a1, a2;
};

Constraint constraint_for(double f, double x, double y, double u, double v) {
  return {f * v, -f * u, u * y - v * x};
}

// Closed-form inner solve over precomputed constraint rows. The first pass
// minimizes sum w (a.t)^2 = sum w |v|^2 |p|^2 sin^2; later passes divide by
// |p|^2 so the objective becomes the orthogonal residual sum w e^2.
TranslationFit solve_direction(std::span<const Constraint> rows, std::span<const double> x,
                               std::span<const double> y, std::span<const double> w, double f) {
  const std::size_t n = rows.size();
  Eigen::Vector3d t = Eigen::Vector3d::UnitZ();
  for (int pass = 0; pass <= kReweightPasses; ++pass) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      double weight = w[i];
      if (weight <= 0.0) continue;
      if (pass > 0) {
        const double px = t.z() * x[i] - t.x() * f;
        const double py = t.z() * y[i] - t.y() * f;
        weight /= std::max(px * px + py * py, kMinPredictionNormSq);
      }
      const Constraint& r = rows[i];
      m(0, 0) += weight * r.a0 * r.a0;
      m(0, 1) += weight * r.a0 * r.a1;
      m(0, 2) += weight * r.a0 * r.a2;
      m(1, 1) += weight * r.a1 * r.a1;
      m(1, 2) += weight * r.a1 * r.a2;
      m(2, 2) += weight * r.a2 * r.a2;
    }
    m(1, 0) = m(0, 1);
    m(2, 0) = m(0, 2);
    m(2, 1) = m(1, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m);
    const Eigen::Vector3d& lambda = solver.eigenvalues();
    if (pass == 0) {
      if (!(lambda(2) > 0.0) || !std::isfinite(lambda(2))) {
        throw Error(ErrorCode::kDegenerateFlow, "flow is identically zero on the pixel set");
      }
      if (lambda(1) <= 1e-12 * lambda(2)) {
        throw Error(ErrorCode::kDegenerateFlow, "translation is not determined by the flow");
      }
    }
    t = solver.eigenvectors().col(0);
  }

  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] <= 0.0) continue;
    const Constraint& r = rows[i];
    const double dot = r.a0 * t.x() + r.a1 * t.y() + r.a2 * t.z();
    const double px = t.z() * x[i] - t.x() * f;
    const double py = t.z() * y[i] - t.y() * f;
    residual += w[i] * dot * dot / std::max(px * px + py * py, kMinPredictionNormSq);
  }
  return {canonicalize(t), residual};
}

// Rotation-parameterized problem: constraint rows depend linearly on the
// rotation through the derotated flow.
class NestedObjective {
 public:
  NestedObjective(const WeightedPixelSet& pixels, const CameraIntrinsics& intrinsics)
      : pixels_(pixels), focal_(intrinsics.focal), scale_(intrinsics.scale) {
    const std::size_t n = pixels.size();
    base_.resize(n);
    basis_.resize(3 * n);
    rows_.resize(n);
    const auto xs = pixels.x();
    const auto ys = pixels.y();
    for (std::size_t i = 0; i < n; ++i) {
      base_[i] = constraint_for(focal_, xs[i], ys[i], pixels.u()[i], pixels.v()[i]);
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d unit = Eigen::Vector3d::Zero();
        unit(k) = 1.0;
        const Eigen::Vector2d r = scale_ * rotational_flow_at(unit, focal_, xs[i], ys[i]);
        basis_[3 * i + k] = constraint_for(focal_, xs[i], ys[i], r.x(), r.y());
      }
    }
  }

  TranslationFit solve(const Eigen::Vector3d& rotation) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      Constraint c = base_[i];
      for (int k = 0; k < 3; ++k) {
        const Constraint& b = basis_[3 * i + k];
        c.a0 -= rotation(k) * b.a0;
        c.a1 -= rotation(k) * b.a1;
        c.a2 -= rotation(k) * b.a2;
      }
      rows_[i] = c;
    }
    return solve_direction(rows_, pixels_.x(), pixels_.y(), pixels_.weights(), focal_);
  }

  double value(const Eigen::Vector3d& rotation) {
    if (rotation.cwiseAbs().maxCoeff() > CameraMotion::kMaxRotation) {
      return std::numeric_limits<double>::infinity();
    }
    try {
      return solve(rotation).residual;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateFlow) throw;
      return std::numeric_limits<double>::infinity();
    }
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& rotation, double step) {
    Eigen::Vector3d g;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d hi = rotation;
      Eigen::Vector3d lo = rotation;
      hi(k) += step;
      lo(k) -= step;
      g(k) = (value(hi) - value(lo)) / (2.0 * step);
    }
    return g;
  }

 private:
  const WeightedPixelSet& pixels_;
  double focal_;
  double scale_;
  std::vector<Constraint> base_;
  std::vector<Constraint> basis_;
  std::vector<Constraint> rows_;
};

double weighted_mbh(const WeightedPixelSet& pixels, const CameraIntrinsics& intrinsics,
                    const Eigen::Vector3d& translation, const Eigen::Vector3d& rotation) {
  double total = 0.0;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double w = pixels.weights()[i];
    if (w <= 0.0) continue;
    const double x = pixels.x()[i];
    const double y = pixels.y()[i];
    const Eigen::Vector2d r = intrinsics.scale * rotational_flow_at(rotation, intrinsics.focal, x, y);
    const Eigen::Vector2d v(pixels.u()[i] - r.x(), pixels.v()[i] - r.y());
    const Eigen::Vector2d p = predicted_direction(translation, intrinsics.focal, x, y);
    total += w * (p.isZero(0.0) ? v.norm() : mbh_error(v, p));
  }
  return total;
}

}  // namespace

double bh_error(const Eigen::Vector2d& v, const Eigen::Vector2d& p) {
  const double norm = p.norm();
  if (norm == 0.0) throw Error(ErrorCode::kZeroPrediction, "predicted direction is zero");
  return std::abs(cross(v, p)) / norm;
}

double mbh_error(const Eigen::Vector2d& v, const Eigen::Vector2d& p) {
  const double bh = bh_error(v, p);
  return v.dot(p) < 0.0 ? v.norm() : bh;
}

WeightedPixelSet WeightedPixelSet::from_field(const FlowField& flow,
                                              const CameraIntrinsics& intrinsics,
                                              const Grid<double>* weights, double min_weight,
                                              int stride) {
  require(stride >= 1, ErrorCode::kPrecondition, "stride must be >= 1");
  if (weights != nullptr && !weights->same_shape(flow.u)) {
    throw Error(ErrorCode::kDimensionMismatch, "weights and flow differ in size");
  }
  WeightedPixelSet set;
  for (int row = 0; row < flow.height(); row += stride) {
    for (int col = 0; col < flow.width(); col += stride) {
      const std::size_t i = flow.u.index(col, row);
      const double w = weights != nullptr ? (*weights)[i] : 1.0;
      if (w <= min_weight) continue;
      const auto xy = intrinsics.normalized(col, row);
      set.add(xy.x(), xy.y(), flow.u[i], flow.v[i], w);
    }
  }
  return set;
}

WeightedPixelSet WeightedPixelSet::from_indices(const FlowField& flow,
                                                const CameraIntrinsics& intrinsics,
                                                std::span<const std::size_t> indices) {
  WeightedPixelSet set;
  const auto width = static_cast<std::size_t>(flow.width());
  for (const std::size_t i : indices) {
    require(i < flow.size(), ErrorCode::kPrecondition, "pixel index out of range");
    const auto xy = intrinsics.normalized(static_cast<double>(i % width),
                                          static_cast<double>(i / width));
    set.add(xy.x(), xy.y(), flow.u[i], flow.v[i], 1.0);
  }
  return set;
}

void WeightedPixelSet::add(double x, double y, double u, double v, double weight) {
  x_.push_back(x);
  y_.push_back(y);
  u_.push_back(u);
  v_.push_back(v);
  w_.push_back(weight);
}

std::size_t WeightedPixelSet::effective_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(w_.begin(), w_.end(), [](double w) { return w > 0.0; }));
}

void WeightedPixelSet::validate() const {
  for (std::size_t i = 0; i < size(); ++i) {
    require(std::isfinite(w_[i]) && w_[i] >= 0.0 && w_[i] <= 1.0, ErrorCode::kPrecondition,
            "pixel weights must lie in [0, 1]");
    require(std::isfinite(u_[i]) && std::isfinite(v_[i]) && std::isfinite(x_[i]) &&
                std::isfinite(y_[i]),
            ErrorCode::kNonFinite, "pixel data must be finite");
  }
  if (effective_count() < kMinEffectivePixels) {
    throw Error(ErrorCode::kDegenerateFlow, "need at least 5 pixels with positive weight");
  }
}

TranslationFit estimate_translation(const WeightedPixelSet& pixels,
                                    const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  pixels.validate();
  std::vector<Constraint> rows(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    rows[i] = constraint_for(intrinsics.focal, pixels.x()[i], pixels.y()[i], pixels.u()[i],
                             pixels.v()[i]);
  }
  return solve_direction(rows, pixels.x(), pixels.y(), pixels.weights(), intrinsics.focal);
}

MotionFit estimate_motion(const WeightedPixelSet& pixels, const CameraIntrinsics& intrinsics,
                          const Eigen::Vector3d& init_rotation,
                          const MotionSearchOptions& options) {
  intrinsics.validate();
  pixels.validate();
  NestedObjective objective(pixels, intrinsics);

  Eigen::Vector3d rotation = init_rotation;
  double value = objective.solve(rotation).residual;
  Eigen::Vector3d gradient = objective.gradient(rotation, options.gradient_step);
  Eigen::Matrix3d inverse_hessian = Eigen::Matrix3d::Identity();
  bool fresh_hessian = true;
  bool converged = false;
  int iteration = 0;

  constexpr double kFirstStep = 1e-2;  // radians
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-12;

  for (; iteration < options.max_iterations; ++iteration) {
    if (gradient.norm() < options.gradient_tolerance) {
      converged = true;
      break;
    }
    if (fresh_hessian) {
      inverse_hessian = Eigen::Matrix3d::Identity() * (kFirstStep / gradient.norm());
    }
    Eigen::Vector3d direction = -inverse_hessian * gradient;
    if (direction.dot(gradient) >= 0.0) {
      inverse_hessian = Eigen::Matrix3d::Identity() * (kFirstStep / gradient.norm());
      direction = -inverse_hessian * gradient;
      fresh_hessian = true;
    }

    double alpha = 1.0;
    double candidate_value = std::numeric_limits<double>::infinity();
    Eigen::Vector3d candidate;
    const double slope = direction.dot(gradient);
    while (alpha * direction.norm() > kMinStep) {
      candidate = rotation + alpha * direction;
      candidate_value = objective.value(candidate);
      if (candidate_value <= value + kArmijo * alpha * slope) break;
      alpha *= 0.5;
    }
    if (!(candidate_value < value)) {
      if (fresh_hessian) {
        // Even a short steepest-descent step cannot lower the objective: the
        // iterate sits at the numerical minimum.
        converged = true;
        break;
      }
      fresh_hessian = true;
      continue;
    }

    const Eigen::Vector3d step = candidate - rotation;
    const Eigen::Vector3d next_gradient = objective.gradient(candidate, options.gradient_step);
    const Eigen::Vector3d change = next_gradient - gradient;
    rotation = candidate;
    const double previous_value = value;
    value = candidate_value;
    gradient = next_gradient;

    const double curvature = step.dot(change);
    if (curvature > 1e-300) {
      if (fresh_hessian) {
        inverse_hessian = Eigen::Matrix3d::Identity() * (curvature / change.squaredNorm());
        fresh_hessian = false;
      }
      const double rho = 1.0 / curvature;
      const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
      inverse_hessian = (eye - rho * step * change.transpose()) * inverse_hessian *
                            (eye - rho * change * step.transpose()) +
                        rho * step * step.transpose();
    }
    if (step.norm() < 1e-10 || previous_value - value <= 1e-15 * previous_value) {
      converged = true;
      ++iteration;
      break;
    }
  }

  MotionFit fit;
  const TranslationFit inner = objective.solve(rotation);
  fit.motion.rotation = rotation;
  fit.motion.translation = orient_translation(pixels, intrinsics, inner.direction, rotation);
  fit.residual = inner.residual;
  fit.iterations = iteration;
  fit.converged = converged;
  return fit;
}

Eigen::Vector3d orient_translation(const WeightedPixelSet& pixels,
                                   const CameraIntrinsics& intrinsics,
                                   const Eigen::Vector3d& translation,
                                   const Eigen::Vector3d& rotation) {
  const double forward = weighted_mbh(pixels, intrinsics, translation, rotation);
  const double backward = weighted_mbh(pixels, intrinsics, -translation, rotation);
  return backward < forward ? Eigen::Vector3d(-translation) : translation;
}

MotionScorer::MotionScorer(const FlowField& flow, const CameraIntrinsics& intrinsics)
    : focal_(intrinsics.focal) {
  intrinsics.validate();
  const std::size_t n = flow.size();
  for (auto* vec : {&x_, &y_, &u_, &v_, &ra_u_, &ra_v_, &rb_u_, &rb_v_, &rc_u_, &rc_v_}) {
    vec->resize(n);
  }
  for (int row = 0; row < flow.height(); ++row) {
    for (int col = 0; col < flow.width(); ++col) {
      const std::size_t i = flow.u.index(col, row);
      const auto xy = intrinsics.normalized(col, row);
      x_[i] = xy.x();
      y_[i] = xy.y();
      u_[i] = flow.u[i];
      v_[i] = flow.v[i];
      const Eigen::Vector2d ra =
          intrinsics.scale * rotational_flow_at(Eigen::Vector3d::UnitX(), focal_, xy.x(), xy.y());
      const Eigen::Vector2d rb =
          intrinsics.scale * rotational_flow_at(Eigen::Vector3d::UnitY(), focal_, xy.x(), xy.y());
      const Eigen::Vector2d rc =
          intrinsics.scale * rotational_flow_at(Eigen::Vector3d::UnitZ(), focal_, xy.x(), xy.y());
      ra_u_[i] = ra.x();
      ra_v_[i] = ra.y();
      rb_u_[i] = rb.x();
      rb_v_[i] = rb.y();
      rc_u_[i] = rc.x();
      rc_v_[i] = rc.y();
    }
  }
}

double MotionScorer::error_at(std::size_t i, const CameraMotion& motion) const {
  const auto& r = motion.rotation;
  const auto& t = motion.translation;
  const double du = u_[i] - r.x() * ra_u_[i] - r.y() * rb_u_[i] - r.z() * rc_u_[i];
  const double dv = v_[i] - r.x() * ra_v_[i] - r.y() * rb_v_[i] - r.z() * rc_v_[i];
  const double px = t.z() * x_[i] - t.x() * focal_;
  const double py = t.z() * y_[i] - t.y() * focal_;
  const double p_norm_sq = px * px + py * py;
  const double length = std::sqrt(du * du + dv * dv);
  if (p_norm_sq == 0.0 || du * px + dv * py < 0.0) return length;
  return std::abs(du * py - dv * px) / std::sqrt(p_norm_sq);
}

std::size_t MotionScorer::count_outliers(const CameraMotion& motion, double threshold) const {
  std::size_t outliers = 0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (error_at(i, motion) > threshold) ++outliers;
  }
  return outliers;
}

std::pair<std::size_t, std::size_t> MotionScorer::count_outliers_both_signs(
    const CameraMotion& motion, double threshold, std::size_t limit) const {
  const auto& r = motion.rotation;
  const auto& t = motion.translation;
  std::size_t forward = 0;
  std::size_t backward = 0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const double du = u_[i] - r.x() * ra_u_[i] - r.y() * rb_u_[i] - r.z() * rc_u_[i];
    const double dv = v_[i] - r.x() * ra_v_[i] - r.y() * rb_v_[i] - r.z() * rc_v_[i];
    const double px = t.z() * x_[i] - t.x() * focal_;
    const double py = t.z() * y_[i] - t.y() * focal_;
    const double p_norm_sq = px * px + py * py;
    const double length = std::sqrt(du * du + dv * dv);
    double along = 0.0;
    double bh = length;
    if (p_norm_sq > 0.0) {
      along = du * px + dv * py;
      bh = std::abs(du * py - dv * px) / std::sqrt(p_norm_sq);
    }
    const bool long_enough = length > threshold;
    if (p_norm_sq == 0.0) {
      forward += long_enough;
      backward += long_enough;
    } else {
      forward += (along < 0.0 ? long_enough : bh > threshold);
      backward += (along > 0.0 ? long_enough : bh > threshold);
    }
    if (forward > limit && backward > limit) break;
  }
  return {forward, backward};
}

Grid<double> mbh_error_image(const FlowField& flow, const CameraMotion& motion,
                             const CameraIntrinsics& intrinsics) {
  const MotionScorer scorer(flow, intrinsics);
  Grid<double> errors(flow.width(), flow.height(), 0.0);
  for (std::size_t i = 0; i < errors.size(); ++i) errors[i] = scorer.error_at(i, motion);
  return errors;
}

ModelScore score_model(const FlowField& flow, const CameraMotion& motion,
                       const CameraIntrinsics& intrinsics, double threshold) {
  require(threshold > 0.0, ErrorCode::kPrecondition, "threshold must be > 0");
  const MotionScorer scorer(flow, intrinsics);
  ModelScore score{Grid<std::uint8_t>(flow.width(), flow.height(), 1), 0};
  for (std::size_t i = 0; i < scorer.size(); ++i) {
    if (scorer.error_at(i, motion) > threshold) {
      score.inliers[i] = 0;
      ++score.outliers;
    }
  }
  return score;
}

double angular_error(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = a.normalized().dot(b.normalized());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace motionseg
