#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "motionseg/flow_io.hpp"
#include "motionseg/geometry.hpp"
#include "motionseg/grid.hpp"

namespace motionseg {

// Concentration kappa = a * t_r^b of the angle likelihood.
struct VonMisesParams {
  double a = 4.0;
  double b = 1.0;

  void validate() const;
};

// Isotropic flow noise, only used by the synthetic generator.
struct NoiseModel {
  double s = 0.0;

  void validate() const;
};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// log I0(x) for x >= 0: power series below 30, asymptotic expansion above.
double log_bessel_i0(double x);
double bessel_i0(double x);

double von_mises_log_pdf(double theta, double mu, double kappa);
// exp(kappa cos(theta - mu)) / (2 pi I0(kappa)); exactly 1/(2 pi) at kappa 0.
double von_mises_pdf(double theta, double mu, double kappa);

// a * t_r^b with 0^0 = 1.
double kappa(double t_r, const VonMisesParams& params);

// Density of any angle under the new-motion model.
constexpr double new_motion_likelihood() { return 1.0 / kTwoPi; }

// Per-pixel log p(angle | model, magnitude) of a derotated flow under a
// translation direction. Pixels at the focus of expansion get log(1/(2 pi)).
Grid<double> angle_log_likelihood(const FlowField& translational, const Eigen::Vector3d& translation,
                                  const CameraIntrinsics& intrinsics, const VonMisesParams& params);
Grid<double> angle_likelihood(const FlowField& translational, const Eigen::Vector3d& translation,
                              const CameraIntrinsics& intrinsics, const VonMisesParams& params);

// Per-pixel probabilities over k existing motion models plus one new-motion
// slot, stored as k + 1 planes. Model 0 is the background; the new-motion slot
// is the last plane.
class BeliefStack {
 public:
  BeliefStack() = default;
  // All entries zero.
  BeliefStack(int width, int height, int models);

  // Every pixel: k/(k+1) spread evenly over the models, 1/(k+1) new motion.
  static BeliefStack uniform(int width, int height, int models);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  int models() const noexcept { return models_; }
  int channels() const noexcept { return models_ + 1; }
  int new_motion() const noexcept { return models_; }

  double& at(int channel, std::size_t pixel) { return data_[offset(channel) + pixel]; }
  double at(int channel, std::size_t pixel) const { return data_[offset(channel) + pixel]; }
  std::span<double> plane(int channel) {
    return {data_.data() + offset(channel), pixels()};
  }
  std::span<const double> plane(int channel) const {
    return {data_.data() + offset(channel), pixels()};
  }
  Grid<double> plane_grid(int channel) const;

  // Largest |sum - 1| over pixels, and whether any entry is negative or NaN.
  double max_normalization_error() const;

  friend bool operator==(const BeliefStack&, const BeliefStack&) = default;

 private:
  std::size_t offset(int channel) const { return static_cast<std::size_t>(channel) * pixels(); }

  int width_ = 0;
  int height_ = 0;
  int models_ = 0;
  std::vector<double> data_;
};

// Forward bilinear splat of `values` along `flow`. `weight` receives the total
// splat weight landing on each pixel. Mass leaving the image is dropped.
Grid<double> forward_splat(const Grid<double>& values, const FlowField& flow,
                           Grid<double>* weight = nullptr);

// Prior for the next frame: the model planes of `posterior` are renormalized
// without the new-motion slot, splatted along `flow`, padded with the uniform
// vector where the splat weight is below one, blurred with a Gaussian of
// `smoothing_sigma` pixels and renormalized. Models then share k/(k+1) and the
// new-motion slot gets exactly 1/(k+1).
BeliefStack propagate_prior(const BeliefStack& posterior, const FlowField& flow,
                            double smoothing_sigma);

// Prior built from a hard labelling with labels in [0, models): one-hot planes,
// blurred and renormalized, then the k/(k+1), 1/(k+1) split.
BeliefStack prior_from_labels(const Grid<int>& labels, int models, double smoothing_sigma);

// Bayes update with per-channel log-likelihoods (channels() planes, the last
// being the new-motion model). Pixels where every product vanishes keep the
// prior; their count is written to `fallback_pixels`.
BeliefStack posterior(const BeliefStack& prior, std::span<const Grid<double>> log_likelihoods,
                      std::size_t* fallback_pixels = nullptr);

// Per-pixel argmax; ties go to the lowest channel, hence to the background.
// The new-motion slot appears as label models().
SegmentationMask label(const BeliefStack& posterior);

}  // namespace motionseg
