#include "motionseg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <opencv2/imgproc.hpp>

#include "motionseg/error.hpp"

namespace motionseg {

void VonMisesParams::validate() const {
  require(std::isfinite(a) && a > 0.0, ErrorCode::kConfig, "von Mises a must be > 0");
  require(std::isfinite(b) && b >= 0.0, ErrorCode::kConfig, "von Mises b must be >= 0");
}

void NoiseModel::validate() const {
  require(std::isfinite(s) && s >= 0.0, ErrorCode::kConfig, "noise s must be >= 0");
}

double log_bessel_i0(double x) {
  require(!std::isnan(x), ErrorCode::kPrecondition, "I0 argument is NaN");
  x = std::abs(x);
  if (std::isinf(x)) return x;
  if (x <= 30.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(sum);
  }
  // e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
    if (next < sum * 1e-17 || next > term) break;
    term = next;
    sum += term;
  }
  return x - 0.5 * std::log(kTwoPi * x) + std::log(sum);
}

double bessel_i0(double x) { return std::exp(log_bessel_i0(x)); }

double von_mises_log_pdf(double theta, double mu, double kappa) {
  require(std::isfinite(kappa) && kappa >= 0.0, ErrorCode::kPrecondition,
          "kappa must be finite and >= 0");
  if (kappa == 0.0) return -std::log(kTwoPi);
  // kappa (cos d - 1) keeps the exponent bounded for large kappa.
  return kappa * (std::cos(theta - mu) - 1.0) + kappa - log_bessel_i0(kappa) - std::log(kTwoPi);
}

double von_mises_pdf(double theta, double mu, double kappa) {
  if (kappa == 0.0) return 1.0 / kTwoPi;
  return std::exp(von_mises_log_pdf(theta, mu, kappa));
}

double kappa(double t_r, const VonMisesParams& params) {
  require(std::isfinite(t_r) && t_r >= 0.0, ErrorCode::kPrecondition, "t_r must be >= 0");
  if (params.b == 0.0) return params.a;
  if (params.b == 1.0) return params.a * t_r;
  return params.a * std::pow(t_r, params.b);
}

Grid<double> angle_log_likelihood(const FlowField& translational, const Eigen::Vector3d& translation,
                                  const CameraIntrinsics& intrinsics,
                                  const VonMisesParams& params) {
  params.validate();
  translational.validate();
  const int w = translational.width();
  const int h = translational.height();
  const AngleField mu = translational_angle_field(translation, intrinsics, w, h);
  Grid<double> out(w, h, 0.0);
  const double uniform = -std::log(kTwoPi);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mu.defined[i]) {
      out[i] = uniform;
      continue;
    }
    const double magnitude = translational.magnitude(i);
    // A zero vector has no direction, whatever kappa says.
    out[i] = magnitude > 0.0 ? von_mises_log_pdf(translational.angle(i), mu.angle[i],
                                                 kappa(magnitude, params))
                             : uniform;
  }
  return out;
}

Grid<double> angle_likelihood(const FlowField& translational, const Eigen::Vector3d& translation,
                              const CameraIntrinsics& intrinsics, const VonMisesParams& params) {
  Grid<double> out = angle_log_likelihood(translational, translation, intrinsics, params);
  for (double& v : out) v = std::exp(v);
  return out;
}

BeliefStack::BeliefStack(int width, int height, int models)
    : width_(width), height_(height), models_(models) {
  require(width > 0 && height > 0, ErrorCode::kPrecondition, "belief stack needs a positive size");
  require(models >= 1, ErrorCode::kPrecondition, "belief stack needs at least the background model");
  data_.assign(static_cast<std::size_t>(channels()) * pixels(), 0.0);
}

BeliefStack BeliefStack::uniform(int width, int height, int models) {
  BeliefStack stack(width, height, models);
  const double model_mass = 1.0 / (models + 1.0);
  for (int c = 0; c < models; ++c) {
    std::ranges::fill(stack.plane(c), model_mass);
  }
  std::ranges::fill(stack.plane(models), 1.0 / (models + 1.0));
  return stack;
}

Grid<double> BeliefStack::plane_grid(int channel) const {
  Grid<double> grid(width_, height_, 0.0);
  std::ranges::copy(plane(channel), grid.begin());
  return grid;
}

double BeliefStack::max_normalization_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < pixels(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < channels(); ++c) {
      const double p = at(c, i);
      if (!(p >= 0.0)) return std::numeric_limits<double>::infinity();
      sum += p;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

Grid<double> forward_splat(const Grid<double>& values, const FlowField& flow, Grid<double>* weight) {
  if (!values.same_shape(flow.u) || !values.same_shape(flow.v)) {
    throw Error(ErrorCode::kDimensionMismatch, "splat values and flow differ in size");
  }
  const int w = values.width();
  const int h = values.height();
  Grid<double> out(w, h, 0.0);
  if (weight) *weight = Grid<double>(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tx = x + flow.u(x, y);
      const double ty = y + flow.v(x, y);
      const double fx = std::floor(tx);
      const double fy = std::floor(ty);
      const double ax = tx - fx;
      const double ay = ty - fy;
      const double value = values(x, y);
      const double corners[4][3] = {{fx, fy, (1 - ax) * (1 - ay)},
                                    {fx + 1, fy, ax * (1 - ay)},
                                    {fx, fy + 1, (1 - ax) * ay},
                                    {fx + 1, fy + 1, ax * ay}};
      for (const auto& c : corners) {
        if (c[2] == 0.0 || c[0] < 0 || c[1] < 0 || c[0] >= w || c[1] >= h) continue;
        const int cx = static_cast<int>(c[0]);
        const int cy = static_cast<int>(c[1]);
        out(cx, cy) += c[2] * value;
        if (weight) (*weight)(cx, cy) += c[2];
      }
    }
  }
  return out;
}

namespace {

void blur_in_place(Grid<double>& plane, double sigma) {
  if (sigma <= 0.0) return;
  cv::Mat view(plane.height(), plane.width(), CV_64FC1, plane.data());
  cv::GaussianBlur(view, view, cv::Size(0, 0), sigma, sigma, cv::BORDER_REPLICATE);
}

// Blurs the model planes, renormalizes them per pixel and applies the
// k/(k+1), 1/(k+1) split. Pixels with no mass left become uniform.
BeliefStack finish_prior(std::vector<Grid<double>>& planes, double sigma) {
  const int models = static_cast<int>(planes.size());
  const int w = planes.front().width();
  const int h = planes.front().height();
  for (auto& p : planes) blur_in_place(p, sigma);
  BeliefStack prior(w, h, models);
  const double share = models / (models + 1.0);
  const double fresh = 1.0 / (models + 1.0);
  for (std::size_t i = 0; i < prior.pixels(); ++i) {
    double sum = 0.0;
    for (const auto& p : planes) sum += std::max(p[i], 0.0);
    for (int c = 0; c < models; ++c) {
      const double v = std::max(planes[static_cast<std::size_t>(c)][i], 0.0);
      prior.at(c, i) = sum > 0.0 ? share * (v / sum) : share / models;
    }
    prior.at(models, i) = fresh;
  }
  return prior;
}

}  // namespace

BeliefStack propagate_prior(const BeliefStack& posterior, const FlowField& flow,
                            double smoothing_sigma) {
  require(smoothing_sigma >= 0.0, ErrorCode::kPrecondition, "smoothing sigma must be >= 0");
  flow.validate();
  if (posterior.width() != flow.width() || posterior.height() != flow.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "posterior and flow differ in size");
  }
  const int models = posterior.models();
  const int w = posterior.width();
  const int h = posterior.height();

  std::vector<Grid<double>> conditioned(static_cast<std::size_t>(models), Grid<double>(w, h, 0.0));
  for (std::size_t i = 0; i < posterior.pixels(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < models; ++c) sum += posterior.at(c, i);
    for (int c = 0; c < models; ++c) {
      conditioned[static_cast<std::size_t>(c)][i] =
          sum > 0.0 ? posterior.at(c, i) / sum : 1.0 / models;
    }
  }

  std::vector<Grid<double>> planes;
  planes.reserve(conditioned.size());
  Grid<double> weight;
  for (const auto& c : conditioned) {
    planes.push_back(forward_splat(c, flow, planes.empty() ? &weight : nullptr));
  }
  const double uniform = 1.0 / models;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const double hole = 1.0 - weight[i];
    if (hole <= 0.0) continue;
    for (auto& p : planes) p[i] += hole * uniform;
  }
  return finish_prior(planes, smoothing_sigma);
}

BeliefStack prior_from_labels(const Grid<int>& labels, int models, double smoothing_sigma) {
  require(!labels.empty(), ErrorCode::kPrecondition, "empty label grid");
  require(models >= 1, ErrorCode::kPrecondition, "need at least the background model");
  require(smoothing_sigma >= 0.0, ErrorCode::kPrecondition, "smoothing sigma must be >= 0");
  std::vector<Grid<double>> planes(static_cast<std::size_t>(models),
                                   Grid<double>(labels.width(), labels.height(), 0.0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < models, ErrorCode::kPrecondition,
            "label outside [0, models)");
    planes[static_cast<std::size_t>(labels[i])][i] = 1.0;
  }
  return finish_prior(planes, smoothing_sigma);
}

BeliefStack posterior(const BeliefStack& prior, std::span<const Grid<double>> log_likelihoods,
                      std::size_t* fallback_pixels) {
  require(static_cast<int>(log_likelihoods.size()) == prior.channels(), ErrorCode::kPrecondition,
          "need one likelihood plane per channel");
  for (const auto& plane : log_likelihoods) {
    if (plane.width() != prior.width() || plane.height() != prior.height()) {
      throw Error(ErrorCode::kDimensionMismatch, "likelihood and prior differ in size");
    }
  }
  const int channels = prior.channels();
  BeliefStack out(prior.width(), prior.height(), prior.models());
  std::vector<double> logs(static_cast<std::size_t>(channels));
  std::size_t fallbacks = 0;
  for (std::size_t i = 0; i < prior.pixels(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < channels; ++c) {
      const double p = prior.at(c, i);
      const double l = log_likelihoods[static_cast<std::size_t>(c)][i];
      const double value = p > 0.0 ? std::log(p) + l : -std::numeric_limits<double>::infinity();
      logs[static_cast<std::size_t>(c)] = std::isnan(value)
                                              ? -std::numeric_limits<double>::infinity()
                                              : value;
      best = std::max(best, logs[static_cast<std::size_t>(c)]);
    }
    if (!std::isfinite(best)) {
      ++fallbacks;
      for (int c = 0; c < channels; ++c) out.at(c, i) = prior.at(c, i);
      continue;
    }
    double sum = 0.0;
    for (double& v : logs) {
      v = std::exp(v - best);
      sum += v;
    }
    for (int c = 0; c < channels; ++c) out.at(c, i) = logs[static_cast<std::size_t>(c)] / sum;
  }
  if (fallback_pixels) *fallback_pixels = fallbacks;
  return out;
}

SegmentationMask label(const BeliefStack& posterior) {
  SegmentationMask mask(posterior.width(), posterior.height());
  for (std::size_t i = 0; i < posterior.pixels(); ++i) {
    int best = 0;
    double best_p = posterior.at(0, i);
    for (int c = 1; c < posterior.channels(); ++c) {
      if (posterior.at(c, i) > best_p) {
        best_p = posterior.at(c, i);
        best = c;
      }
    }
    mask.labels[i] = best;
  }
  return mask;
}

}  // namespace motionseg
