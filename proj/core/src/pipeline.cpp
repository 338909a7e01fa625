#include "motionseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <opencv2/imgproc.hpp>

#include "motionseg/error.hpp"
#include "motionseg/geometry.hpp"
#include "motionseg/init.hpp"
#include "motionseg/superpixels.hpp"

namespace motionseg {

namespace {

nlohmann::json vec_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

// Weights for fitting model j: the prior of j rescaled so that a certain
// pixel weighs 1, restricted to pixels where j is the most likely model.
Grid<double> fit_weights(const BeliefStack& prior, int model) {
  const int k = prior.models();
  const double rescale = (k + 1.0) / k;
  Grid<double> weights(prior.width(), prior.height(), 0.0);
  for (std::size_t i = 0; i < prior.pixels(); ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (prior.at(c, i) > prior.at(best, i)) best = c;
    }
    if (best == model) weights[i] = std::min(1.0, prior.at(model, i) * rescale);
  }
  return weights;
}

double outlier_fraction(const FlowField& flow, const CameraMotion& motion,
                        const CameraIntrinsics& intrinsics, double threshold) {
  const Grid<double> error = mbh_error_image(flow, motion, intrinsics);
  const auto outliers = std::ranges::count_if(error, [&](double e) { return e > threshold; });
  return static_cast<double>(outliers) / static_cast<double>(error.size());
}

}  // namespace

nlohmann::json FrameDiagnostics::to_json() const {
  nlohmann::json j = {
      {"frame", frame},
      {"initialization", initialization},
      {"background",
       {{"translation", vec_json(background.translation)},
        {"rotation", vec_json(background.rotation)},
        {"residual", background_residual},
        {"iterations", background_iterations},
        {"converged", background_converged}}},
      {"outlier_fraction", outlier_fraction},
      {"models", models},
      {"fallback_pixels", fallback_pixels},
      {"created_models", created_models},
      {"retired_models", retired_models},
  };
  auto& translations = j["model_translations"] = nlohmann::json::array();
  for (const auto& t : model_translations) translations.push_back(vec_json(t));
  if (ransac_outliers) j["ransac_outliers"] = *ransac_outliers;
  if (ransac_best_trial) j["ransac_best_trial"] = *ransac_best_trial;
  if (otsu_components) j["otsu_components"] = *otsu_components;
  if (superpixel_source) j["superpixel_source"] = *superpixel_source;
  return j;
}

MotionSegmenter::MotionSegmenter(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  config_.ransac.seed = config_.seed;
}

FrameResult MotionSegmenter::process(const FlowField& flow, const cv::Mat* frame) {
  flow.validate();
  FrameResult result;
  if (frame_ == 0) {
    result = initialize(flow, frame);
  } else {
    if (flow.width() != width_ || flow.height() != height_) {
      throw Error(ErrorCode::kDimensionMismatch, "flow size changed mid-sequence");
    }
    result = step(flow);
  }
  previous_flow_ = flow;
  ++frame_;
  return result;
}

FrameResult MotionSegmenter::initialize(const FlowField& flow, const cv::Mat* frame) {
  width_ = flow.width();
  height_ = flow.height();
  intrinsics_ = CameraIntrinsics::for_image(width_, height_, config_.focal);

  FrameDiagnostics diag;
  diag.initialization = true;
  MotionFit background;
  if (config_.use_ransac) {
    const bool use_frame = frame && !frame->empty();
    diag.superpixel_source = use_frame ? "frame" : "flow_magnitude";
    const FeatureImage features = use_frame ? lab_features(*frame)
                                                           : flow_magnitude_features(flow);
    if (features.width != width_ || features.height != height_) {
      throw Error(ErrorCode::kDimensionMismatch, "frame and flow differ in size");
    }
    const SuperpixelMap superpixels = slic(features, config_.slic);
    const RansacResult ransac = constrained_ransac(flow, superpixels, intrinsics_, config_.ransac);
    background = ransac.fit;
    diag.ransac_outliers = ransac.outliers;
    diag.ransac_best_trial = ransac.best_trial;
  } else {
    const auto pixels = WeightedPixelSet::from_field(flow, intrinsics_);
    try {
      background = estimate_motion(pixels, intrinsics_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateFlow) throw;
      throw Error(ErrorCode::kInitFailure, "background fit on all pixels is degenerate");
    }
  }
  rotation_ = background.motion.rotation;
  diag.background = background.motion;
  diag.background_residual = background.residual;
  diag.background_iterations = background.iterations;
  diag.background_converged = background.converged;
  diag.outlier_fraction =
      outlier_fraction(flow, background.motion, intrinsics_, config_.ransac.inlier_threshold);

  const FlowField translational = derotate(flow, rotation_, intrinsics_);
  Grid<int> components = extract_components(mbh_error_image(flow, background.motion, intrinsics_),
                                            config_.otsu);
  const int found = std::ranges::max(components);
  diag.otsu_components = found;

  // Components become models in extraction order while they admit a fit.
  models_ = {background.motion.translation};
  std::vector<int> relabel(static_cast<std::size_t>(found) + 1, 0);
  for (int c = 1; c <= found; ++c) {
    if (static_cast<int>(models_.size()) >= config_.lifecycle.max_models) break;
    WeightedPixelSet pixels;
    for (std::size_t i = 0; i < components.size(); ++i) {
      if (components[i] != c) continue;
      const int x = static_cast<int>(i % static_cast<std::size_t>(width_));
      const int y = static_cast<int>(i / static_cast<std::size_t>(width_));
      const auto xy = intrinsics_.normalized(x, y);
      pixels.add(xy.x(), xy.y(), translational.u[i], translational.v[i], 1.0);
    }
    try {
      const TranslationFit fit = estimate_translation(pixels, intrinsics_);
      models_.push_back(
          orient_translation(pixels, intrinsics_, fit.direction, Eigen::Vector3d::Zero()));
      relabel[static_cast<std::size_t>(c)] = static_cast<int>(models_.size()) - 1;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateFlow) throw;
    }
  }
  for (int& l : components) l = relabel[static_cast<std::size_t>(l)];
  starved_frames_.assign(models_.size(), 0);

  const BeliefStack prior = prior_from_labels(components, static_cast<int>(models_.size()),
                                              config_.smoothing_sigma);
  return finish(translational, prior, std::move(diag));
}

Eigen::Vector3d MotionSegmenter::fit_object(const FlowField& translational,
                                            const BeliefStack& prior, int model,
                                            const Eigen::Vector3d& fallback) const {
  const Grid<double> weights = fit_weights(prior, model);
  const auto pixels = WeightedPixelSet::from_field(translational, intrinsics_, &weights, 0.0,
                                                   config_.fit_stride);
  try {
    const TranslationFit fit = estimate_translation(pixels, intrinsics_);
    return orient_translation(pixels, intrinsics_, fit.direction, Eigen::Vector3d::Zero());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateFlow) throw;
    return fallback;
  }
}

FrameResult MotionSegmenter::step(const FlowField& flow) {
  const BeliefStack prior = propagate_prior(tracked_, previous_flow_, config_.smoothing_sigma);
  const int k = prior.models();

  FrameDiagnostics diag;
  diag.frame = frame_;
  // The blurred prior hands some object pixels to the background, and a
  // least-squares fit follows them. Pixels the previous frame's motion cannot
  // explain are left out of the first fit, then each refit keeps the pixels
  // the latest fit explains.
  const Grid<double> weights = fit_weights(prior, 0);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const auto explained = [&](const CameraMotion& motion) {
    const Grid<double> error = mbh_error_image(flow, motion, intrinsics_);
    Grid<double> kept = weights;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (error[i] > config_.ransac.inlier_threshold) kept[i] = 0.0;
    }
    return kept;
  };
  const auto fit = [&](const Grid<double>& w, const Eigen::Vector3d& start) {
    return estimate_motion(WeightedPixelSet::from_field(flow, intrinsics_, &w, 0.0, config_.fit_stride),
                           intrinsics_, start);
  };

  CameraMotion previous;
  previous.translation = models_[0];
  previous.rotation = rotation_;
  Grid<double> selected = explained(previous);
  if (std::accumulate(selected.begin(), selected.end(), 0.0) < 0.5 * total) selected = weights;

  MotionFit background;
  try {
    background = fit(selected, rotation_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateFlow) throw;
    // Background prior collapsed: fall back to every pixel.
    background = fit(Grid<double>(width_, height_, 1.0), rotation_);
  }
  for (int round = 0; round < config_.background_refits; ++round) {
    const Grid<double> kept = explained(background.motion);
    if (std::accumulate(kept.begin(), kept.end(), 0.0) < 0.5 * total) break;
    try {
      background = fit(kept, background.motion.rotation);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateFlow) throw;
      break;
    }
  }
  rotation_ = background.motion.rotation;
  models_[0] = background.motion.translation;
  diag.background = background.motion;
  diag.background_residual = background.residual;
  diag.background_iterations = background.iterations;
  diag.background_converged = background.converged;
  diag.outlier_fraction =
      outlier_fraction(flow, background.motion, intrinsics_, config_.ransac.inlier_threshold);

  const FlowField translational = derotate(flow, rotation_, intrinsics_);
  for (int j = 1; j < k; ++j) {
    models_[static_cast<std::size_t>(j)] =
        fit_object(translational, prior, j, models_[static_cast<std::size_t>(j)]);
  }
  return finish(translational, prior, std::move(diag));
}

FrameResult MotionSegmenter::finish(const FlowField& translational, const BeliefStack& prior,
                                    FrameDiagnostics diagnostics) {
  const int k = prior.models();
  std::vector<Grid<double>> logs;
  logs.reserve(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j < k; ++j) {
    logs.push_back(angle_log_likelihood(translational, models_[static_cast<std::size_t>(j)],
                                        intrinsics_, config_.von_mises));
  }
  logs.emplace_back(width_, height_, std::log(new_motion_likelihood()));

  FrameResult result;
  result.posterior = posterior(prior, logs, &diagnostics.fallback_pixels);
  result.mask = label(result.posterior);
  diagnostics.models = k;
  diagnostics.model_translations = models_;

  // Retire objects that have been starved of posterior mass for too long.
  const double area = static_cast<double>(result.posterior.pixels());
  std::vector<int> keep = {0};
  for (int j = 1; j < k; ++j) {
    const auto plane = result.posterior.plane(j);
    const double mass = std::accumulate(plane.begin(), plane.end(), 0.0);
    auto& streak = starved_frames_[static_cast<std::size_t>(j)];
    streak = mass < config_.lifecycle.retire_fraction * area ? streak + 1 : 0;
    if (streak < config_.lifecycle.retire_frames) keep.push_back(j);
  }
  diagnostics.retired_models = k - static_cast<int>(keep.size());

  // Promote sizeable new-motion regions, largest first.
  cv::Mat fresh(height_, width_, CV_8UC1, cv::Scalar(0));
  for (std::size_t i = 0; i < result.mask.labels.size(); ++i) {
    if (result.mask.labels[i] == k) {
      fresh.at<std::uint8_t>(static_cast<int>(i) / width_, static_cast<int>(i) % width_) = 1;
    }
  }
  cv::Mat regions;
  const int n = cv::connectedComponents(fresh, regions, 8, CV_32S);
  std::vector<int> sizes(static_cast<std::size_t>(n), 0);
  for (int y = 0; y < height_; ++y) {
    const int* row = regions.ptr<int>(y);
    for (int x = 0; x < width_; ++x) ++sizes[static_cast<std::size_t>(row[x])];
  }
  std::vector<int> order;
  const double min_size = config_.lifecycle.min_new_fraction * area;
  for (int r = 1; r < n; ++r) {
    if (sizes[static_cast<std::size_t>(r)] >= min_size) order.push_back(r);
  }
  std::ranges::stable_sort(order, [&](int a, int b) {
    return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)];
  });

  std::vector<Eigen::Vector3d> next_models;
  std::vector<int> next_streaks;
  for (const int j : keep) {
    next_models.push_back(models_[static_cast<std::size_t>(j)]);
    next_streaks.push_back(starved_frames_[static_cast<std::size_t>(j)]);
  }
  std::vector<int> promoted;
  for (const int r : order) {
    if (static_cast<int>(next_models.size()) >= config_.lifecycle.max_models) break;
    WeightedPixelSet pixels;
    for (int y = 0; y < height_; ++y) {
      const int* row = regions.ptr<int>(y);
      for (int x = 0; x < width_; ++x) {
        if (row[x] != r) continue;
        const std::size_t i = translational.u.index(x, y);
        const auto xy = intrinsics_.normalized(x, y);
        pixels.add(xy.x(), xy.y(), translational.u[i], translational.v[i], 1.0);
      }
    }
    try {
      const TranslationFit fit = estimate_translation(pixels, intrinsics_);
      next_models.push_back(
          orient_translation(pixels, intrinsics_, fit.direction, Eigen::Vector3d::Zero()));
      next_streaks.push_back(0);
      promoted.push_back(r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateFlow) throw;
    }
  }
  diagnostics.created_models = static_cast<int>(promoted.size());

  // The tracked posterior carries surviving planes plus one plane per
  // promoted region holding the new-motion mass found there.
  tracked_ = BeliefStack(width_, height_, static_cast<int>(next_models.size()));
  int channel = 0;
  for (const int j : keep) {
    std::ranges::copy(result.posterior.plane(j), tracked_.plane(channel).begin());
    ++channel;
  }
  std::ranges::copy(result.posterior.plane(k), tracked_.plane(tracked_.new_motion()).begin());
  for (const int r : promoted) {
    auto target = tracked_.plane(channel);
    auto leftover = tracked_.plane(tracked_.new_motion());
    for (int y = 0; y < height_; ++y) {
      const int* row = regions.ptr<int>(y);
      for (int x = 0; x < width_; ++x) {
        if (row[x] != r) continue;
        const std::size_t i = translational.u.index(x, y);
        target[i] = leftover[i];
        leftover[i] = 0.0;
      }
    }
    ++channel;
  }
  models_ = std::move(next_models);
  starved_frames_ = std::move(next_streaks);

  result.diagnostics = std::move(diagnostics);
  return result;
}

SequenceResult run_sequence(std::span<const FlowField> flows, std::span<const cv::Mat> frames,
                            const PipelineConfig& config) {
  require(!flows.empty(), ErrorCode::kPrecondition, "need at least one flow field");
  MotionSegmenter segmenter(config);
  SequenceResult out;
  out.masks.reserve(flows.size());
  out.diagnostics.reserve(flows.size());
  for (std::size_t t = 0; t < flows.size(); ++t) {
    const cv::Mat* frame = t < frames.size() ? &frames[t] : nullptr;
    FrameResult r = segmenter.process(flows[t], frame);
    out.masks.push_back(std::move(r.mask));
    out.diagnostics.push_back(std::move(r.diagnostics));
  }
  return out;
}

}  // namespace motionseg
