#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <opencv2/core/mat.hpp>

#include "motionseg/config.hpp"
#include "motionseg/egomotion.hpp"
#include "motionseg/inference.hpp"

namespace motionseg {

struct FrameDiagnostics {
  int frame = 0;
  bool initialization = false;
  CameraMotion background;
  double background_residual = 0.0;
  int background_iterations = 0;
  bool background_converged = true;
  // Fraction of pixels whose MBH error under the background motion exceeds
  // the RANSAC inlier threshold.
  double outlier_fraction = 0.0;
  // Models in force for this frame, background included.
  int models = 1;
  std::vector<Eigen::Vector3d> model_translations;
  std::size_t fallback_pixels = 0;
  int created_models = 0;
  int retired_models = 0;
  // First frame only.
  std::optional<std::size_t> ransac_outliers;
  std::optional<int> ransac_best_trial;
  std::optional<int> otsu_components;
  // "frame" or "flow_magnitude": what the first-frame superpixels ran on.
  std::optional<std::string> superpixel_source;

  nlohmann::json to_json() const;
};

struct FrameResult {
  SegmentationMask mask;
  BeliefStack posterior;
  FrameDiagnostics diagnostics;
};

// Causal segmenter: feed one flow field per frame, in order. Each call only
// sees the flows given so far.
class MotionSegmenter {
 public:
  explicit MotionSegmenter(PipelineConfig config);

  // `frame` is the optional 8-bit image the flow starts from; it only feeds
  // the first frame's superpixels.
  FrameResult process(const FlowField& flow, const cv::Mat* frame = nullptr);

  int frames_processed() const noexcept { return frame_; }
  const PipelineConfig& config() const noexcept { return config_; }

 private:
  FrameResult initialize(const FlowField& flow, const cv::Mat* frame);
  FrameResult step(const FlowField& flow);
  // Bayes update with the current models, then promotion of new-motion
  // regions and retirement of starved models for the next frame.
  FrameResult finish(const FlowField& translational, const BeliefStack& prior,
                     FrameDiagnostics diagnostics);
  Eigen::Vector3d fit_object(const FlowField& translational, const BeliefStack& prior, int model,
                             const Eigen::Vector3d& fallback) const;

  PipelineConfig config_;
  CameraIntrinsics intrinsics_;
  int frame_ = 0;
  int width_ = 0;
  int height_ = 0;
  // Translation direction per model, background first.
  std::vector<Eigen::Vector3d> models_;
  std::vector<int> starved_frames_;
  Eigen::Vector3d rotation_ = Eigen::Vector3d::Zero();
  BeliefStack tracked_;  // posterior restricted to surviving models
  FlowField previous_flow_;
};

struct SequenceResult {
  std::vector<SegmentationMask> masks;
  std::vector<FrameDiagnostics> diagnostics;
};

// One mask per flow field. `frames` may be empty; otherwise frames[0] feeds the
// first frame's superpixels.
SequenceResult run_sequence(std::span<const FlowField> flows, std::span<const cv::Mat> frames,
                            const PipelineConfig& config);

}  // namespace motionseg
