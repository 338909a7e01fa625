#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionseg/grid.hpp"

namespace motionseg {

// Pixel counts with "moving" as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Any nonzero value counts as moving. Throws kDimensionMismatch.
ConfusionCounts confusion(const Grid<std::uint8_t>& predicted, const Grid<std::uint8_t>& truth);

// 0 when any factor of the denominator is zero.
double mcc(const ConfusionCounts& c);

// 2TP / (2TP + FP + FN); empty when there is no foreground in either mask.
std::optional<double> f_measure(const ConfusionCounts& c);

struct FrameScore {
  int frame = 0;
  ConfusionCounts counts;
  double mcc = 0.0;
  std::optional<double> f;
};

struct VideoScore {
  std::string name;
  std::vector<FrameScore> frames;
  double mean_mcc = 0.0;
  std::optional<double> mean_f;  // over frames where F is defined
};

struct DatasetScore {
  std::vector<VideoScore> videos;
  double mean_mcc = 0.0;
  std::optional<double> mean_f;  // over videos with a defined mean F
};

FrameScore score_frame(int frame, const Grid<std::uint8_t>& predicted,
                       const Grid<std::uint8_t>& truth);

// Per-video means over the given (ground-truthed) frames. Throws
// kPrecondition for an empty list.
VideoScore aggregate_video(std::string name, std::vector<FrameScore> frames);

// Unweighted mean over videos.
DatasetScore aggregate_dataset(std::vector<VideoScore> videos);

nlohmann::json to_json(const FrameScore& score);
nlohmann::json to_json(const VideoScore& score);
nlohmann::json to_json(const DatasetScore& score);

}  // namespace motionseg
