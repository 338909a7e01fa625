#include "motionseg/eval.hpp"

#include <cmath>

#include "motionseg/error.hpp"

namespace motionseg {

ConfusionCounts confusion(const Grid<std::uint8_t>& predicted, const Grid<std::uint8_t>& truth) {
  if (!predicted.same_shape(truth)) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction and ground truth differ in size");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool g = truth[i] != 0;
    if (p && g) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

double mcc(const ConfusionCounts& c) {
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn);
  const auto fn = static_cast<double>(c.fn);
  const double a = tp + fp;
  const double b = tp + fn;
  const double d = tn + fp;
  const double e = tn + fn;
  if (a == 0.0 || b == 0.0 || d == 0.0 || e == 0.0) return 0.0;
  return (tp * tn - fp * fn) / (std::sqrt(a) * std::sqrt(b) * std::sqrt(d) * std::sqrt(e));
}

std::optional<double> f_measure(const ConfusionCounts& c) {
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return std::nullopt;
  const auto tp2 = 2.0 * static_cast<double>(c.tp);
  return tp2 / (tp2 + static_cast<double>(c.fp) + static_cast<double>(c.fn));
}

FrameScore score_frame(int frame, const Grid<std::uint8_t>& predicted,
                       const Grid<std::uint8_t>& truth) {
  FrameScore s;
  s.frame = frame;
  s.counts = confusion(predicted, truth);
  s.mcc = mcc(s.counts);
  s.f = f_measure(s.counts);
  return s;
}

VideoScore aggregate_video(std::string name, std::vector<FrameScore> frames) {
  require(!frames.empty(), ErrorCode::kPrecondition, "video has no scored frames");
  VideoScore v;
  v.name = std::move(name);
  v.frames = std::move(frames);
  double mcc_sum = 0.0;
  double f_sum = 0.0;
  int f_count = 0;
  for (const auto& f : v.frames) {
    mcc_sum += f.mcc;
    if (f.f) {
      f_sum += *f.f;
      ++f_count;
    }
  }
  v.mean_mcc = mcc_sum / static_cast<double>(v.frames.size());
  if (f_count > 0) v.mean_f = f_sum / f_count;
  return v;
}

DatasetScore aggregate_dataset(std::vector<VideoScore> videos) {
  require(!videos.empty(), ErrorCode::kPrecondition, "dataset has no videos");
  DatasetScore d;
  d.videos = std::move(videos);
  double mcc_sum = 0.0;
  double f_sum = 0.0;
  int f_count = 0;
  for (const auto& v : d.videos) {
    mcc_sum += v.mean_mcc;
    if (v.mean_f) {
      f_sum += *v.mean_f;
      ++f_count;
    }
  }
  d.mean_mcc = mcc_sum / static_cast<double>(d.videos.size());
  if (f_count > 0) d.mean_f = f_sum / f_count;
  return d;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const FrameScore& s) {
  return {{"frame", s.frame},
          {"tp", s.counts.tp},
          {"fp", s.counts.fp},
          {"tn", s.counts.tn},
          {"fn", s.counts.fn},
          {"mcc", s.mcc},
          {"f", optional_json(s.f)}};
}

nlohmann::json to_json(const VideoScore& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.frames) frames.push_back(to_json(f));
  return {{"name", s.name}, {"mean_mcc", s.mean_mcc}, {"mean_f", optional_json(s.mean_f)},
          {"frames", frames}};
}

nlohmann::json to_json(const DatasetScore& s) {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : s.videos) videos.push_back(to_json(v));
  return {{"mean_mcc", s.mean_mcc}, {"mean_f", optional_json(s.mean_f)}, {"videos", videos}};
}

}  // namespace motionseg
