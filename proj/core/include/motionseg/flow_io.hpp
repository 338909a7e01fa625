#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <opencv2/core/mat.hpp>

#include "motionseg/grid.hpp"

namespace motionseg {

// Dense optical flow in pixels/frame. u is horizontal (+x right), v is
// vertical (+y down).
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height) : u(width, height, 0.0), v(width, height, 0.0) {}

  int width() const noexcept { return u.width(); }
  int height() const noexcept { return u.height(); }
  std::size_t size() const noexcept { return u.size(); }
  bool empty() const noexcept { return u.empty(); }

  double magnitude(std::size_t i) const;
  double angle(std::size_t i) const;

  // Throws kPrecondition on empty/mismatched components and kNonFinite on
  // NaN or Inf.
  void validate() const;

  friend bool operator==(const FlowField& a, const FlowField& b) {
    return a.u == b.u && a.v == b.v;
  }

  Grid<double> u;
  Grid<double> v;
};

// Per-pixel labels: 0 is background, j >= 1 is motion component j.
struct SegmentationMask {
  SegmentationMask() = default;
  SegmentationMask(int width, int height) : labels(width, height, 0) {}

  int width() const noexcept { return labels.width(); }
  int height() const noexcept { return labels.height(); }

  // 1 where the label is non-background.
  Grid<std::uint8_t> binary() const;

  friend bool operator==(const SegmentationMask&, const SegmentationMask&) = default;

  Grid<int> labels;
};

enum class MaskEncoding {
  kLabels,  // label index stored verbatim
  kBinary,  // 0 background, 255 moving
};

inline constexpr float kFloMagic = 202021.25f;

// Middlebury .flo: float32 magic, int32 width, int32 height, then
// height*width interleaved (u, v) float32, row-major, little-endian.
std::vector<std::uint8_t> encode_flo(const FlowField& field);
FlowField decode_flo(std::span<const std::uint8_t> bytes);

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& field, const std::filesystem::path& path);

// 8-bit single-channel PNG/PGM. Throws kUnsupported for deeper images and
// kDimensionMismatch when `expected` is given and differs.
SegmentationMask read_mask(const std::filesystem::path& path,
                           std::optional<cv::Size> expected = std::nullopt);
void write_mask(const SegmentationMask& mask, const std::filesystem::path& path,
                MaskEncoding encoding = MaskEncoding::kBinary);

// Hue from flow direction, saturation from magnitude relative to the field
// maximum, full value. Returns 8-bit BGR.
cv::Mat render_angle_field(const FlowField& field);
void export_angle_field(const FlowField& field, const std::filesystem::path& path);

// Grayscale render of a [0, 1] probability map.
cv::Mat render_probability(const Grid<double>& probability);

}  // namespace motionseg
