#include "motionseg/flow_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace motionseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPrecondition: return "Precondition";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kZeroPrediction: return "ZeroPrediction";
    case ErrorCode::kDegenerateFlow: return "DegenerateFlow";
    case ErrorCode::kEmptyCorner: return "EmptyCorner";
    case ErrorCode::kInitFailure: return "InitFailure";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::kZeroPrediction || code == ErrorCode::kDegenerateFlow ||
         code == ErrorCode::kInitFailure;
}

double FlowField::magnitude(std::size_t i) const { return std::hypot(u[i], v[i]); }

double FlowField::angle(std::size_t i) const { return std::atan2(v[i], u[i]); }

void FlowField::validate() const {
  require(!u.empty(), ErrorCode::kPrecondition, "flow field is empty");
  require(u.same_shape(v), ErrorCode::kPrecondition, "flow components differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) {
      throw Error(ErrorCode::kNonFinite, "flow component at index " + std::to_string(i));
    }
  }
}

Grid<std::uint8_t> SegmentationMask::binary() const {
  Grid<std::uint8_t> out(labels.width(), labels.height(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] > 0 ? 1 : 0;
  return out;
}

namespace {

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  value = to_little_endian(value);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return to_little_endian(value);
}

}  // namespace

std::vector<std::uint8_t> encode_flo(const FlowField& field) {
  field.validate();
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * field.size());
  put(out, kFloMagic);
  put(out, static_cast<std::int32_t>(field.width()));
  put(out, static_cast<std::int32_t>(field.height()));
  for (std::size_t i = 0; i < field.size(); ++i) {
    put(out, static_cast<float>(field.u[i]));
    put(out, static_cast<float>(field.v[i]));
  }
  return out;
}

FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::kTruncated, "missing .flo header");
  if (get<float>(bytes, 0) != kFloMagic) throw Error(ErrorCode::kBadMagic, "not a .flo file");
  if (bytes.size() < 12) throw Error(ErrorCode::kTruncated, "missing .flo dimensions");
  const auto width = get<std::int32_t>(bytes, 4);
  const auto height = get<std::int32_t>(bytes, 8);
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kPrecondition, "non-positive .flo dimensions");
  }
  const auto expected = 12 + 8 * static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kTruncated, "expected " + std::to_string(expected) + " bytes, got " +
                                           std::to_string(bytes.size()));
  }
  FlowField field(width, height);
  std::size_t offset = 12;
  for (std::size_t i = 0; i < field.size(); ++i, offset += 8) {
    field.u[i] = get<float>(bytes, offset);
    field.v[i] = get<float>(bytes, offset + 4);
  }
  field.validate();
  return field;
}

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_flo(bytes);
}

void write_flo(const FlowField& field, const std::filesystem::path& path) {
  const auto bytes = encode_flo(field);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

SegmentationMask read_mask(const std::filesystem::path& path, std::optional<cv::Size> expected) {
  const cv::Mat image = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (image.empty()) throw Error(ErrorCode::kIo, "cannot read mask " + path.string());
  if (image.depth() != CV_8U) {
    throw Error(ErrorCode::kUnsupported, "mask must be 8-bit: " + path.string());
  }
  cv::Mat gray;
  if (image.channels() == 1) {
    gray = image;
  } else {
    // Colour-encoded masks are accepted only when every channel agrees.
    std::vector<cv::Mat> planes;
    cv::split(image, planes);
    for (std::size_t c = 1; c < std::min<std::size_t>(planes.size(), 3); ++c) {
      if (cv::countNonZero(planes[c] != planes[0]) != 0) {
        throw Error(ErrorCode::kUnsupported, "mask is not grayscale: " + path.string());
      }
    }
    gray = planes[0];
  }
  if (expected && gray.size() != *expected) {
    throw Error(ErrorCode::kDimensionMismatch, "mask size differs from flow: " + path.string());
  }
  SegmentationMask mask(gray.cols, gray.rows);
  for (int y = 0; y < gray.rows; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) mask.labels(x, y) = row[x];
  }
  return mask;
}

void write_mask(const SegmentationMask& mask, const std::filesystem::path& path,
                MaskEncoding encoding) {
  require(!mask.labels.empty(), ErrorCode::kPrecondition, "mask is empty");
  cv::Mat image(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = image.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) {
      const int label = mask.labels(x, y);
      if (encoding == MaskEncoding::kBinary) {
        row[x] = label > 0 ? 255 : 0;
      } else {
        require(label >= 0 && label <= 255, ErrorCode::kUnsupported,
                "label does not fit in 8 bits");
        row[x] = static_cast<std::uint8_t>(label);
      }
    }
  }
  if (!cv::imwrite(path.string(), image)) {
    throw Error(ErrorCode::kIo, "cannot write mask " + path.string());
  }
}

cv::Mat render_angle_field(const FlowField& field) {
  field.validate();
  double max_magnitude = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    max_magnitude = std::max(max_magnitude, field.magnitude(i));
  }
  cv::Mat hsv(field.height(), field.width(), CV_32FC3);
  for (int y = 0; y < field.height(); ++y) {
    auto* row = hsv.ptr<cv::Vec3f>(y);
    for (int x = 0; x < field.width(); ++x) {
      const auto i = field.u.index(x, y);
      double hue = field.angle(i) * 180.0 / std::numbers::pi;
      if (hue < 0.0) hue += 360.0;
      const double saturation = max_magnitude > 0.0 ? field.magnitude(i) / max_magnitude : 0.0;
      row[x] = cv::Vec3f(static_cast<float>(hue), static_cast<float>(saturation), 1.0f);
    }
  }
  cv::Mat bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  cv::Mat out;
  bgr.convertTo(out, CV_8UC3, 255.0);
  return out;
}

void export_angle_field(const FlowField& field, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), render_angle_field(field))) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
}

cv::Mat render_probability(const Grid<double>& probability) {
  cv::Mat out(probability.height(), probability.width(), CV_8UC1);
  for (int y = 0; y < probability.height(); ++y) {
    auto* row = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < probability.width(); ++x) {
      row[x] = cv::saturate_cast<std::uint8_t>(std::lround(255.0 * probability(x, y)));
    }
  }
  return out;
}

}  // namespace motionseg
