#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include "motionseg/error.hpp"
#include "motionseg/flow_io.hpp"
#include "support/test_support.hpp"

using namespace motionseg;
using motionseg::testing::TempDir;

namespace {

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void append_float(std::vector<std::uint8_t>& out, float f) {
  std::uint8_t raw[4];
  std::memcpy(raw, &f, 4);
  out.insert(out.end(), raw, raw + 4);
}

void append_int(std::vector<std::uint8_t>& out, std::int32_t v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  out.insert(out.end(), raw, raw + 4);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kPrecondition;
}

}  // namespace

TEST(FloDecode, OneByOneZero) {
  std::vector<std::uint8_t> bytes;
  append_float(bytes, 202021.25f);
  append_int(bytes, 1);
  append_int(bytes, 1);
  append_float(bytes, 0.0f);
  append_float(bytes, 0.0f);
  const FlowField f = decode_flo(bytes);
  EXPECT_EQ(f.width(), 1);
  EXPECT_EQ(f.height(), 1);
  EXPECT_EQ(f.u[0], 0.0);
  EXPECT_EQ(f.v[0], 0.0);
}

TEST(FloEncode, TwoByOneLayout) {
  FlowField f(2, 1);
  f.u[0] = 1;
  f.u[1] = 2;
  f.v[0] = 3;
  f.v[1] = 4;
  const auto bytes = encode_flo(f);
  ASSERT_EQ(bytes.size(), 28u);

  std::vector<std::uint8_t> expected;
  append_float(expected, 202021.25f);
  append_int(expected, 2);
  append_int(expected, 1);
  for (float x : {1.0f, 3.0f, 2.0f, 4.0f}) append_float(expected, x);
  EXPECT_EQ(bytes, expected);
  // "PIEH" sentinel
  EXPECT_EQ(std::memcmp(bytes.data(), "PIEH", 4), 0);
}

TEST(FloDecode, BadMagic) {
  std::vector<std::uint8_t> bytes;
  append_float(bytes, 0.0f);
  append_int(bytes, 1);
  append_int(bytes, 1);
  append_float(bytes, 0.0f);
  append_float(bytes, 0.0f);
  EXPECT_EQ(code_of([&] { decode_flo(bytes); }), ErrorCode::kBadMagic);
}

TEST(FloDecode, Truncated) {
  FlowField f(3, 2);
  auto bytes = encode_flo(f);
  bytes.pop_back();
  EXPECT_EQ(code_of([&] { decode_flo(bytes); }), ErrorCode::kTruncated);
  bytes.push_back(0);
  bytes.push_back(0);
  EXPECT_EQ(code_of([&] { decode_flo(bytes); }), ErrorCode::kTruncated);
  std::vector<std::uint8_t> header_only(bytes.begin(), bytes.begin() + 8);
  EXPECT_EQ(code_of([&] { decode_flo(header_only); }), ErrorCode::kTruncated);
}

TEST(FloDecode, NonFiniteRejected) {
  for (float bad : {std::numeric_limits<float>::quiet_NaN(), std::numeric_limits<float>::infinity(),
                    -std::numeric_limits<float>::infinity()}) {
    std::vector<std::uint8_t> bytes;
    append_float(bytes, 202021.25f);
    append_int(bytes, 2);
    append_int(bytes, 1);
    append_float(bytes, 1.0f);
    append_float(bytes, 1.0f);
    append_float(bytes, 0.5f);
    append_float(bytes, bad);
    EXPECT_EQ(code_of([&] { decode_flo(bytes); }), ErrorCode::kNonFinite);
  }
}

TEST(FloEncode, EmptyFieldRejected) {
  FlowField empty;
  EXPECT_EQ(code_of([&] { encode_flo(empty); }), ErrorCode::kPrecondition);
  TempDir dir("flo_empty");
  EXPECT_EQ(code_of([&] { write_flo(empty, dir / "x.flo"); }), ErrorCode::kPrecondition);
  EXPECT_FALSE(std::filesystem::exists(dir / "x.flo"));
}

TEST(FloFile, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { read_flo("/nonexistent/dir/a.flo"); }), ErrorCode::kIo);
}

TEST(FloFile, RoundTripFieldsAndBytes) {
  std::mt19937_64 rng(7);
  TempDir dir("flo_rt");
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<int> side(1, 40);
    const FlowField f = motionseg::testing::random_flow(rng, side(rng), side(rng));
    const auto path = dir / "f.flo";
    write_flo(f, path);
    const FlowField g = read_flo(path);
    EXPECT_EQ(f, g);
    const auto bytes = file_bytes(path);
    const auto second = dir / "g.flo";
    write_flo(g, second);
    EXPECT_EQ(file_bytes(second), bytes);
  }
}

TEST(FloFile, DecodedValuesAreFinite) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint32_t> word;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> bytes;
    append_float(bytes, 202021.25f);
    append_int(bytes, 4);
    append_int(bytes, 4);
    for (int k = 0; k < 32; ++k) append_int(bytes, static_cast<std::int32_t>(word(rng)));
    try {
      const FlowField f = decode_flo(bytes);
      for (std::size_t i = 0; i < f.size(); ++i) {
        ASSERT_TRUE(std::isfinite(f.u[i]) && std::isfinite(f.v[i]));
      }
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
    }
  }
}

TEST(Mask, AllZeroRoundTrip) {
  TempDir dir("mask0");
  SegmentationMask m(13, 7);
  write_mask(m, dir / "m.png", MaskEncoding::kLabels);
  EXPECT_EQ(read_mask(dir / "m.png"), m);
}

TEST(Mask, LabelsAndBinaryExport) {
  TempDir dir("mask_labels");
  SegmentationMask m(3, 1);
  m.labels[0] = 0;
  m.labels[1] = 1;
  m.labels[2] = 2;
  write_mask(m, dir / "labels.png", MaskEncoding::kLabels);
  write_mask(m, dir / "binary.png", MaskEncoding::kBinary);
  const SegmentationMask labels = read_mask(dir / "labels.png");
  EXPECT_EQ(labels.labels[0], 0);
  EXPECT_EQ(labels.labels[1], 1);
  EXPECT_EQ(labels.labels[2], 2);
  const SegmentationMask binary = read_mask(dir / "binary.png");
  EXPECT_EQ(binary.labels[0], 0);
  EXPECT_EQ(binary.labels[1], 255);
  EXPECT_EQ(binary.labels[2], 255);
  EXPECT_EQ(binary.binary(), m.binary());
}

TEST(Mask, SixteenBitUnsupported) {
  TempDir dir("mask16");
  cv::Mat deep(4, 4, CV_16UC1, cv::Scalar(1000));
  ASSERT_TRUE(cv::imwrite((dir / "deep.png").string(), deep));
  EXPECT_EQ(code_of([&] { read_mask(dir / "deep.png"); }), ErrorCode::kUnsupported);
}

TEST(Mask, ExpectedSizeMismatch) {
  TempDir dir("mask_size");
  write_mask(SegmentationMask(5, 4), dir / "m.png");
  EXPECT_NO_THROW(read_mask(dir / "m.png", cv::Size(5, 4)));
  EXPECT_EQ(code_of([&] { read_mask(dir / "m.png", cv::Size(4, 5)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(Mask, UnreadableFile) {
  EXPECT_EQ(code_of([] { read_mask("/nonexistent/m.png"); }), ErrorCode::kIo);
}

TEST(AngleRender, ZeroFieldIsUniformNeutral) {
  const cv::Mat img = render_angle_field(FlowField(9, 6));
  ASSERT_EQ(img.type(), CV_8UC3);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      const auto px = img.at<cv::Vec3b>(y, x);
      EXPECT_EQ(px, cv::Vec3b(255, 255, 255));
    }
  }
}

TEST(AngleRender, ConstantFieldHasConstantHue) {
  FlowField f(8, 5);
  f.u.fill(1.0);
  const cv::Mat img = render_angle_field(f);
  const auto first = img.at<cv::Vec3b>(0, 0);
  EXPECT_NE(first, cv::Vec3b(255, 255, 255));
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) EXPECT_EQ(img.at<cv::Vec3b>(y, x), first);
  }
}

TEST(AngleRender, OppositeDirectionsDiffer) {
  FlowField f(2, 1);
  f.u[0] = 1.0;
  f.u[1] = -1.0;
  const cv::Mat img = render_angle_field(f);
  EXPECT_NE(img.at<cv::Vec3b>(0, 0), img.at<cv::Vec3b>(0, 1));
}
