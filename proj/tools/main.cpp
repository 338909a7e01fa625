#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>

#include "motionseg/config.hpp"
#include "motionseg/error.hpp"
#include "motionseg/eval.hpp"
#include "motionseg/flow_io.hpp"
#include "motionseg/pipeline.hpp"
#include "motionseg/synth.hpp"

namespace fs = std::filesystem;
using namespace motionseg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::ranges::sort(out);
  return out;
}

std::string frame_name(std::size_t t, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu%s", t, ext);
  return buf;
}

struct SegmentArgs {
  fs::path input;
  fs::path out = "out";
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> constant_kappa;
  bool no_ransac = false;
  bool labels = false;
};

int run_segment(const SegmentArgs& args) {
  PipelineConfig config = args.config ? load_config(*args.config) : PipelineConfig{};
  if (args.seed) config.seed = *args.seed;
  if (args.a) config.von_mises.a = *args.a;
  if (args.b) config.von_mises.b = *args.b;
  if (args.constant_kappa) {
    config.von_mises.a = *args.constant_kappa;
    config.von_mises.b = 0.0;
  }
  if (args.no_ransac) config.use_ransac = false;
  config.validate();

  const auto flow_paths = files_with_extension(args.input, ".flo");
  if (flow_paths.empty()) throw Error(ErrorCode::kIo, "no .flo files in " + args.input.string());
  const auto frame_paths = files_with_extension(args.input, ".png");

  fs::create_directories(args.out);
  std::ofstream diagnostics(args.out / "diagnostics.jsonl");
  MotionSegmenter segmenter(config);
  for (std::size_t t = 0; t < flow_paths.size(); ++t) {
    const FlowField flow = read_flo(flow_paths[t]);
    cv::Mat frame;
    if (t == 0 && !frame_paths.empty()) {
      frame = cv::imread(frame_paths[0].string(), cv::IMREAD_COLOR);
      if (frame.empty()) throw Error(ErrorCode::kIo, "cannot read " + frame_paths[0].string());
    }
    const FrameResult r = segmenter.process(flow, frame.empty() ? nullptr : &frame);
    write_mask(r.mask, args.out / frame_name(t, ".png"),
               args.labels ? MaskEncoding::kLabels : MaskEncoding::kBinary);
    diagnostics << r.diagnostics.to_json().dump() << '\n';
  }
  return kOk;
}

int run_synth(const std::string& scene, std::uint64_t seed, double noise, const fs::path& out) {
  std::vector<SceneSpec> scenes;
  if (scene == "all") {
    scenes = standard_suite(seed, noise);
  } else {
    scenes.push_back(standard_scene(scene, seed, noise));
  }
  for (const auto& spec : scenes) {
    const SyntheticSequence seq = generate(spec);
    const fs::path dir = out / spec.name;
    fs::create_directories(dir / "flow");
    fs::create_directories(dir / "gt");
    for (std::size_t t = 0; t < seq.flows.size(); ++t) {
      write_flo(seq.flows[t], dir / "flow" / frame_name(t, ".flo"));
      write_mask(seq.truth[t], dir / "gt" / frame_name(t, ".png"), MaskEncoding::kBinary);
    }
    std::ofstream(dir / "manifest.json") << manifest_json(spec, seq).dump(2) << '\n';
  }
  return kOk;
}

VideoScore score_video(const std::string& name, const fs::path& pred, const fs::path& gt) {
  std::vector<FrameScore> frames;
  int index = 0;
  for (const auto& truth_path : files_with_extension(gt, ".png")) {
    const fs::path pred_path = pred / truth_path.filename();
    ++index;
    if (!fs::exists(pred_path)) continue;
    const SegmentationMask truth = read_mask(truth_path);
    const SegmentationMask p =
        read_mask(pred_path, cv::Size(truth.width(), truth.height()));
    frames.push_back(score_frame(index - 1, p.binary(), truth.binary()));
  }
  if (frames.empty()) {
    throw Error(ErrorCode::kIo, "no predicted frame matches the ground truth in " + gt.string());
  }
  return aggregate_video(name, std::move(frames));
}

int run_eval(const fs::path& pred, const fs::path& gt) {
  std::vector<VideoScore> videos;
  if (files_with_extension(gt, ".png").empty()) {
    // One subdirectory per video.
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(gt)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::ranges::sort(dirs);
    for (const auto& d : dirs) {
      const auto name = d.filename().string();
      videos.push_back(score_video(name, pred / name, d));
    }
  } else {
    videos.push_back(score_video(gt.filename().string(), pred, gt));
  }
  std::cout << to_json(aggregate_dataset(std::move(videos))).dump(2) << '\n';
  return kOk;
}

int run_viz(const fs::path& flow_path, const fs::path& out) {
  export_angle_field(read_flo(flow_path), out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-camera motion segmentation from optical flow"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Segment a directory of .flo files");
  segment->add_option("input", seg.input, "Directory of .flo files (optional .png frames)")
      ->required();
  segment->add_option("--out", seg.out, "Output directory");
  segment->add_option("--config", seg.config, "JSON config file");
  segment->add_option("--seed", seg.seed, "RANSAC seed");
  segment->add_option("--a", seg.a, "Concentration multiplier a");
  segment->add_option("--b", seg.b, "Concentration exponent b");
  segment->add_option("--constant-kappa", seg.constant_kappa, "Use kappa = v everywhere (b = 0)");
  segment->add_flag("--no-ransac", seg.no_ransac, "Fit the first background to every pixel");
  segment->add_flag("--labels", seg.labels, "Write label indices instead of binary masks");

  std::string scene = "all";
  std::uint64_t synth_seed = 0;
  double noise = 0.05;
  fs::path synth_out = "synthetic";
  auto* synth = app.add_subcommand("synth", "Write synthetic sequences with ground truth");
  synth->add_option("--scene", scene, "Scene name or 'all'");
  synth->add_option("--seed", synth_seed, "Noise seed");
  synth->add_option("--noise", noise, "Flow noise standard deviation (pixels)")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--out", synth_out, "Output directory");

  fs::path pred_dir, gt_dir;
  auto* eval = app.add_subcommand("eval", "Score predicted masks against ground truth");
  eval->add_option("pred", pred_dir, "Predicted masks")->required();
  eval->add_option("gt", gt_dir, "Ground-truth masks (or one subdirectory per video)")->required();

  fs::path viz_in, viz_out = "angle.png";
  auto* viz = app.add_subcommand("viz", "Render the flow angle field of a .flo file");
  viz->add_option("flow", viz_in, ".flo file")->required();
  viz->add_option("--out", viz_out, "Output PNG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*segment) return run_segment(seg);
    if (*synth) return run_synth(scene, synth_seed, noise, synth_out);
    if (*eval) return run_eval(pred_dir, gt_dir);
    if (*viz) return run_viz(viz_in, viz_out);
  } catch (const Error& e) {
    std::cerr << "motionseg: " << e.what() << '\n';
    if (e.code() == ErrorCode::kConfig) return kUsage;
    return is_numerical(e.code()) ? kNumerical : kData;
  } catch (const std::exception& e) {
    std::cerr << "motionseg: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
