#include "motionseg/superpixels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include <opencv2/imgproc.hpp>

namespace motionseg {

FeatureImage lab_features(const cv::Mat& frame) {
  require(!frame.empty(), ErrorCode::kPrecondition, "frame is empty");
  require(frame.depth() == CV_8U, ErrorCode::kUnsupported, "frame must be 8-bit");
  cv::Mat bgr;
  if (frame.channels() == 1) {
    cv::cvtColor(frame, bgr, cv::COLOR_GRAY2BGR);
  } else if (frame.channels() == 4) {
    cv::cvtColor(frame, bgr, cv::COLOR_BGRA2BGR);
  } else {
    bgr = frame;
  }
  cv::Mat scaled;
  bgr.convertTo(scaled, CV_32FC3, 1.0 / 255.0);
  cv::Mat lab;
  cv::cvtColor(scaled, lab, cv::COLOR_BGR2Lab);

  FeatureImage image{lab.cols, lab.rows, 3, {}};
  image.data.reserve(static_cast<std::size_t>(lab.total()) * 3);
  for (int y = 0; y < lab.rows; ++y) {
    const auto* row = lab.ptr<cv::Vec3f>(y);
    for (int x = 0; x < lab.cols; ++x) {
      image.data.insert(image.data.end(), {row[x][0], row[x][1], row[x][2]});
    }
  }
  return image;
}

FeatureImage flow_magnitude_features(const FlowField& flow) {
  flow.validate();
  FeatureImage image{flow.width(), flow.height(), 1, std::vector<float>(flow.size())};
  double max_magnitude = 0.0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    max_magnitude = std::max(max_magnitude, flow.magnitude(i));
  }
  const double gain = max_magnitude > 0.0 ? 100.0 / max_magnitude : 0.0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    image.data[i] = static_cast<float>(gain * flow.magnitude(i));
  }
  return image;
}

std::vector<std::size_t> SuperpixelMap::pixels_of(int id) const {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(counts.at(static_cast<std::size_t>(id))));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == id) out.push_back(i);
  }
  return out;
}

namespace {

struct Center {
  double x = 0.0;
  double y = 0.0;
  std::vector<double> feature;
};

// Union-find over connected fragments.
struct Fragments {
  std::vector<int> parent;
  std::vector<int> size;

  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
};

Grid<int> connected_fragments(const Grid<int>& labels, std::vector<int>& fragment_label) {
  Grid<int> fragment(labels.width(), labels.height(), -1);
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t seed = 0; seed < labels.size(); ++seed) {
    if (fragment[seed] >= 0) continue;
    fragment[seed] = next;
    fragment_label.push_back(labels[seed]);
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % static_cast<std::size_t>(labels.width()));
      const int y = static_cast<int>(i / static_cast<std::size_t>(labels.width()));
      constexpr int kDx[] = {1, -1, 0, 0};
      constexpr int kDy[] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int nx = x + kDx[d];
        const int ny = y + kDy[d];
        if (!labels.contains(nx, ny)) continue;
        const std::size_t j = labels.index(nx, ny);
        if (fragment[j] < 0 && labels[j] == labels[i]) {
          fragment[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  return fragment;
}

SuperpixelMap enforce_connectivity(const Grid<int>& labels) {
  std::vector<int> fragment_label;
  const Grid<int> fragment = connected_fragments(labels, fragment_label);
  const int fragments = static_cast<int>(fragment_label.size());

  Fragments uf;
  uf.parent.resize(static_cast<std::size_t>(fragments));
  std::iota(uf.parent.begin(), uf.parent.end(), 0);
  uf.size.assign(static_cast<std::size_t>(fragments), 0);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(fragments));
  for (std::size_t i = 0; i < fragment.size(); ++i) {
    ++uf.size[static_cast<std::size_t>(fragment[i])];
    members[static_cast<std::size_t>(fragment[i])].push_back(i);
  }

  // The largest fragment of each label keeps it; the rest are orphans.
  std::vector<int> main_fragment;
  for (int f = 0; f < fragments; ++f) {
    const auto label = static_cast<std::size_t>(fragment_label[static_cast<std::size_t>(f)]);
    if (label >= main_fragment.size()) main_fragment.resize(label + 1, -1);
    int& best = main_fragment[label];
    if (best < 0 || uf.size[static_cast<std::size_t>(f)] > uf.size[static_cast<std::size_t>(best)]) {
      best = f;
    }
  }
  std::vector<int> orphans;
  for (int f = 0; f < fragments; ++f) {
    const auto label = static_cast<std::size_t>(fragment_label[static_cast<std::size_t>(f)]);
    if (main_fragment[label] != f) orphans.push_back(f);
  }
  std::stable_sort(orphans.begin(), orphans.end(), [&](int a, int b) {
    return uf.size[static_cast<std::size_t>(a)] < uf.size[static_cast<std::size_t>(b)];
  });

  // An orphan may only join a group that already holds a main fragment, so
  // clusters of orphans cannot survive as superpixels of their own. Orphans
  // enclosed by other orphans wait for a later pass.
  std::vector<std::uint8_t> anchored(static_cast<std::size_t>(fragments), 0);
  for (const int f : main_fragment) {
    if (f >= 0) anchored[static_cast<std::size_t>(f)] = 1;
  }
  std::vector<int> pending = orphans;
  while (!pending.empty()) {
    std::vector<int> waiting;
    for (const int orphan : pending) {
      const int root = uf.find(orphan);
      int best = -1;
      for (const std::size_t i : members[static_cast<std::size_t>(orphan)]) {
        const int x = static_cast<int>(i % static_cast<std::size_t>(labels.width()));
        const int y = static_cast<int>(i / static_cast<std::size_t>(labels.width()));
        constexpr int kDx[] = {1, -1, 0, 0};
        constexpr int kDy[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          if (!labels.contains(x + kDx[d], y + kDy[d])) continue;
          const int other = uf.find(fragment(x + kDx[d], y + kDy[d]));
          if (other == root || !anchored[static_cast<std::size_t>(other)]) continue;
          const auto other_size = uf.size[static_cast<std::size_t>(other)];
          if (best < 0 || other_size > uf.size[static_cast<std::size_t>(best)] ||
              (other_size == uf.size[static_cast<std::size_t>(best)] && other < best)) {
            best = other;
          }
        }
      }
      if (best < 0) {
        waiting.push_back(orphan);
        continue;
      }
      uf.parent[static_cast<std::size_t>(root)] = best;
      uf.size[static_cast<std::size_t>(best)] += uf.size[static_cast<std::size_t>(root)];
    }
    // Every orphan touches some other fragment and each pass anchors at
    // least one new one, so this terminates.
    if (waiting.size() == pending.size()) break;
    pending = std::move(waiting);
  }

  SuperpixelMap map;
  map.labels = Grid<int>(labels.width(), labels.height(), -1);
  std::vector<int> relabel(static_cast<std::size_t>(fragments), -1);
  std::vector<Eigen::Vector2d> sums;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int root = uf.find(fragment(x, y));
      int& id = relabel[static_cast<std::size_t>(root)];
      if (id < 0) {
        id = map.count();
        map.counts.push_back(0);
        sums.emplace_back(0.0, 0.0);
      }
      map.labels(x, y) = id;
      ++map.counts[static_cast<std::size_t>(id)];
      sums[static_cast<std::size_t>(id)] += Eigen::Vector2d(x, y);
    }
  }
  map.centroids.resize(sums.size());
  for (std::size_t k = 0; k < sums.size(); ++k) map.centroids[k] = sums[k] / map.counts[k];
  return map;
}

}  // namespace

SuperpixelMap slic(const FeatureImage& image, const SlicParams& params) {
  require(image.width > 0 && image.height > 0 && image.channels > 0, ErrorCode::kPrecondition,
          "image is empty");
  require(image.data.size() ==
              static_cast<std::size_t>(image.width) * image.height * image.channels,
          ErrorCode::kPrecondition, "feature buffer size mismatch");
  require(params.region_size >= 2, ErrorCode::kPrecondition, "region_size must be >= 2");
  require(params.regularizer >= 0.0 && params.iterations >= 1, ErrorCode::kPrecondition,
          "invalid SLIC parameters");

  const int w = image.width;
  const int h = image.height;
  const int c = image.channels;
  const double step = params.region_size;
  const double compactness = params.regularizer * params.region_size;
  const double spatial_weight = (compactness * compactness) / (step * step);

  const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / step)));
  const double step_x = static_cast<double>(w) / nx;
  const double step_y = static_cast<double>(h) / ny;

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx * ny));
  Grid<int> labels(w, h, 0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Center center;
      center.x = (i + 0.5) * step_x - 0.5;
      center.y = (j + 0.5) * step_y - 0.5;
      const int px = std::clamp(static_cast<int>(std::lround(center.x)), 0, w - 1);
      const int py = std::clamp(static_cast<int>(std::lround(center.y)), 0, h - 1);
      const float* f = image.pixel(px, py);
      center.feature.assign(f, f + c);
      centers.push_back(std::move(center));
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = std::min(nx - 1, static_cast<int>(x / step_x));
      const int j = std::min(ny - 1, static_cast<int>(y / step_y));
      labels(x, y) = j * nx + i;
    }
  }

  Grid<double> distance(w, h);
  const int window = static_cast<int>(std::ceil(std::max(step_x, step_y)));
  for (int iteration = 0; iteration < params.iterations; ++iteration) {
    distance.fill(std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& center = centers[k];
      const int x0 = std::max(0, static_cast<int>(std::floor(center.x)) - window);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(center.x)) + window);
      const int y0 = std::max(0, static_cast<int>(std::floor(center.y)) - window);
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(center.y)) + window);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const float* f = image.pixel(x, y);
          double appearance = 0.0;
          for (int ch = 0; ch < c; ++ch) {
            const double d = f[ch] - center.feature[static_cast<std::size_t>(ch)];
            appearance += d * d;
          }
          const double dx = x - center.x;
          const double dy = y - center.y;
          const double d = appearance + spatial_weight * (dx * dx + dy * dy);
          if (d < distance(x, y)) {
            distance(x, y) = d;
            labels(x, y) = static_cast<int>(k);
          }
        }
      }
    }

    std::vector<double> sums(centers.size() * static_cast<std::size_t>(c + 2), 0.0);
    std::vector<int> counts(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto k = static_cast<std::size_t>(labels(x, y));
        double* s = sums.data() + k * static_cast<std::size_t>(c + 2);
        s[0] += x;
        s[1] += y;
        const float* f = image.pixel(x, y);
        for (int ch = 0; ch < c; ++ch) s[2 + ch] += f[ch];
        ++counts[k];
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (counts[k] == 0) continue;
      const double* s = sums.data() + k * static_cast<std::size_t>(c + 2);
      centers[k].x = s[0] / counts[k];
      centers[k].y = s[1] / counts[k];
      for (int ch = 0; ch < c; ++ch) centers[k].feature[static_cast<std::size_t>(ch)] = s[2 + ch] / counts[k];
    }
  }

  return enforce_connectivity(labels);
}

namespace {

std::array<Eigen::Vector2d, 4> corner_points(int width, int height) {
  return {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(width, 0.0), Eigen::Vector2d(0.0, height),
          Eigen::Vector2d(width, height)};
}

std::array<std::vector<int>, 4> collect_corners(const SuperpixelMap& map, double corner_fraction) {
  require(!map.labels.empty(), ErrorCode::kPrecondition, "superpixel map is empty");
  require(corner_fraction >= 0.0 && corner_fraction <= 1.0, ErrorCode::kPrecondition,
          "corner_fraction must lie in [0, 1]");
  const double w = map.labels.width();
  const double h = map.labels.height();
  const double cw = w * std::sqrt(corner_fraction);
  const double ch = h * std::sqrt(corner_fraction);
  std::array<std::vector<int>, 4> corners;
  for (int id = 0; id < map.count(); ++id) {
    // Pixel (x, y) covers [x, x + 1) x [y, y + 1).
    const double px = map.centroids[static_cast<std::size_t>(id)].x() + 0.5;
    const double py = map.centroids[static_cast<std::size_t>(id)].y() + 0.5;
    const bool left = px <= cw;
    const bool right = px >= w - cw;
    const bool top = py <= ch;
    const bool bottom = py >= h - ch;
    if (left && top) corners[0].push_back(id);
    if (right && top) corners[1].push_back(id);
    if (left && bottom) corners[2].push_back(id);
    if (right && bottom) corners[3].push_back(id);
  }
  return corners;
}

}  // namespace

std::array<std::vector<int>, 4> corner_superpixels(const SuperpixelMap& map,
                                                   double corner_fraction) {
  auto corners = collect_corners(map, corner_fraction);
  for (const auto& corner : corners) {
    if (corner.empty()) throw Error(ErrorCode::kEmptyCorner, "corner rectangle holds no centroid");
  }
  return corners;
}

std::array<std::vector<int>, 4> corner_superpixels_or_nearest(const SuperpixelMap& map,
                                                              double corner_fraction) {
  auto corners = collect_corners(map, corner_fraction);
  const auto points = corner_points(map.labels.width(), map.labels.height());
  for (std::size_t k = 0; k < corners.size(); ++k) {
    if (!corners[k].empty()) continue;
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int id = 0; id < map.count(); ++id) {
      const Eigen::Vector2d centre =
          map.centroids[static_cast<std::size_t>(id)] + Eigen::Vector2d(0.5, 0.5);
      const double d = (centre - points[k]).squaredNorm();
      if (d < best) {
        best = d;
        nearest = id;
      }
    }
    corners[k].push_back(nearest);
  }
  return corners;
}

}  // namespace motionseg
