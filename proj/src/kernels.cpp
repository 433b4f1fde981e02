#include "scenegram/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenegram {

namespace {

// Points per block in the parallel stats kernel. Blocks are reduced in order,
// so the result does not depend on the thread count.
constexpr std::size_t kBlock = 4096;

void check_labels(std::span<const Eigen::Vector3d> points, std::span<const int> labels, int segments) {
  if (points.size() != labels.size()) throw std::invalid_argument("accumulate_stats: one label per point required");
  for (int l : labels) {
    if (l < 0 || l >= segments) throw std::invalid_argument("accumulate_stats: label out of range");
  }
}

void accumulate_into(SegmentStats& s, const SegmentStats& add) {
  if (add.point_count == 0) return;
  s = s.point_count == 0 ? add : merge_stats(s, add);
}

std::vector<Eigen::Vector3d> boundary_samples(const Rect3& r, double step) {
  std::vector<Eigen::Vector3d> out;
  const Eigen::Vector3d corners[4] = {r.origin, r.origin + r.u, r.origin + r.u + r.v, r.origin + r.v};
  for (int e = 0; e < 4; ++e) {
    const Eigen::Vector3d& a = corners[e];
    const Eigen::Vector3d& b = corners[(e + 1) % 4];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / n));
  }
  return out;
}

}  // namespace

std::vector<SegmentStats> accumulate_stats(std::span<const Eigen::Vector3d> points, std::span<const int> labels,
                                           int segments, std::span<const double> hull_areas, Execution exec) {
  check_labels(points, labels, segments);
  std::vector<SegmentStats> out(segments);
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < points.size(); ++i) out[labels[i]].add_point(points[i]);
  } else {
    const std::size_t blocks = (points.size() + kBlock - 1) / kBlock;
    std::vector<std::vector<SegmentStats>> partial(blocks, std::vector<SegmentStats>(segments));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
      const std::size_t hi = std::min(points.size(), lo + kBlock);
      for (std::size_t i = lo; i < hi; ++i) partial[b][labels[i]].add_point(points[i]);
    }
    for (const auto& block : partial) {
      for (int s = 0; s < segments; ++s) accumulate_into(out[s], block[s]);
    }
  }
  if (!hull_areas.empty()) {
    if (static_cast<int>(hull_areas.size()) != segments) {
      throw std::invalid_argument("accumulate_stats: one hull area per segment required");
    }
    for (int s = 0; s < segments; ++s) out[s].hull_area = hull_areas[s];
  }
  return out;
}

double point_rect_distance(const Eigen::Vector3d& p, const Rect3& r) {
  const Eigen::Vector3d d = p - r.origin;
  const double s = std::clamp(d.dot(r.u) / r.u.squaredNorm(), 0.0, 1.0);
  const double t = std::clamp(d.dot(r.v) / r.v.squaredNorm(), 0.0, 1.0);
  return (r.origin + s * r.u + t * r.v - p).norm();
}

double rect_distance(const Rect3& a, const Rect3& b, double step) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : boundary_samples(a, step)) best = std::min(best, point_rect_distance(p, b));
  for (const auto& p : boundary_samples(b, step)) best = std::min(best, point_rect_distance(p, a));
  return best;
}

std::vector<double> rect_distance_matrix(std::span<const Rect3> rects, Execution exec, double step) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rects.size());
  std::vector<double> out(static_cast<std::size_t>(n * n), 0.0);
  auto row = [&](std::ptrdiff_t i) {
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      const double d = rect_distance(rects[i], rects[j], step);
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  };
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) row(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) row(i);
  }
  return out;
}

std::vector<ParseOutcome> parse_many(std::span<const Scene> scenes, const TrainedGrammar& tg,
                                     const ParseRequest& request, Execution exec) {
  std::vector<ParseOutcome> out(scenes.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(scenes.size());
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = parse_scene(scenes[i], tg, request);
    return out;
  }
  // Exceptions may not leave an OpenMP region; carry the first one out.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = parse_scene(scenes[i], tg, request);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace scenegram
