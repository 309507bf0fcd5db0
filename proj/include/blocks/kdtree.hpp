#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace bw {

template <int Dim>
using KdPoint = std::array<double, Dim>;

template <int Dim>
double squared_distance(const KdPoint<Dim>& a, const KdPoint<Dim>& b) {
  double s = 0.0;
  for (int i = 0; i < Dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Static k-d tree with exact nearest-neighbour queries. Among equidistant
/// points the one with the lowest insertion index is returned, so results
/// match a linear scan that keeps the first minimum.
template <int Dim>
class KdTree {
 public:
  struct Result {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;
  explicit KdTree(std::vector<KdPoint<Dim>> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const KdPoint<Dim>& point(std::size_t i) const { return points_[i]; }

  Result nearest(const KdPoint<Dim>& q) const {
    Result best;
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Node {
    std::size_t begin;
    std::size_t end;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = kNone;
    std::size_t right = kNone;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    KdPoint<Dim> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      for (int a = 0; a < Dim; ++a) {
        lo[a] = std::min(lo[a], points_[order_[i]][a]);
        hi[a] = std::max(hi[a], points_[order_[i]][a]);
      }
    }
    int axis = 0;
    for (int a = 1; a < Dim; ++a) {
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    }
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    const double split = points_[order_[mid]][axis];
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    // Left holds [begin, mid) with coords <= split, right [mid, end) >= split.
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static bool better(double d2, std::size_t idx, const Result& best) {
    return d2 < best.squared_distance ||
           (d2 == best.squared_distance && idx < best.index);
  }

  void search(std::size_t node_id, const KdPoint<Dim>& q, Result& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = squared_distance<Dim>(points_[idx], q);
        if (better(d2, idx, best)) best = {idx, d2};
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    // Visit the far side on equality too: a tie there may have a lower index.
    if (diff * diff <= best.squared_distance) search(far, q, best);
  }

  std::vector<KdPoint<Dim>> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace bw
