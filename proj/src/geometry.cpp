#include "deskdoc/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace deskdoc {

namespace {

double clamp01(double v, long* clamp_count) {
  if (v < 0.0) {
    if (clamp_count) ++*clamp_count;
    return 0.0;
  }
  if (v > 1.0) {
    if (clamp_count) ++*clamp_count;
    return 1.0;
  }
  return v;
}

int bin_index(double coord, int n_bins) {
  int idx = static_cast<int>(std::floor(coord * n_bins));
  return std::clamp(idx, 0, n_bins - 1);
}

// Union-find over token indices.
struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

Box normalize_box(double px1, double py1, double px3, double py3,
                  double page_w, double page_h, long* clamp_count) {
  if (page_w <= 0.0 || page_h <= 0.0) {
    throw ShapeError("normalize_box: page dimensions must be positive");
  }
  Box b;
  b.x1 = clamp01(px1 / page_w, clamp_count);
  b.y1 = clamp01(py1 / page_h, clamp_count);
  b.x3 = clamp01(px3 / page_w, clamp_count);
  b.y3 = clamp01(py3 / page_h, clamp_count);
  if (b.x1 > b.x3) std::swap(b.x1, b.x3);
  if (b.y1 > b.y3) std::swap(b.y1, b.y3);
  return b;
}

SpatialIndices quantize_spatial(const Box& box, int n_bins) {
  if (n_bins < 1) throw ShapeError("quantize_spatial: n_bins must be >= 1");
  SpatialIndices s;
  s.x1 = bin_index(box.x1, n_bins);
  s.x3 = bin_index(box.x3, n_bins);
  s.y1 = bin_index(box.y1, n_bins);
  s.y3 = bin_index(box.y3, n_bins);
  s.height = bin_index(box.y3 - box.y1, n_bins);
  s.width = bin_index(box.x3 - box.x1, n_bins);
  return s;
}

GridConfig grid_from_string(const std::string& s) {
  auto x = s.find('x');
  if (x == std::string::npos || x == 0 || x + 1 >= s.size()) {
    throw DataError("grid must look like MxN, got " + s);
  }
  GridConfig g;
  try {
    g.cols = std::stoi(s.substr(0, x));
    g.rows = std::stoi(s.substr(x + 1));
  } catch (const std::exception&) {
    throw DataError("grid must look like MxN, got " + s);
  }
  if (!g.valid()) throw DataError("grid extents must be >= 1, got " + s);
  return g;
}

int grid_label(const Box& box, const GridConfig& grid) {
  if (!grid.valid()) throw ShapeError("grid_label: grid must have cols,rows >= 1");
  if (box.x1 >= 1.0 || box.y1 >= 1.0) return kGridIgnored;
  int cx = std::min(static_cast<int>(std::floor(box.x1 * grid.cols)), grid.cols - 1);
  int cy = std::min(static_cast<int>(std::floor(box.y1 * grid.rows)), grid.rows - 1);
  return cx + cy * grid.cols;
}

std::vector<int> assign_lines(const std::vector<Box>& boxes) {
  const int n = static_cast<int>(boxes.size());
  if (n == 0) return {};
  DisjointSet ds(n);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      double overlap = std::min(boxes[a].y3, boxes[b].y3) - std::max(boxes[a].y1, boxes[b].y1);
      double smaller = std::min(boxes[a].height(), boxes[b].height());
      if (overlap > 0.5 * smaller) ds.unite(a, b);
    }
  }

  // Group roots, order lines by mean y (first-token index breaks ties).
  std::vector<int> root(n);
  for (int i = 0; i < n; ++i) root[i] = ds.find(i);
  struct LineInfo {
    double mean_y = 0.0;
    int count = 0;
    int first = 0;
  };
  std::vector<int> roots;
  std::vector<LineInfo> info;
  std::vector<int> root_slot(n, -1);
  for (int i = 0; i < n; ++i) {
    int r = root[i];
    if (root_slot[r] < 0) {
      root_slot[r] = static_cast<int>(roots.size());
      roots.push_back(r);
      info.push_back({0.0, 0, i});
    }
    LineInfo& li = info[root_slot[r]];
    li.mean_y += 0.5 * (boxes[i].y1 + boxes[i].y3);
    li.count += 1;
  }
  std::vector<int> order(roots.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double ya = info[a].mean_y / info[a].count;
    double yb = info[b].mean_y / info[b].count;
    if (ya != yb) return ya < yb;
    return info[a].first < info[b].first;
  });
  std::vector<int> line_of_slot(roots.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) line_of_slot[order[rank]] = static_cast<int>(rank);

  std::vector<int> result(n);
  for (int i = 0; i < n; ++i) result[i] = line_of_slot[root_slot[root[i]]];
  return result;
}

int line_distance_label(int line_i, int line_j) {
  int d = std::abs(line_i - line_j);
  return d >= 2 ? 2 : d;
}

std::vector<TokenPair> sample_token_pairs(const std::vector<int>& line_ids,
                                          int k_pairs, Rng& rng,
                                          bool class_balanced) {
  const int n = static_cast<int>(line_ids.size());
  if (n < 2 || k_pairs < 1) return {};

  std::array<std::vector<TokenPair>, 3> buckets;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      int cls = line_distance_label(line_ids[i], line_ids[j]);
      buckets[cls].push_back({i, j, cls});
    }
  }
  for (auto& bucket : buckets) shuffle_vec(bucket, rng);

  if (!class_balanced) {
    std::vector<TokenPair> all;
    for (auto& bucket : buckets)
      all.insert(all.end(), bucket.begin(), bucket.end());
    shuffle_vec(all, rng);
    if (static_cast<int>(all.size()) > k_pairs) all.resize(k_pairs);
    return all;
  }

  std::vector<TokenPair> picked;
  std::array<std::size_t, 3> next{0, 0, 0};
  while (static_cast<int>(picked.size()) < k_pairs) {
    bool any = false;
    for (int cls = 0; cls < 3 && static_cast<int>(picked.size()) < k_pairs; ++cls) {
      if (next[cls] < buckets[cls].size()) {
        picked.push_back(buckets[cls][next[cls]++]);
        any = true;
      }
    }
    if (!any) break;  // every class exhausted
  }
  return picked;
}

}  // namespace deskdoc
