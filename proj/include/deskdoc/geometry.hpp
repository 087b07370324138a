#pragma once

#include <vector>

#include "deskdoc/common.hpp"

namespace deskdoc {

// Word bounding box in normalized page coordinates, top-left (x1,y1) and
// bottom-right (x3,y3), all in [0,1].
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x3 = 0.0;
  double y3 = 0.0;

  double width() const { return x3 - x1; }
  double height() const { return y3 - y1; }
};

// Virtual m x n grid over the normalized page. Cell extents are 1/cols and
// 1/rows; only cols/rows are stored so the geometry stays rational.
struct GridConfig {
  int cols = 4;  // m, cells per row
  int rows = 4;  // n

  int cells() const { return cols * rows; }
  bool valid() const { return cols >= 1 && rows >= 1; }
};

// Parses "MxN" (e.g. "4x4", "12x12").
GridConfig grid_from_string(const std::string& s);

// Label for tokens whose top-left corner sits on the far page boundary.
constexpr int kGridIgnored = -1;

// Quantized bin indices feeding the spatial embedding tables.
struct SpatialIndices {
  int x1 = 0;
  int x3 = 0;
  int y1 = 0;
  int y3 = 0;
  int height = 0;
  int width = 0;
};

// Divides raw pixel coordinates by the page extent, clamps into [0,1] and
// enforces corner order. Out-of-page inputs are clamped and counted via
// clamp_count when provided.
Box normalize_box(double px1, double py1, double px3, double py3,
                  double page_w, double page_h, long* clamp_count = nullptr);

// index = min(floor(coord * n_bins), n_bins - 1), same rule for height/width.
SpatialIndices quantize_spatial(const Box& box, int n_bins);

// Raster-scan cell of the box's top-left corner:
//   label = floor(x1 * cols) + floor(y1 * rows) * cols
// Returns kGridIgnored when x1 == 1 or y1 == 1.
int grid_label(const Box& box, const GridConfig& grid);

// Clusters tokens into text lines: boxes whose vertical intervals overlap by
// more than 50% of the smaller height share a line, transitively. Lines are
// numbered 0.. in increasing mean-y order.
std::vector<int> assign_lines(const std::vector<Box>& boxes);

// |line_i - line_j| quantized to {0, 1, 2}: distances of 2 or more map to 2.
int line_distance_label(int line_i, int line_j);

struct TokenPair {
  int i = 0;
  int j = 0;
  int cls = 0;
};

// Draws k_pairs distinct unordered token pairs labelled with their line
// distance class. Balanced mode round-robins over the classes present in the
// document, sampling uniformly without replacement inside each class.
// Fewer than two tokens yields an empty set.
std::vector<TokenPair> sample_token_pairs(const std::vector<int>& line_ids,
                                          int k_pairs, Rng& rng,
                                          bool class_balanced = true);

}  // namespace deskdoc
