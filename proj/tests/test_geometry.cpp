#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "deskdoc/geometry.hpp"
#include "doctest.h"

using namespace deskdoc;

namespace {

// Independent oracle: scan every cell and test half-open containment of the
// top-left corner.
int grid_label_oracle(const Box& box, const GridConfig& g) {
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      double lo_x = static_cast<double>(c) / g.cols;
      double hi_x = static_cast<double>(c + 1) / g.cols;
      double lo_y = static_cast<double>(r) / g.rows;
      double hi_y = static_cast<double>(r + 1) / g.rows;
      if (box.x1 >= lo_x && box.x1 < hi_x && box.y1 >= lo_y && box.y1 < hi_y) {
        return c + r * g.cols;
      }
    }
  }
  return kGridIgnored;
}

// Independent oracle for line clustering: explicit adjacency + BFS closure.
std::vector<int> assign_lines_oracle(const std::vector<Box>& boxes) {
  const int n = static_cast<int>(boxes.size());
  std::vector<std::vector<int>> adj(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      double overlap = std::min(boxes[a].y3, boxes[b].y3) - std::max(boxes[a].y1, boxes[b].y1);
      double smaller = std::min(boxes[a].height(), boxes[b].height());
      if (overlap > 0.5 * smaller) adj[a].push_back(b);
    }
  std::vector<int> comp(n, -1);
  int n_comp = 0;
  for (int start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    std::vector<int> queue{start};
    comp[start] = n_comp;
    while (!queue.empty()) {
      int cur = queue.back();
      queue.pop_back();
      for (int nb : adj[cur])
        if (comp[nb] < 0) {
          comp[nb] = n_comp;
          queue.push_back(nb);
        }
    }
    ++n_comp;
  }
  return comp;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  REQUIRE(a.size() == b.size());
  std::map<int, int> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto f = fwd.find(a[i]);
    auto r = bwd.find(b[i]);
    if (f == fwd.end() && r == bwd.end()) {
      fwd[a[i]] = b[i];
      bwd[b[i]] = a[i];
    } else if (f == fwd.end() || r == bwd.end() || f->second != b[i] || r->second != a[i]) {
      return false;
    }
  }
  return true;
}

Box random_box(Rng& rng) {
  double x1 = uniform_real(rng);
  double y1 = uniform_real(rng);
  Box b;
  b.x1 = x1;
  b.y1 = y1;
  b.x3 = x1 + uniform_real(rng) * (1.0 - x1);
  b.y3 = y1 + uniform_real(rng) * (1.0 - y1);
  return b;
}

}  // namespace

TEST_CASE("normalize_box divides by page extent") {
  Box b = normalize_box(0, 0, 100, 50, 100, 50);
  CHECK(b.x1 == 0.0);
  CHECK(b.y1 == 0.0);
  CHECK(b.x3 == 1.0);
  CHECK(b.y3 == 1.0);

  b = normalize_box(25, 10, 75, 20, 100, 100);
  CHECK(b.x1 == doctest::Approx(0.25));
  CHECK(b.y1 == doctest::Approx(0.10));
  CHECK(b.x3 == doctest::Approx(0.75));
  CHECK(b.y3 == doctest::Approx(0.20));
}

TEST_CASE("normalize_box clamps and counts out-of-page coordinates") {
  long clamps = 0;
  Box b = normalize_box(-5, 0, 10, 10, 100, 100, &clamps);
  CHECK(b.x1 == 0.0);
  CHECK(clamps == 1);
}

TEST_CASE("normalize_box rejects non-positive page dims") {
  CHECK_THROWS_AS(normalize_box(0, 0, 1, 1, 0, 100), ShapeError);
  CHECK_THROWS_AS(normalize_box(0, 0, 1, 1, 100, -3), ShapeError);
}

TEST_CASE("normalize_box enforces corner order") {
  Box b = normalize_box(80, 60, 20, 10, 100, 100);
  CHECK(b.x1 <= b.x3);
  CHECK(b.y1 <= b.y3);
}

TEST_CASE("quantize_spatial bin rule") {
  Box zero;
  CHECK(quantize_spatial(zero, 1000).x1 == 0);
  Box full{1.0, 1.0, 1.0, 1.0};
  CHECK(quantize_spatial(full, 1000).x1 == 999);  // clamped, not 1000
  Box frac{0.2505, 0, 0.2505, 0};
  CHECK(quantize_spatial(frac, 1000).x1 == 250);
}

TEST_CASE("quantize_spatial is monotone in each coordinate") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    double a = uniform_real(rng), b = uniform_real(rng);
    if (a > b) std::swap(a, b);
    Box lo{a, a, a, a}, hi{b, b, b, b};
    SpatialIndices sl = quantize_spatial(lo, 1000), sh = quantize_spatial(hi, 1000);
    CHECK(sl.x1 <= sh.x1);
    CHECK(sl.y1 <= sh.y1);
    CHECK(sl.x3 <= sh.x3);
    CHECK(sl.y3 <= sh.y3);
  }
}

TEST_CASE("grid_label formula cases") {
  CHECK(grid_label(Box{0, 0, 0.1, 0.1}, GridConfig{4, 4}) == 0);
  CHECK(grid_label(Box{0.3, 0.6, 0.4, 0.7}, GridConfig{4, 4}) == 9);
  CHECK(grid_label(Box{1.0, 0.5, 1.0, 0.6}, GridConfig{4, 4}) == kGridIgnored);
  CHECK(grid_label(Box{0.5, 1.0, 0.6, 1.0}, GridConfig{4, 4}) == kGridIgnored);
  CHECK(grid_label(Box{0.99, 0.99, 1.0, 1.0}, GridConfig{2, 2}) == 3);
}

TEST_CASE("grid_label matches the cell-scan oracle on random boxes") {
  const std::vector<GridConfig> grids = {{4, 1}, {2, 2}, {4, 4}, {8, 8}, {12, 12}};
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    Box b = random_box(rng);
    if (i % 17 == 0) b.x1 = b.x3 = 1.0;  // force boundary cases into the mix
    if (i % 23 == 0) b.y1 = b.y3 = 1.0;
    for (const auto& g : grids) {
      CAPTURE(b.x1);
      CAPTURE(b.y1);
      CHECK(grid_label(b, g) == grid_label_oracle(b, g));
    }
  }
}

TEST_CASE("grid_label ignores the bottom-right coordinates") {
  Rng rng(43);
  for (int i = 0; i < 200; ++i) {
    Box b = random_box(rng);
    Box wider = b;
    wider.x3 = b.x1 + uniform_real(rng) * (1.0 - b.x1);
    wider.y3 = b.y1 + uniform_real(rng) * (1.0 - b.y1);
    CHECK(grid_label(b, GridConfig{4, 4}) == grid_label(wider, GridConfig{4, 4}));
  }
}

TEST_CASE("grid_from_string parses MxN") {
  GridConfig g = grid_from_string("12x3");
  CHECK(g.cols == 12);
  CHECK(g.rows == 3);
  CHECK_THROWS_AS(grid_from_string("4by4"), DataError);
  CHECK_THROWS_AS(grid_from_string("x4"), DataError);
}

TEST_CASE("assign_lines groups identical and separates disjoint extents") {
  std::vector<Box> two = {{0.1, 0.10, 0.2, 0.12}, {0.5, 0.10, 0.6, 0.12}};
  auto lines = assign_lines(two);
  CHECK(lines[0] == lines[1]);

  std::vector<Box> apart = {{0.1, 0.10, 0.2, 0.12}, {0.1, 0.50, 0.2, 0.52}};
  lines = assign_lines(apart);
  CHECK(lines[0] == 0);
  CHECK(lines[1] == 1);
}

TEST_CASE("assign_lines closes chains transitively") {
  // a-b and b-c overlap 60% pairwise; a-c overlap only 20%.
  std::vector<Box> chain = {{0.1, 0.100, 0.2, 0.110},
                            {0.4, 0.104, 0.5, 0.114},
                            {0.7, 0.108, 0.8, 0.118}};
  auto lines = assign_lines(chain);
  CHECK(lines[0] == lines[1]);
  CHECK(lines[1] == lines[2]);
  CHECK(same_partition(lines, assign_lines_oracle(chain)));
}

TEST_CASE("assign_lines matches the BFS oracle on random layouts") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    int n = uniform_int(rng, 1, 40);
    std::vector<Box> boxes;
    for (int i = 0; i < n; ++i) {
      double y = uniform_real(rng) * 0.9;
      double h = 0.005 + uniform_real(rng) * 0.03;
      boxes.push_back({uniform_real(rng) * 0.9, y, 1.0, y + h});
    }
    CHECK(same_partition(assign_lines(boxes), assign_lines_oracle(boxes)));
  }
}

TEST_CASE("assign_lines partition is invariant to input order") {
  Rng rng(78);
  std::vector<Box> boxes;
  for (int i = 0; i < 25; ++i) {
    double y = uniform_real(rng);
    boxes.push_back({uniform_real(rng), y, 1.0, y + 0.02});
  }
  auto base = assign_lines(boxes);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> perm(boxes.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    shuffle_vec(perm, rng);
    std::vector<Box> shuffled(boxes.size());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = boxes[perm[i]];
    auto lines = assign_lines(shuffled);
    std::vector<int> unshuffled(lines.size());
    for (std::size_t i = 0; i < perm.size(); ++i) unshuffled[perm[i]] = lines[i];
    CHECK(same_partition(base, unshuffled));
  }
}

TEST_CASE("line_distance_label quantizes |delta|") {
  CHECK(line_distance_label(3, 3) == 0);
  CHECK(line_distance_label(3, 4) == 1);
  CHECK(line_distance_label(4, 3) == 1);
  CHECK(line_distance_label(0, 5) == 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      CHECK(line_distance_label(i, j) == line_distance_label(j, i));
      CHECK(line_distance_label(i, j) == line_distance_label(0, std::abs(i - j)));
    }
}

TEST_CASE("sample_token_pairs degenerate and single-line documents") {
  Rng rng(5);
  CHECK(sample_token_pairs({0}, 8, rng).empty());
  auto pairs = sample_token_pairs(std::vector<int>(10, 0), 16, rng);
  CHECK(!pairs.empty());
  for (const auto& p : pairs) CHECK(p.cls == 0);
}

TEST_CASE("sample_token_pairs is deterministic and draws distinct pairs") {
  std::vector<int> lines = {0, 0, 1, 1, 2, 3, 5, 5, 8};
  Rng rng_a(123), rng_b(123);
  auto a = sample_token_pairs(lines, 12, rng_a);
  auto b = sample_token_pairs(lines, 12, rng_b);
  REQUIRE(a.size() == b.size());
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].i == b[i].i);
    CHECK(a[i].j == b[i].j);
    CHECK(a[i].cls == b[i].cls);
    CHECK(a[i].cls == line_distance_label(lines[a[i].i], lines[a[i].j]));
    CHECK(seen.insert({a[i].i, a[i].j}).second);  // distinct
  }
}

TEST_CASE("sample_token_pairs round-robins over the classes present") {
  std::vector<int> lines = {0, 0, 1, 2, 4, 7};  // all three classes exist
  Rng rng(9);
  auto pairs = sample_token_pairs(lines, 3, rng);
  REQUIRE(pairs.size() == 3);
  std::set<int> classes;
  for (const auto& p : pairs) classes.insert(p.cls);
  CHECK(classes == std::set<int>{0, 1, 2});
}

TEST_CASE("uniform sampling switch skips class balancing") {
  std::vector<int> lines(30);
  for (int i = 0; i < 30; ++i) lines[i] = i;  // class-2 pairs dominate heavily
  Rng rng(17);
  auto pairs = sample_token_pairs(lines, 40, rng, /*class_balanced=*/false);
  REQUIRE(pairs.size() == 40);
  long class2 = 0;
  for (const auto& p : pairs) class2 += p.cls == 2 ? 1 : 0;
  CHECK(class2 > 25);  // unbalanced draw reflects the population
}
