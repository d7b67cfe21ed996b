#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "segrefine/errors.hpp"
#include "segrefine/mask.hpp"
#include "segrefine/rng.hpp"

using namespace segrefine;

namespace {

BinaryMask make_mask(int w, int h, const std::vector<PixelCoord>& pixels) {
  BinaryMask m(w, h);
  for (const auto& p : pixels) m.set(p.row, p.col, true);
  return m;
}

BinaryMask random_mask(Rng& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (rng.next_unit() < density) m.set(r, c, true);
    }
  }
  return m;
}

// Exhaustive pair enumeration; the production path uses a distance transform.
double brute_set_distance(const BinaryMask& a, const BinaryMask& b) {
  double best = 1e300;
  for (int r1 = 0; r1 < a.height(); ++r1) {
    for (int c1 = 0; c1 < a.width(); ++c1) {
      if (!a.at(r1, c1)) continue;
      for (int r2 = 0; r2 < b.height(); ++r2) {
        for (int c2 = 0; c2 < b.width(); ++c2) {
          if (!b.at(r2, c2)) continue;
          const double dr = r1 - r2;
          const double dc = c1 - c2;
          best = std::min(best, std::sqrt(dr * dr + dc * dc));
        }
      }
    }
  }
  return best;
}

bool masks_adjacent(const BinaryMask& a, const BinaryMask& b, Connectivity conn) {
  const int n = conn == Connectivity::Four ? 4 : 8;
  static const int dr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  static const int dc[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  static const int dr4[4] = {-1, 0, 1, 0};
  static const int dc4[4] = {0, 1, 0, -1};
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      if (!a.at(r, c)) continue;
      for (int d = 0; d < n; ++d) {
        const int nr = r + (n == 4 ? dr4[d] : dr[d]);
        const int nc = c + (n == 4 ? dc4[d] : dc[d]);
        if (b.in_bounds(nr, nc) && b.at(nr, nc)) return true;
      }
    }
  }
  return false;
}

}  // namespace

TEST_SUITE("mask") {

TEST_CASE("connected_components basics") {
  BinaryMask empty(5, 5);
  CHECK(connected_components(empty, Connectivity::Four).empty());

  BinaryMask full(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) full.set(r, c, true);
  auto comps = connected_components(full, Connectivity::Four);
  REQUIRE(comps.size() == 1);
  CHECK(comps[0] == full);

  auto two = make_mask(5, 5, {{0, 0}, {4, 4}});
  comps = connected_components(two, Connectivity::Four);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].area() == 1);
  CHECK(comps[1].area() == 1);
  // tie on area: ordered by first pixel
  CHECK(comps[0].at(0, 0));
  CHECK(comps[1].at(4, 4));
}

TEST_CASE("connected_components diagonal contact") {
  auto diag = make_mask(4, 4, {{0, 0}, {1, 1}});
  CHECK(connected_components(diag, Connectivity::Four).size() == 2);
  CHECK(connected_components(diag, Connectivity::Eight).size() == 1);
}

TEST_CASE("connected_components ordering and partition property") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryMask m = random_mask(rng, 12, 10, 0.4);
    for (Connectivity conn : {Connectivity::Four, Connectivity::Eight}) {
      auto comps = connected_components(m, conn);
      BinaryMask acc(12, 10);
      int64_t total = 0;
      for (std::size_t i = 0; i < comps.size(); ++i) {
        total += comps[i].area();
        acc = mask_union(acc, comps[i]);
        if (i + 1 < comps.size()) CHECK(comps[i].area() >= comps[i + 1].area());
        for (std::size_t j = i + 1; j < comps.size(); ++j) {
          CHECK_FALSE(masks_adjacent(comps[i], comps[j], conn));
          CHECK(intersection_area(comps[i], comps[j]) == 0);
        }
      }
      CHECK(acc == m);
      CHECK(total == m.area());
    }
  }
}

TEST_CASE("boundary basics") {
  auto single = make_mask(3, 3, {{1, 1}});
  CHECK(boundary(single) == single);

  BinaryMask square(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) square.set(r, c, true);
  BinaryMask b = boundary(square);
  CHECK(b.area() == 12);
  CHECK_FALSE(b.at(1, 1));
  CHECK_FALSE(b.at(2, 2));
  CHECK(b.at(0, 0));
  CHECK(b.at(3, 3));

  BinaryMask empty(4, 4);
  CHECK(boundary(empty).empty());
}

TEST_CASE("boundary is subset and stable on thin results") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    BinaryMask m = random_mask(rng, 14, 11, 0.45);
    BinaryMask b = boundary(m);
    CHECK(mask_difference(b, m).empty());
    CHECK(boundary(b) == b);
  }
}

TEST_CASE("set_distance examples") {
  auto a = make_mask(6, 6, {{0, 0}});
  auto b = make_mask(6, 6, {{3, 4}});
  CHECK(set_distance(a, b) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(set_distance(a, a) == 0.0);
  auto c = make_mask(6, 6, {{0, 1}});
  CHECK(set_distance(a, c) == doctest::Approx(1.0).epsilon(1e-12));
  BinaryMask empty(6, 6);
  CHECK_THROWS_AS(set_distance(a, empty), EmptyMaskError);
  CHECK_THROWS_AS(set_distance(empty, a), EmptyMaskError);
}

TEST_CASE("set_distance matches exhaustive oracle and is symmetric") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask a = random_mask(rng, 15, 12, 0.1);
    BinaryMask b = random_mask(rng, 15, 12, 0.1);
    if (a.empty() || b.empty()) continue;
    const double d = set_distance(a, b);
    CHECK(d == doctest::Approx(brute_set_distance(a, b)).epsilon(1e-12));
    CHECK(d == doctest::Approx(set_distance(b, a)).epsilon(1e-12));
    const double capped = set_distance_capped(a, b, 4.0);
    if (d <= 4.0) {
      CHECK(capped == doctest::Approx(d).epsilon(1e-12));
    } else {
      CHECK(std::isinf(capped));
    }
  }
}

TEST_CASE("set_distance triangle inequality on singletons") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = [&] { return make_mask(10, 10, {{rng.int_in(0, 9), rng.int_in(0, 9)}}); };
    BinaryMask a = p(), b = p(), c = p();
    CHECK(set_distance(a, c) <= set_distance(a, b) + set_distance(b, c) + 1e-12);
  }
}

TEST_CASE("extract_instances basics and round trip") {
  LabelImage zero(4, 4);
  CHECK(extract_instances(zero).empty());

  LabelImage li(4, 3);
  li.set(0, 0, 1);
  li.set(2, 3, 7);
  auto inst = extract_instances(li);
  REQUIRE(inst.size() == 2);
  CHECK(inst.count(1) == 1);
  CHECK(inst.count(7) == 1);

  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    LabelImage img(9, 7);
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 9; ++c) img.set(r, c, rng.int_in(0, 4));
    auto parts = extract_instances(img);
    CHECK(compose_instances(9, 7, parts) == img);
  }
}

TEST_CASE("dilate basics") {
  auto center = make_mask(5, 5, {{2, 2}});
  CHECK(dilate(center, 0.0) == center);
  BinaryMask d1 = dilate(center, 1.0);
  CHECK(d1.area() == 5);
  CHECK(d1.at(1, 2));
  CHECK(d1.at(3, 2));
  CHECK(d1.at(2, 1));
  CHECK(d1.at(2, 3));
  CHECK_FALSE(d1.at(1, 1));
}

TEST_CASE("dilate monotone and consistent with set_distance") {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryMask a = random_mask(rng, 13, 13, 0.08);
    BinaryMask b = random_mask(rng, 13, 13, 0.08);
    if (a.empty() || b.empty()) continue;
    const double r1 = rng.uniform(0.0, 4.0);
    const double r2 = r1 + rng.uniform(0.0, 4.0);
    CHECK(mask_difference(dilate(a, r1), dilate(a, r2)).empty());
    const double d = set_distance(a, b);
    for (double radius : {1.0, 2.5, 5.0}) {
      const bool touches = intersection_area(dilate(a, radius), b) > 0;
      CHECK(touches == (d <= radius));
    }
  }
}

TEST_CASE("contour of 3x3 square is the clockwise perimeter") {
  BinaryMask sq(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) sq.set(r, c, true);
  Contour ct = trace_contour(sq);
  const std::vector<PixelCoord> expected = {{0, 0}, {0, 1}, {0, 2}, {1, 2},
                                            {2, 2}, {2, 1}, {2, 0}, {1, 0}};
  CHECK(ct.points == expected);
}

TEST_CASE("contour edge cases") {
  auto single = make_mask(3, 3, {{1, 1}});
  Contour c1 = trace_contour(single);
  REQUIRE(c1.points.size() == 1);
  CHECK(c1.points[0] == PixelCoord{1, 1});

  auto line = make_mask(5, 2, {{0, 0}, {0, 1}, {0, 2}});
  Contour c2 = trace_contour(line);
  CHECK(c2.points.size() >= 3);
  for (const auto& p : c2.points) CHECK(line.at(p.row, p.col));

  BinaryMask empty(3, 3);
  CHECK(trace_contour(empty).points.empty());
}

TEST_CASE("contour invariants on random blobs") {
  Rng rng(12);
  auto adj8 = [](PixelCoord a, PixelCoord b) {
    return std::abs(a.row - b.row) <= 1 && std::abs(a.col - b.col) <= 1 && !(a == b);
  };
  for (int trial = 0; trial < 15; ++trial) {
    BinaryMask m = random_mask(rng, 10, 10, 0.35);
    if (m.empty()) continue;
    auto comps = connected_components(m, Connectivity::Eight);
    for (const auto& comp : comps) {
      Contour ct = trace_contour(comp);
      REQUIRE_FALSE(ct.points.empty());
      for (const auto& p : ct.points) CHECK(comp.at(p.row, p.col));
      for (std::size_t i = 1; i < ct.points.size(); ++i) {
        CHECK(adj8(ct.points[i - 1], ct.points[i]));
      }
      if (ct.points.size() > 1) CHECK(adj8(ct.points.back(), ct.points.front()));
    }
  }
}

TEST_CASE("rle round trip") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    BinaryMask m = random_mask(rng, 17, 9, rng.next_unit());
    CHECK(rle_decode(17, 9, rle_encode(m)) == m);
  }
  BinaryMask empty(4, 4);
  CHECK(rle_decode(4, 4, rle_encode(empty)) == empty);
  CHECK_THROWS_AS(rle_decode(2, 2, "1 99"), CorruptEncodingError);
}

}  // TEST_SUITE
