#include <doctest.h>

#include "ptrace/grid.hpp"

using namespace ptrace;

TEST_CASE("structured factory validates its arguments") {
  CHECK_THROWS_AS(Grid::structured(0, 1, 1, 1.0, 1.0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Grid::structured(1, 1, 1, 0.0, 1.0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Grid::structured(1, 1, 2, 1.0, 1.0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Grid::structured(1, 1, 1, 1.0, 1.0, {-1.0}), std::invalid_argument);
}

TEST_CASE("cell id bijection round-trips") {
  Grid g = Grid::structured(4, 3, 2, 1.0, 2.0, {1.0, 3.0});
  CHECK(g.cell_count() == 24);
  for (CellId c = 0; c < g.cell_count(); ++c) {
    auto [i, j, k] = g.ijk(c);
    CHECK(g.id(i, j, k) == c);
  }
  CHECK_THROWS_AS(g.ijk(24), std::out_of_range);
  CHECK_THROWS_AS(g.ijk(-1), std::out_of_range);
}

TEST_CASE("neighbor lookup and hull detection") {
  Grid g = Grid::structured(2, 2, 2, 1.0, 1.0, {1.0, 1.0});
  CellId c = g.id(0, 0, 0);
  CHECK(g.neighbor(c, {0, 1}) == g.id(1, 0, 0));
  CHECK(g.neighbor(c, {1, 1}) == g.id(0, 1, 0));
  CHECK(g.neighbor(c, {2, 1}) == g.id(0, 0, 1));
  CHECK(!g.neighbor(c, {0, 0}).has_value());
  CHECK(g.on_hull(c, {1, 0}));
  CHECK(!g.on_hull(c, {2, 1}));
}

TEST_CASE("locate assigns interior-face points to the higher cell") {
  Grid g = Grid::structured(3, 3, 1, 1.0, 1.0, {1.0});
  auto loc = g.locate({1.0, 0.5, 0.5});
  CHECK(loc.cell == g.id(1, 0, 0));
  CHECK(loc.local[0] == 0.0);
}

TEST_CASE("locate clamps the high hull to local coordinate 1") {
  Grid g = Grid::structured(3, 2, 2, 1.0, 1.0, {1.0, 2.0});
  auto loc = g.locate({3.0, 2.0, 3.0});
  CHECK(loc.cell == g.id(2, 1, 1));
  CHECK(loc.local[0] == 1.0);
  CHECK(loc.local[1] == 1.0);
  CHECK(loc.local[2] == 1.0);
  CHECK_THROWS_AS(g.locate({3.1, 0.5, 0.5}), std::out_of_range);
}

TEST_CASE("geometry helpers use per-layer thickness") {
  Grid g = Grid::structured(2, 2, 2, 2.0, 3.0, {1.0, 4.0}, {10.0, 20.0, 30.0});
  CHECK(g.face_area(0, 1) == 3.0 * 4.0);
  CHECK(g.face_area(1, 0) == 2.0 * 1.0);
  CHECK(g.face_area(2, 1) == 2.0 * 3.0);
  CHECK(g.cell_volume(1) == 2.0 * 3.0 * 4.0);
  CHECK(g.domain_volume() == doctest::Approx(4 * 6.0 + 4 * 24.0));
  auto p = g.global_position(g.id(1, 0, 1), {0.5, 0.5, 0.5});
  CHECK(p[0] == 10.0 + 1.5 * 2.0);
  CHECK(p[1] == 20.0 + 0.5 * 3.0);
  CHECK(p[2] == 30.0 + 1.0 + 2.0);
}
