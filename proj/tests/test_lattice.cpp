#include "dycalc/lattice.hpp"

#include <algorithm>
#include <set>

#include "doctest.h"

using namespace dycalc;

namespace {

Grid plain_grid(int dim, int lmin, int lmax, i64 roots = 1) {
  ScaleWindow w{lmin, lmax};
  return Grid(dim, w, LatticeShift::none(w, dim), roots);
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("unshifted three-scale interval grid enumerates seven cubes") {
  Grid g = plain_grid(1, -2, 0);
  CHECK(g.cube_count() == 7);
  CHECK(g.extent() == 4);
  CHECK(g.cell_count() == 4);
  CHECK(g.cubes(0).size() == 1);
  CHECK(g.cubes(-1).size() == 2);
  CHECK(g.cubes(-2).size() == 4);

  const Cube root{0, {0}};
  CHECK(g.corner(root)[0] == doctest::Approx(0.0));
  CHECK(g.measure(root) == doctest::Approx(1.0));
  const auto kids = g.children(root);
  REQUIRE(kids.size() == 2);
  CHECK(g.corner(kids[0])[0] == doctest::Approx(0.0));
  CHECK(g.corner(kids[1])[0] == doctest::Approx(0.5));
  CHECK(g.parent(kids[1]) == root);
}

TEST_CASE("single translation bit moves the root by half its side") {
  ScaleWindow w{-1, 0};
  LatticeShift s = LatticeShift::none(w, 1);
  s.bits[0][0] = 1;  // scale -1
  Grid g(1, w, s, 1);
  const Cube root{0, {0}};
  CHECK(g.corner(root)[0] == doctest::Approx(0.5));  // root box is [1/2, 3/2)
  CHECK(g.center(root)[0] == doctest::Approx(1.0));
  // Box-relative cells are always [0, extent).
  CHECK(g.corner_cells(root)[0] == 0);
  const auto kids = g.children(root);
  CHECK(g.corner(kids[0])[0] == doctest::Approx(0.5));
  CHECK(g.corner(kids[1])[0] == doctest::Approx(1.0));
}

TEST_CASE("parent-child round trip under random translations") {
  Rng rng(7);
  for (int it = 0; it < 25; ++it) {
    const int dim = 1 + static_cast<int>(rng.below(2));
    ScaleWindow w{-3, 0};
    Grid g(dim, w, LatticeShift::sample(w, dim, rng), 1 + rng.below(2));
    for (int s = w.lmin + 1; s <= w.lmax; ++s) {
      for (const Cube& q : g.cubes(s)) {
        const auto kids = g.children(q);
        CHECK(kids.size() == (std::size_t{1} << dim));
        std::set<i64> covered;
        for (const Cube& c : kids) {
          CHECK(g.parent(c) == q);
          CHECK(g.contains(q, c));
          for (i64 cell : g.cells_of(c)) covered.insert(cell);
        }
        // Children partition the parent cells exactly.
        const auto own = g.cells_of(q);
        CHECK(covered == std::set<i64>(own.begin(), own.end()));
      }
    }
    // Every cell belongs to exactly one cube per scale.
    for (int s = w.lmin; s <= w.lmax; ++s) {
      i64 counted = 0;
      for (const Cube& q : g.cubes(s)) counted += static_cast<i64>(g.cells_of(q).size());
      CHECK(counted == g.cell_count());
    }
  }
}

TEST_CASE("two-dimensional cube counts") {
  Grid g = plain_grid(2, -2, 0);
  CHECK(g.cube_count() == 21);  // 1 + 4 + 16
  CHECK(g.cell_count() == 16);
  CHECK(g.children(Cube{0, {0, 0}}).size() == 4);
}

TEST_CASE("boundary gap and goodness on the unit interval") {
  Grid g = plain_grid(1, -2, 0);
  const Cube q{-2, {1}};  // [1/4, 1/2)
  CHECK(g.boundary_gap(q, 0) == doctest::Approx(0.25));
  // gap 1/4 fails the strict threshold 2^(-2*0.5) = 1/2
  CHECK_FALSE(g.is_good(q, 0.5, 2));
  // no cube 2^3 times larger inside the window: vacuously good
  CHECK(g.is_good(q, 0.5, 3));
  // edge cube touches the root boundary: bad for every gamma
  CHECK_FALSE(g.is_good(Cube{-2, {0}}, 0.999, 2));
  CHECK(g.boundary_gap(Cube{-2, {0}}, 0) == doctest::Approx(0.0));
}

TEST_CASE("goodness threshold tightens as gamma decreases") {
  Grid g = plain_grid(1, -3, 0);
  const Cube q{-3, {3}};  // [3/8, 1/2): gap 3/8 to the root faces
  CHECK(g.boundary_gap(q, 0) == doctest::Approx(0.375));
  // r=3 checks only the root: threshold 2^(-3*gamma)
  CHECK(g.is_good(q, 0.6, 3));        // 2^-1.8 = 0.287 < 0.375
  CHECK_FALSE(g.is_good(q, 0.4, 3));  // 2^-1.2 = 0.435 > 0.375
}

TEST_CASE("sublattices split the window by scale residue") {
  Grid g = plain_grid(1, -2, 0);
  CHECK(g.sublattice_scales(0, 1) == std::vector<int>{-2, 0});
  CHECK(g.sublattice_scales(1, 1) == std::vector<int>{-1});
  CHECK(g.sublattice(0, 1).size() == 5);
  CHECK(g.sublattice(1, 1).size() == 2);
  CHECK(g.sublattice_scales(0, 0) == std::vector<int>{-2, -1, 0});
}

TEST_CASE("common parent walks up to the join") {
  Grid g = plain_grid(1, -2, 0);
  const Cube a{-2, {0}}, b{-2, {1}}, c{-2, {2}};
  auto ab = g.common_parent({a, b});
  REQUIRE(ab.has_value());
  CHECK(*ab == Cube{-1, {0}});
  auto ac = g.common_parent({a, c});
  REQUIRE(ac.has_value());
  CHECK(*ac == Cube{0, {0}});

  Grid two = plain_grid(1, -1, 0, 2);
  const Cube left{-1, {0}}, right{-1, {2}};  // in different roots
  CHECK_FALSE(two.common_parent({left, right}).has_value());
  CHECK(two.common_parent({left, Cube{-1, {1}}}).has_value());
}

TEST_CASE("bad probability: exhaustive oracle values") {
  // gamma near 1, three scales, r=2: every relative position of the probe
  // cube has gap <= 1/4 < 2^(-2*gamma), so all translations are bad.
  auto all_bad = bad_probability(1, ScaleWindow{-2, 0}, 2, 0.999, 2, 0, 0, true);
  CHECK(all_bad.exhaustive);
  CHECK(all_bad.trials == 4);
  CHECK(all_bad.estimate == doctest::Approx(1.0));

  // Four-scale window, r=3, gamma=0.6: threshold 2^-1.8 ~ 0.287, and the
  // probe cube's gap to its scale-0 ancestor is uniform over k/8, k = 0..3
  // (mirrored); only gap 3/8 passes, at two of eight translations.
  auto partial = bad_probability(1, ScaleWindow{-3, 0}, 2, 0.6, 3, 0, 0, true);
  CHECK(partial.trials == 8);
  CHECK(partial.estimate == doctest::Approx(0.75));

  // r beyond the window: vacuously good everywhere.
  auto none = bad_probability(1, ScaleWindow{-2, 0}, 2, 0.5, 5, 0, 0, true);
  CHECK(none.estimate == doctest::Approx(0.0));
}

TEST_CASE("bad probability: sampling agrees with enumeration") {
  const auto exact = bad_probability(1, ScaleWindow{-3, 0}, 2, 0.6, 3, 0, 0, true);
  const auto mc = bad_probability(1, ScaleWindow{-3, 0}, 2, 0.6, 3, 4000, 11);
  CHECK(mc.trials == 4000);
  CHECK(mc.stderr_ > 0);
  CHECK(std::abs(mc.estimate - exact.estimate) <= 4 * mc.stderr_);
  // identical seeds reproduce identical estimates
  const auto mc2 = bad_probability(1, ScaleWindow{-3, 0}, 2, 0.6, 3, 4000, 11);
  CHECK(mc.estimate == mc2.estimate);
}

TEST_CASE("larger exclusion radius never increases the bad fraction") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng rng(seed);
    ScaleWindow w{-4, 0};
    const double gamma = 0.3 + 0.6 * rng.unit();
    const auto r2 = bad_probability(1, w, 2, gamma, 2, 0, 0, true);
    const auto r3 = bad_probability(1, w, 2, gamma, 3, 0, 0, true);
    const auto r4 = bad_probability(1, w, 2, gamma, 4, 0, 0, true);
    CHECK(r3.estimate <= r2.estimate);
    CHECK(r4.estimate <= r3.estimate);
  }
}

TEST_CASE("probe cube position inside its ancestor is uniform over translations") {
  // Window [-2,0], two roots: the probe cube's offset inside its scale-0
  // ancestor takes each of the four values exactly once over the four
  // translations.
  ScaleWindow w{-2, 0};
  std::multiset<i64> positions;
  for (int mask = 0; mask < 4; ++mask) {
    LatticeShift s = LatticeShift::none(w, 1);
    s.bits[0][0] = static_cast<std::uint8_t>(mask & 1);
    s.bits[1][0] = static_cast<std::uint8_t>((mask >> 1) & 1);
    Grid g(1, w, s, 2);
    const Cube c = g.central_cube();
    const Cube anc = g.parent(c, 2);
    positions.insert(g.corner_cells(c)[0] - g.corner_cells(anc)[0]);
  }
  CHECK(positions == std::multiset<i64>{0, 1, 2, 3});
  CHECK_THROWS(bad_probability(1, w, 1, 0.5, 2, 10, 1));
}

TEST_CASE("construction validates inputs") {
  ScaleWindow w{-2, 0};
  CHECK_THROWS(Grid(0, w, LatticeShift::none(w, 1), 1));
  CHECK_THROWS(Grid(1, w, LatticeShift::none(w, 1), 0));
  CHECK_THROWS(Grid(1, ScaleWindow{0, -1}, LatticeShift::none(ScaleWindow{0, -1}, 1), 1));
  LatticeShift bad = LatticeShift::none(w, 1);
  bad.bits.pop_back();
  CHECK_THROWS(Grid(1, w, bad, 1));
  Grid g = plain_grid(1, -2, 0);
  CHECK_THROWS(g.require(Cube{0, {1}}));
  CHECK_THROWS(g.require(Cube{1, {0}}));
  CHECK_THROWS(g.children(Cube{-2, {0}}));
}

}  // TEST_SUITE
