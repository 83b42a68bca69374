#include "doctest.h"

#include "dycalc/haar.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace dycalc;

namespace {

Grid line_grid(int scales = 4, i64 roots = 1) {
  ScaleWindow w{1 - scales, 0};
  return Grid(1, w, LatticeShift::none(w, 1), roots);
}

Grid plane_grid(int scales, i64 roots = 1) {
  ScaleWindow w{1 - scales, 0};
  return Grid(2, w, LatticeShift::none(w, 2), roots);
}

GridFunction indicator(const Grid& g, const Cube& q) {
  GridFunction f(g, Space::scalar());
  g.for_each_cell(q, [&](i64 c) { f.at(c)[0] = 1.0; });
  return f;
}

double flat_l2(const GridFunction& f) { return f.l2_flat_norm(); }

double sup_diff(const GridFunction& a, const GridFunction& b) {
  double m = 0;
  for (i64 c = 0; c < a.grid().cell_count(); ++c)
    for (int j = 0; j < a.space().dim(); ++j)
      m = std::max(m, std::abs(a.at(c)[j] - b.at(c)[j]));
  return m;
}

}  // namespace

TEST_SUITE("haar") {

TEST_CASE("flat factor is the normalized indicator") {
  Grid g = line_grid();
  Cube root{0, {0}};
  GridFunction h = haar(g, root, 0);
  for (i64 c = 0; c < g.cell_count(); ++c) CHECK(h.at(c)[0] == cx{1.0, 0.0});

  Cube q{-1, {0}};  // [0, 1/2): normalization 2^{1/2} on its cells
  GridFunction h2 = haar(g, q, 0);
  const double r2 = std::sqrt(2.0);
  for (i64 c = 0; c < 4; ++c)
    CHECK(h2.at(c)[0].real() == doctest::Approx(r2).epsilon(1e-14));
  for (i64 c = 4; c < 8; ++c) CHECK(h2.at(c)[0] == cx{0.0, 0.0});
}

TEST_CASE("cancellative factor alternates halves") {
  Grid g = line_grid();
  GridFunction h = haar(g, Cube{0, {0}}, 1);
  for (i64 c = 0; c < 4; ++c) CHECK(h.at(c)[0] == cx{1.0, 0.0});
  for (i64 c = 4; c < 8; ++c) CHECK(h.at(c)[0] == cx{-1.0, 0.0});
}

TEST_CASE("tensor signature controls the sign per axis") {
  Grid g = plane_grid(2);  // 2 x 2 cells on the unit square
  Cube root{0, {0, 0}};

  GridFunction h10 = haar(g, root, 1);  // cancellative along axis 0 only
  CHECK(h10.at(g.cell_index({0, 0}))[0] == cx{1.0, 0.0});
  CHECK(h10.at(g.cell_index({1, 0}))[0] == cx{-1.0, 0.0});
  CHECK(h10.at(g.cell_index({0, 1}))[0] == cx{1.0, 0.0});
  CHECK(h10.at(g.cell_index({1, 1}))[0] == cx{-1.0, 0.0});

  GridFunction h01 = haar(g, root, 2);  // cancellative along axis 1 only
  CHECK(h01.at(g.cell_index({0, 0}))[0] == cx{1.0, 0.0});
  CHECK(h01.at(g.cell_index({1, 0}))[0] == cx{1.0, 0.0});
  CHECK(h01.at(g.cell_index({0, 1}))[0] == cx{-1.0, 0.0});
  CHECK(h01.at(g.cell_index({1, 1}))[0] == cx{-1.0, 0.0});

  GridFunction h11 = haar(g, root, 3);  // product of the two sign patterns
  CHECK(h11.at(g.cell_index({0, 0}))[0] == cx{1.0, 0.0});
  CHECK(h11.at(g.cell_index({1, 0}))[0] == cx{-1.0, 0.0});
  CHECK(h11.at(g.cell_index({0, 1}))[0] == cx{-1.0, 0.0});
  CHECK(h11.at(g.cell_index({1, 1}))[0] == cx{1.0, 0.0});
}

TEST_CASE("pairing integrates the product over cells") {
  Grid g = line_grid();
  Cube root{0, {0}};
  GridFunction left = indicator(g, Cube{-1, {0}});  // 1 on [0, 1/2)

  CHECK(pair(left, haar(g, root, 1))[0] == cx{0.5, 0.0});
  CHECK(pair(left, haar(g, root, 0))[0] == cx{0.5, 0.0});

  GridFunction c = GridFunction::constant(g, Space::scalar(), {cx{2.5, -1.0}});
  for (const Cube& q : g.all_cubes()) {
    if (q.scale == g.window().lmin) continue;
    CHECK(std::abs(pair(c, haar(g, q, 1))[0]) < 1e-14);
  }

  GridFunction h = haar(g, root, 1);
  CHECK(pair(h, h)[0] == cx{1.0, 0.0});
  CHECK(haar_coefficient(left, root, 1)[0] == cx{0.5, 0.0});
}

TEST_CASE("averages and conditional expectation") {
  Grid g = line_grid();
  GridFunction f = indicator(g, Cube{-1, {0}});
  CHECK(average(f, Cube{0, {0}})[0] == cx{0.5, 0.0});
  CHECK(average(f, Cube{-1, {0}})[0] == cx{1.0, 0.0});
  CHECK(average(f, Cube{-1, {1}})[0] == cx{0.0, 0.0});

  GridFunction ef = expectation(f, Cube{0, {0}});
  for (i64 c = 0; c < 8; ++c) CHECK(ef.at(c)[0] == cx{0.5, 0.0});

  GridFunction eh = expectation(f, Cube{-2, {1}});  // [1/4, 1/2)
  CHECK(eh.at(1)[0] == cx{0.0, 0.0});
  CHECK(eh.at(2)[0] == cx{1.0, 0.0});
  CHECK(eh.at(3)[0] == cx{1.0, 0.0});
  CHECK(eh.at(4)[0] == cx{0.0, 0.0});
}

TEST_CASE("martingale difference splits the average over children") {
  Grid g = line_grid();
  GridFunction f = indicator(g, Cube{-1, {0}});
  GridFunction d = martingale_diff(f, Cube{0, {0}});
  for (i64 c = 0; c < 4; ++c) CHECK(d.at(c)[0] == cx{0.5, 0.0});
  for (i64 c = 4; c < 8; ++c) CHECK(d.at(c)[0] == cx{-0.5, 0.0});

  GridFunction c5 = GridFunction::constant(g, Space::scalar(), {cx{5.0, 2.0}});
  for (const Cube& q : g.all_cubes()) {
    if (q.scale == g.window().lmin) continue;
    CHECK(sup_diff(martingale_diff(c5, q), GridFunction(g, Space::scalar())) ==
          0.0);
  }
}

TEST_CASE("difference has zero mean and local support") {
  Grid g = line_grid(4, 2);
  Rng rng(401);
  GridFunction f = GridFunction::random(g, Space::seq_lp(2, 3), rng);
  for (const Cube& q : g.all_cubes()) {
    if (q.scale == g.window().lmin) continue;
    GridFunction d = martingale_diff(f, q);
    for (const cx& z : d.integral()) CHECK(std::abs(z) < 1e-13);
    std::vector<char> inside(static_cast<std::size_t>(g.cell_count()), 0);
    g.for_each_cell(q, [&](i64 c) { inside[static_cast<std::size_t>(c)] = 1; });
    for (i64 c = 0; c < g.cell_count(); ++c) {
      if (inside[static_cast<std::size_t>(c)]) continue;
      for (int j = 0; j < 3; ++j) CHECK(d.at(c)[j] == cx{0.0, 0.0});
    }
  }
}

TEST_CASE("depth-indexed blocks telescope") {
  Grid g = line_grid();
  Cube root{0, {0}};
  GridFunction f = indicator(g, Cube{-1, {0}});

  CHECK(sup_diff(block_diff(f, root, 0), martingale_diff(f, root)) == 0.0);

  GridFunction ba = block_avg(f, root, 1);
  for (i64 c = 0; c < 4; ++c) CHECK(ba.at(c)[0] == cx{1.0, 0.0});
  for (i64 c = 4; c < 8; ++c) CHECK(ba.at(c)[0] == cx{0.0, 0.0});

  Rng rng(402);
  GridFunction r = GridFunction::random(g, Space::scalar(), rng);
  // finest-depth averaging reproduces the function itself
  CHECK(sup_diff(block_avg(r, root, 3), r) == 0.0);

  for (int k = 1; k <= 3; ++k) {
    GridFunction lhs = expectation(r, root);
    for (int l = 0; l < k; ++l) lhs += block_diff(r, root, l);
    CHECK(sup_diff(lhs, block_avg(r, root, k)) < 1e-14);
  }
}

TEST_CASE("expansion captures single atoms exactly") {
  Grid g = line_grid();
  Cube q{-1, {0}};
  GridFunction h = haar(g, q, 1);
  HaarExpansion e = expand(h);
  int nonzero = 0;
  for (const auto& [idx, v] : e.coefficients) {
    if (std::abs(v[0]) > 1e-13) {
      ++nonzero;
      CHECK(idx.cube == q);
      CHECK(idx.eta == 1);
      CHECK(std::abs(v[0] - cx{1.0, 0.0}) < 1e-13);
    }
  }
  CHECK(nonzero == 1);
  for (const auto& [rc, v] : e.root_averages) CHECK(std::abs(v[0]) < 1e-14);

  GridFunction c = GridFunction::constant(g, Space::scalar(), {cx{3.0, 1.0}});
  HaarExpansion ec = expand(c);
  for (const auto& [idx, v] : ec.coefficients) CHECK(std::abs(v[0]) < 1e-14);
  REQUIRE(ec.root_averages.size() == 1);
  CHECK(std::abs(ec.root_averages[0].second[0] - cx{3.0, 1.0}) < 1e-14);
}

TEST_CASE("expansion round-trips random data") {
  Rng rng(403);
  for (int trial = 0; trial < 8; ++trial) {
    const bool plane = trial % 2 == 1;
    Grid g = plane ? plane_grid(3, 1 + trial % 3) : line_grid(4, 1 + trial % 3);
    Space V = trial % 4 < 2 ? Space::scalar() : Space::seq_lp(3.0, 2);
    GridFunction f = GridFunction::random(g, V, rng);
    GridFunction back = reconstruct(g, V, expand(f));
    CHECK(sup_diff(f, back) <= 1e-12 * (1.0 + f.sup_norm()));
  }
}

TEST_CASE("expansion is thread-count invariant") {
  Grid g = plane_grid(3);
  Rng rng(404);
  GridFunction f = GridFunction::random(g, Space::seq_lp(2, 2), rng);
  set_worker_count(1);
  HaarExpansion a = expand(f);
  set_worker_count(4);
  HaarExpansion b = expand(f);
  set_worker_count(0);
  REQUIRE(a.coefficients.size() == b.coefficients.size());
  for (std::size_t i = 0; i < a.coefficients.size(); ++i) {
    CHECK(a.coefficients[i].first == b.coefficients[i].first);
    CHECK(a.coefficients[i].second == b.coefficients[i].second);
  }
  REQUIRE(a.root_averages.size() == b.root_averages.size());
  for (std::size_t i = 0; i < a.root_averages.size(); ++i)
    CHECK(a.root_averages[i].second == b.root_averages[i].second);
}

TEST_CASE("basis is orthonormal and complete") {
  for (int pick = 0; pick < 3; ++pick) {
    Grid g = pick == 0   ? line_grid(4, 1)
             : pick == 1 ? plane_grid(3, 1)
                         : line_grid(3, 2);
    std::vector<HaarIndex> basis = haar_basis(g);
    CHECK(static_cast<i64>(basis.size()) == g.cell_count());
    std::vector<GridFunction> hs;
    hs.reserve(basis.size());
    for (const HaarIndex& idx : basis) hs.push_back(haar(g, idx.cube, idx.eta));
    for (std::size_t i = 0; i < hs.size(); ++i)
      for (std::size_t j = 0; j < hs.size(); ++j) {
        const double want = i == j ? 1.0 : 0.0;
        CHECK(std::abs(pair(hs[i], hs[j])[0] - want) <= 1e-12);
      }
  }
}

TEST_CASE("squared norms add across the decomposition") {
  Rng rng(405);
  for (int trial = 0; trial < 6; ++trial) {
    Grid g = trial % 2 == 0 ? line_grid(4, 2) : plane_grid(3, 1);
    Space V = trial < 3 ? Space::scalar() : Space::schatten(1.0, 2);
    GridFunction f = GridFunction::random(g, V, rng);
    double total = sqr(flat_l2(f));
    double sum = 0;
    for (const Cube& q : g.all_cubes()) {
      if (q.scale == g.window().lmin) continue;
      sum += sqr(flat_l2(martingale_diff(f, q)));
    }
    for (const Cube& r : g.cubes(g.window().lmax))
      sum += sqr(flat_l2(expectation(f, r)));
    CHECK(std::abs(total - sum) <= 1e-12 * (1.0 + total));
  }
}

TEST_CASE("norms of simple step functions") {
  Grid g = line_grid();
  GridFunction f = indicator(g, Cube{-1, {0}});
  CHECK(f.lp_norm(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(f.lp_norm(2) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(f.sup_norm() == 1.0);
  CHECK(f.integral()[0] == cx{0.5, 0.0});
}

TEST_CASE("atoms carry their payload on one cube") {
  Grid g = line_grid();
  Space V = Space::seq_lp(2, 2);
  cxvec v{cx{2.0, 1.0}, cx{0.0, -3.0}};
  GridFunction a = haar_atom(g, V, v, Cube{0, {0}}, 1);
  for (i64 c = 0; c < 4; ++c)
    for (int j = 0; j < 2; ++j) CHECK(a.at(c)[j] == v[static_cast<std::size_t>(j)]);
  for (i64 c = 4; c < 8; ++c)
    for (int j = 0; j < 2; ++j) CHECK(a.at(c)[j] == -v[static_cast<std::size_t>(j)]);

  Rng rng(406);
  GridFunction w = GridFunction::random(g, V, rng);
  // pairing an atom against w recovers the coefficient pairing
  cx direct = bilinear_form(a, w);
  cxvec coeff = haar_coefficient(w, Cube{0, {0}}, 1);
  cx expect = v[0] * coeff[0] + v[1] * coeff[1];
  CHECK(std::abs(direct - expect) < 1e-13);
}

TEST_CASE("scale preconditions are enforced") {
  Grid g = line_grid();
  Cube cell{-3, {0}};
  CHECK_THROWS(haar(g, cell, 1));
  CHECK_NOTHROW(haar(g, cell, 0));
  CHECK_THROWS(martingale_diff(indicator(g, cell), cell));
  CHECK_THROWS(block_avg(indicator(g, cell), Cube{0, {0}}, 4));
  CHECK_THROWS(block_diff(indicator(g, cell), Cube{0, {0}}, 4));

  Grid g2 = line_grid(3);
  GridFunction f(g, Space::scalar());
  GridFunction h(g2, Space::scalar());
  CHECK_THROWS(pair(f, h));
  GridFunction v(g, Space::seq_lp(2, 2));
  CHECK_THROWS(pair(f, v));  // second factor must be scalar
}

}  // TEST_SUITE
