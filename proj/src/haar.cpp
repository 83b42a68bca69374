#include "dycalc/haar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dycalc {

namespace {

bool same_grid(const Grid& a, const Grid& b) {
  return &a == &b ||
         (a.dim() == b.dim() && a.window() == b.window() &&
          a.shift() == b.shift() && a.roots() == b.roots());
}

void require_signature(const Grid& g, const Cube& q, int eta) {
  g.require(q);
  if (eta < 0 || eta >= (1 << g.dim()))
    throw std::invalid_argument("haar: signature out of range");
  if (eta != 0 && q.scale <= g.window().lmin)
    throw std::invalid_argument("haar: no finer half at the finest scale");
}

}  // namespace

GridFunction::GridFunction(const Grid& grid, Space codomain)
    : grid_(&grid),
      space_(std::move(codomain)),
      data_(static_cast<std::size_t>(grid.cell_count()) *
            static_cast<std::size_t>(space_.dim())) {}

GridFunction GridFunction::constant(const Grid& g, const Space& V,
                                    const cxvec& value) {
  if (static_cast<int>(value.size()) != V.dim())
    throw std::invalid_argument("GridFunction::constant: value length");
  GridFunction f(g, V);
  for (i64 c = 0; c < g.cell_count(); ++c) {
    auto cell = f.at(c);
    std::copy(value.begin(), value.end(), cell.begin());
  }
  return f;
}

GridFunction GridFunction::random(const Grid& g, const Space& V, Rng& rng,
                                  bool real_entries) {
  GridFunction f(g, V);
  for (cx& z : f.data_) z = real_entries ? cx{rng.normal(), 0.0} : rng.cnormal();
  return f;
}

std::span<cx> GridFunction::at(i64 cell) {
  return {data_.data() + cell * space_.dim(),
          static_cast<std::size_t>(space_.dim())};
}

std::span<const cx> GridFunction::at(i64 cell) const {
  return {data_.data() + cell * space_.dim(),
          static_cast<std::size_t>(space_.dim())};
}

bool GridFunction::compatible(const GridFunction& o) const {
  return same_grid(*grid_, *o.grid_) && space_ == o.space_;
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  if (!compatible(o))
    throw std::invalid_argument("GridFunction: grid or codomain mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  if (!compatible(o))
    throw std::invalid_argument("GridFunction: grid or codomain mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

GridFunction& GridFunction::operator*=(cx a) {
  for (cx& z : data_) z *= a;
  return *this;
}

cxvec GridFunction::integral() const {
  cxvec out(static_cast<std::size_t>(space_.dim()));
  for (i64 c = 0; c < grid_->cell_count(); ++c) {
    auto v = at(c);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v[j];
  }
  const double w = grid_->cell_measure();
  for (cx& z : out) z *= w;
  return out;
}

double GridFunction::lp_norm(double p) const {
  if (p < 1.0) throw std::invalid_argument("GridFunction::lp_norm: p < 1");
  if (std::isinf(p)) return sup_norm();
  const double w = grid_->cell_measure();
  double s = 0;
  for (i64 c = 0; c < grid_->cell_count(); ++c)
    s += w * std::pow(space_.norm(at(c)), p);
  return std::pow(s, 1.0 / p);
}

double GridFunction::sup_norm() const {
  double m = 0;
  for (i64 c = 0; c < grid_->cell_count(); ++c)
    m = std::max(m, space_.norm(at(c)));
  return m;
}

double GridFunction::l2_flat_norm() const {
  double s = 0;
  for (const cx& z : data_) s += std::norm(z);
  return std::sqrt(grid_->cell_measure() * s);
}

double haar_cell_value(const Grid& g, const Cube& q, int eta, i64 cell) {
  const std::vector<i64> coords = g.cell_coords(cell);
  const std::vector<i64> corner = g.corner_cells(q);
  const i64 side = g.side_cells(q.scale);
  double sign = 1.0;
  for (int a = 0; a < g.dim(); ++a) {
    const i64 t = coords[static_cast<std::size_t>(a)] -
                  corner[static_cast<std::size_t>(a)];
    if (t < 0 || t >= side) return 0.0;
    if ((eta >> a) & 1) sign = t < side / 2 ? sign : -sign;
  }
  return sign / std::sqrt(g.measure(q));
}

GridFunction haar(const Grid& g, const Cube& q, int eta) {
  require_signature(g, q, eta);
  GridFunction h(g, Space::scalar());
  g.for_each_cell(q, [&](i64 c) { h.at(c)[0] = haar_cell_value(g, q, eta, c); });
  return h;
}

GridFunction haar_atom(const Grid& g, const Space& V, const cxvec& v,
                       const Cube& q, int eta) {
  require_signature(g, q, eta);
  if (static_cast<int>(v.size()) != V.dim())
    throw std::invalid_argument("haar_atom: value length");
  GridFunction f(g, V);
  g.for_each_cell(q, [&](i64 c) {
    const double w = haar_cell_value(g, q, eta, c);
    auto cell = f.at(c);
    for (std::size_t j = 0; j < v.size(); ++j) cell[j] = v[j] * w;
  });
  return f;
}

cx bilinear_form(const GridFunction& f, const GridFunction& g) {
  if (!same_grid(f.grid(), g.grid()))
    throw std::invalid_argument("bilinear_form: grid mismatch");
  if (f.space().dim() != g.space().dim())
    throw std::invalid_argument("bilinear_form: dimension mismatch");
  const int dim = f.space().dim();
  cx s = 0;
  for (i64 c = 0; c < f.grid().cell_count(); ++c) {
    auto a = f.at(c);
    auto b = g.at(c);
    for (int j = 0; j < dim; ++j) s += a[j] * b[j];
  }
  return s * f.grid().cell_measure();
}

cxvec pair(const GridFunction& f, const GridFunction& g) {
  if (!same_grid(f.grid(), g.grid()))
    throw std::invalid_argument("pair: grid mismatch");
  if (g.space().dim() != 1)
    throw std::invalid_argument("pair: second factor must be scalar-valued");
  const int dim = f.space().dim();
  cxvec out(static_cast<std::size_t>(dim));
  for (i64 c = 0; c < f.grid().cell_count(); ++c) {
    const cx w = g.at(c)[0];
    if (w == cx{0.0, 0.0}) continue;
    auto v = f.at(c);
    for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(j)] += v[j] * w;
  }
  const double m = f.grid().cell_measure();
  for (cx& z : out) z *= m;
  return out;
}

cxvec haar_coefficient(const GridFunction& f, const Cube& q, int eta) {
  const Grid& g = f.grid();
  require_signature(g, q, eta);
  const int dim = f.space().dim();
  cxvec out(static_cast<std::size_t>(dim));
  g.for_each_cell(q, [&](i64 c) {
    const double w = haar_cell_value(g, q, eta, c);
    auto v = f.at(c);
    for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(j)] += v[j] * w;
  });
  const double m = g.cell_measure();
  for (cx& z : out) z *= m;
  return out;
}

cxvec average(const GridFunction& f, const Cube& q) {
  const Grid& g = f.grid();
  g.require(q);
  const int dim = f.space().dim();
  cxvec out(static_cast<std::size_t>(dim));
  i64 count = 0;
  g.for_each_cell(q, [&](i64 c) {
    auto v = f.at(c);
    for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(j)] += v[j];
    ++count;
  });
  for (cx& z : out) z /= static_cast<double>(count);
  return out;
}

GridFunction expectation(const GridFunction& f, const Cube& q) {
  const Grid& g = f.grid();
  const cxvec avg = average(f, q);
  GridFunction out(g, f.space());
  g.for_each_cell(q, [&](i64 c) {
    auto v = out.at(c);
    std::copy(avg.begin(), avg.end(), v.begin());
  });
  return out;
}

namespace {

// Writes (average over child) - (average over q) onto each child's cells.
void add_diff_of(const GridFunction& f, const Cube& q, GridFunction& out) {
  const Grid& g = f.grid();
  const cxvec base = average(f, q);
  for (const Cube& child : g.children(q)) {
    cxvec delta = average(f, child);
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] -= base[j];
    g.for_each_cell(child, [&](i64 c) {
      auto v = out.at(c);
      for (std::size_t j = 0; j < delta.size(); ++j) v[j] += delta[j];
    });
  }
}

void descendants_at_depth(const Grid& g, const Cube& q, int k,
                          std::vector<Cube>& out) {
  if (k == 0) {
    out.push_back(q);
    return;
  }
  for (const Cube& child : g.children(q))
    descendants_at_depth(g, child, k - 1, out);
}

}  // namespace

GridFunction martingale_diff(const GridFunction& f, const Cube& q) {
  const Grid& g = f.grid();
  g.require(q);
  if (q.scale <= g.window().lmin)
    throw std::invalid_argument("martingale_diff: cube has no children");
  GridFunction out(g, f.space());
  add_diff_of(f, q, out);
  return out;
}

GridFunction block_avg(const GridFunction& f, const Cube& q, int k) {
  const Grid& g = f.grid();
  g.require(q);
  if (k < 0 || q.scale - k < g.window().lmin)
    throw std::invalid_argument("block_avg: depth leaves the scale window");
  std::vector<Cube> level;
  descendants_at_depth(g, q, k, level);
  GridFunction out(g, f.space());
  for (const Cube& r : level) {
    const cxvec avg = average(f, r);
    g.for_each_cell(r, [&](i64 c) {
      auto v = out.at(c);
      std::copy(avg.begin(), avg.end(), v.begin());
    });
  }
  return out;
}

GridFunction block_diff(const GridFunction& f, const Cube& q, int k) {
  const Grid& g = f.grid();
  g.require(q);
  if (k < 0 || q.scale - k < g.window().lmin)
    throw std::invalid_argument("block_diff: depth leaves the scale window");
  GridFunction out(g, f.space());
  if (q.scale - k == g.window().lmin) return out;  // cell-constant data
  std::vector<Cube> level;
  descendants_at_depth(g, q, k, level);
  for (const Cube& r : level) add_diff_of(f, r, out);
  return out;
}

HaarExpansion expand(const GridFunction& f) {
  const Grid& g = f.grid();
  HaarExpansion e;
  for (const Cube& r : g.cubes(g.window().lmax))
    e.root_averages.emplace_back(r, average(f, r));

  std::vector<HaarIndex> indices;
  const int etas = 1 << g.dim();
  for (int s = g.window().lmin + 1; s <= g.window().lmax; ++s)
    for (const Cube& q : g.cubes(s))
      for (int eta = 1; eta < etas; ++eta) indices.push_back({q, eta});

  e.coefficients.resize(indices.size());
  run_chunks(indices.size(), [&](std::size_t lo, std::size_t hi, std::size_t) {
    for (std::size_t i = lo; i < hi; ++i) {
      const HaarIndex& idx = indices[i];
      e.coefficients[i] = {idx, haar_coefficient(f, idx.cube, idx.eta)};
    }
  });
  return e;
}

GridFunction reconstruct(const Grid& g, const Space& V,
                         const HaarExpansion& e) {
  GridFunction f(g, V);
  const std::size_t dim = static_cast<std::size_t>(V.dim());
  for (const auto& [r, avg] : e.root_averages) {
    if (avg.size() != dim)
      throw std::invalid_argument("reconstruct: coefficient length");
    g.for_each_cell(r, [&](i64 c) {
      auto v = f.at(c);
      for (std::size_t j = 0; j < dim; ++j) v[j] += avg[j];
    });
  }
  for (const auto& [idx, coeff] : e.coefficients) {
    if (coeff.size() != dim)
      throw std::invalid_argument("reconstruct: coefficient length");
    g.for_each_cell(idx.cube, [&](i64 c) {
      const double w = haar_cell_value(g, idx.cube, idx.eta, c);
      auto v = f.at(c);
      for (std::size_t j = 0; j < dim; ++j) v[j] += coeff[j] * w;
    });
  }
  return f;
}

std::vector<HaarIndex> haar_basis(const Grid& g) {
  std::vector<HaarIndex> basis;
  for (const Cube& r : g.cubes(g.window().lmax)) basis.push_back({r, 0});
  const int etas = 1 << g.dim();
  for (int s = g.window().lmin + 1; s <= g.window().lmax; ++s)
    for (const Cube& q : g.cubes(s))
      for (int eta = 1; eta < etas; ++eta) basis.push_back({q, eta});
  return basis;
}

}  // namespace dycalc
