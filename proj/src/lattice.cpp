#include "dycalc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dycalc {

LatticeShift LatticeShift::none(const ScaleWindow& w, int dim) {
  LatticeShift s;
  s.bits.assign(static_cast<std::size_t>(std::max(0, w.scales() - 1)),
                std::vector<std::uint8_t>(static_cast<std::size_t>(dim), 0));
  return s;
}

LatticeShift LatticeShift::sample(const ScaleWindow& w, int dim, Rng& rng) {
  LatticeShift s = none(w, dim);
  for (auto& level : s.bits)
    for (auto& b : level) b = static_cast<std::uint8_t>(rng.bit());
  return s;
}

Grid::Grid(int dim, ScaleWindow window, LatticeShift shift, i64 roots)
    : dim_(dim), win_(window), shift_(std::move(shift)), roots_(roots) {
  if (dim_ < 1 || dim_ > 4) throw std::invalid_argument("Grid: dim out of range");
  if (!win_.valid()) throw std::invalid_argument("Grid: bad scale window");
  if (roots_ < 1) throw std::invalid_argument("Grid: roots < 1");
  const auto levels = static_cast<std::size_t>(win_.scales() - 1);
  if (shift_.bits.size() != levels)
    throw std::invalid_argument("Grid: shift has wrong number of levels");
  for (const auto& level : shift_.bits) {
    if (level.size() != static_cast<std::size_t>(dim_))
      throw std::invalid_argument("Grid: shift has wrong dimension");
    for (auto b : level)
      if (b > 1) throw std::invalid_argument("Grid: shift bits must be 0/1");
  }
  extent_ = roots_ << (win_.lmax - win_.lmin);
  cell_count_ = 1;
  for (int a = 0; a < dim_; ++a) {
    if (cell_count_ > (i64{1} << 40) / extent_)
      throw std::invalid_argument("Grid: too many cells");
    cell_count_ *= extent_;
  }
  // off_[s][axis] = sum_{l < lmin+s} bits[l][axis] * 2^(l-lmin)
  off_.assign(static_cast<std::size_t>(win_.scales()),
              std::vector<i64>(static_cast<std::size_t>(dim_), 0));
  for (int s = 1; s < win_.scales(); ++s)
    for (int a = 0; a < dim_; ++a)
      off_[s][a] = off_[s - 1][a] +
                   (i64{shift_.bits[s - 1][a]} << (s - 1));
}

i64 Grid::pos_lo(int scale, int axis) const {
  // First in-box position: the box starts off_[top] cells in; scale-`scale`
  // cubes are aligned off_[scale] cells in with stride 2^(scale-lmin).
  const auto si = static_cast<std::size_t>(scale - win_.lmin);
  const auto ti = static_cast<std::size_t>(win_.lmax - win_.lmin);
  const i64 delta = off_[ti][static_cast<std::size_t>(axis)] -
                    off_[si][static_cast<std::size_t>(axis)];
  return delta >> (scale - win_.lmin);
}

i64 Grid::cube_count() const {
  i64 total = 0;
  for (int s = win_.lmin; s <= win_.lmax; ++s) {
    i64 per_axis = pos_count(s), n = 1;
    for (int a = 0; a < dim_; ++a) n *= per_axis;
    total += n;
  }
  return total;
}

std::vector<Cube> Grid::cubes(int scale) const {
  if (scale < win_.lmin || scale > win_.lmax)
    throw std::invalid_argument("Grid::cubes: scale outside window");
  const i64 per_axis = pos_count(scale);
  std::vector<i64> lo(static_cast<std::size_t>(dim_));
  for (int a = 0; a < dim_; ++a) lo[static_cast<std::size_t>(a)] = pos_lo(scale, a);
  std::vector<Cube> out;
  i64 n = 1;
  for (int a = 0; a < dim_; ++a) n *= per_axis;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<i64> idx(static_cast<std::size_t>(dim_), 0);
  for (i64 k = 0; k < n; ++k) {
    Cube q;
    q.scale = scale;
    q.pos.resize(static_cast<std::size_t>(dim_));
    for (int a = 0; a < dim_; ++a)
      q.pos[static_cast<std::size_t>(a)] =
          lo[static_cast<std::size_t>(a)] + idx[static_cast<std::size_t>(a)];
    out.push_back(std::move(q));
    for (int a = 0; a < dim_; ++a) {
      auto& v = idx[static_cast<std::size_t>(a)];
      if (++v < per_axis) break;
      v = 0;
    }
  }
  return out;
}

std::vector<Cube> Grid::all_cubes() const {
  std::vector<Cube> out;
  for (int s = win_.lmin; s <= win_.lmax; ++s) {
    auto level = cubes(s);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

bool Grid::in_grid(const Cube& q) const {
  if (q.scale < win_.lmin || q.scale > win_.lmax) return false;
  if (q.pos.size() != static_cast<std::size_t>(dim_)) return false;
  for (int a = 0; a < dim_; ++a) {
    const i64 lo = pos_lo(q.scale, a);
    const i64 p = q.pos[static_cast<std::size_t>(a)];
    if (p < lo || p >= lo + pos_count(q.scale)) return false;
  }
  return true;
}

void Grid::require(const Cube& q) const {
  if (!in_grid(q)) throw std::invalid_argument("cube outside grid");
}

std::vector<i64> Grid::corner_cells(const Cube& q) const {
  require(q);
  std::vector<i64> c(static_cast<std::size_t>(dim_));
  const i64 side = side_cells(q.scale);
  for (int a = 0; a < dim_; ++a)
    c[static_cast<std::size_t>(a)] =
        (q.pos[static_cast<std::size_t>(a)] - pos_lo(q.scale, a)) * side;
  return c;
}

std::vector<double> Grid::corner(const Cube& q) const {
  require(q);
  std::vector<double> c(static_cast<std::size_t>(dim_));
  const auto si = static_cast<std::size_t>(q.scale - win_.lmin);
  for (int a = 0; a < dim_; ++a) {
    const i64 units = q.pos[static_cast<std::size_t>(a)] * side_cells(q.scale) +
                      off_[si][static_cast<std::size_t>(a)];
    c[static_cast<std::size_t>(a)] = std::ldexp(static_cast<double>(units), win_.lmin);
  }
  return c;
}

std::vector<double> Grid::center(const Cube& q) const {
  auto c = corner(q);
  for (auto& x : c) x += 0.5 * length(q.scale);
  return c;
}

Cube Grid::parent(const Cube& q, int up) const {
  require(q);
  if (up < 0 || q.scale + up > win_.lmax)
    throw std::invalid_argument("Grid::parent: scale outside window");
  Cube p = q;
  for (int step = 0; step < up; ++step) {
    for (int a = 0; a < dim_; ++a) {
      auto& v = p.pos[static_cast<std::size_t>(a)];
      v = (v - shift_bit(p.scale, a)) >> 1;
    }
    ++p.scale;
  }
  return p;
}

std::vector<Cube> Grid::children(const Cube& q) const {
  require(q);
  if (q.scale == win_.lmin)
    throw std::invalid_argument("Grid::children: cube already at finest scale");
  std::vector<Cube> out;
  out.reserve(std::size_t{1} << dim_);
  const int cs = q.scale - 1;
  for (i64 mask = 0; mask < (i64{1} << dim_); ++mask) {
    Cube c;
    c.scale = cs;
    c.pos.resize(static_cast<std::size_t>(dim_));
    for (int a = 0; a < dim_; ++a)
      c.pos[static_cast<std::size_t>(a)] =
          2 * q.pos[static_cast<std::size_t>(a)] + shift_bit(cs, a) +
          ((mask >> a) & 1);
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Grid::contains(const Cube& outer, const Cube& inner) const {
  if (outer.scale < inner.scale) return false;
  if (outer.scale == inner.scale) return outer == inner;
  return parent(inner, outer.scale - inner.scale) == outer;
}

std::optional<Cube> Grid::common_parent(const std::vector<Cube>& qs) const {
  if (qs.empty()) return std::nullopt;
  int top = qs.front().scale;
  for (const auto& q : qs) {
    require(q);
    top = std::max(top, q.scale);
  }
  for (int s = top; s <= win_.lmax; ++s) {
    const Cube k = parent(qs.front(), s - qs.front().scale);
    bool all = true;
    for (const auto& q : qs)
      if (!contains(k, q)) {
        all = false;
        break;
      }
    if (all) return k;
  }
  return std::nullopt;
}

i64 Grid::cell_index(const std::vector<i64>& cell) const {
  if (cell.size() != static_cast<std::size_t>(dim_))
    throw std::invalid_argument("cell_index: wrong dimension");
  i64 idx = 0;
  for (int a = dim_ - 1; a >= 0; --a) {
    const i64 u = cell[static_cast<std::size_t>(a)];
    if (u < 0 || u >= extent_) throw std::invalid_argument("cell_index: out of box");
    idx = idx * extent_ + u;
  }
  return idx;
}

std::vector<i64> Grid::cell_coords(i64 index) const {
  if (index < 0 || index >= cell_count_)
    throw std::invalid_argument("cell_coords: out of range");
  std::vector<i64> c(static_cast<std::size_t>(dim_));
  for (int a = 0; a < dim_; ++a) {
    c[static_cast<std::size_t>(a)] = index % extent_;
    index /= extent_;
  }
  return c;
}

Cube Grid::cube_at(int scale, const std::vector<i64>& cell) const {
  if (scale < win_.lmin || scale > win_.lmax)
    throw std::invalid_argument("cube_at: scale outside window");
  if (cell.size() != static_cast<std::size_t>(dim_))
    throw std::invalid_argument("cube_at: wrong dimension");
  const auto si = static_cast<std::size_t>(scale - win_.lmin);
  const auto ti = static_cast<std::size_t>(win_.lmax - win_.lmin);
  Cube q;
  q.scale = scale;
  q.pos.resize(static_cast<std::size_t>(dim_));
  for (int a = 0; a < dim_; ++a) {
    const i64 u = cell[static_cast<std::size_t>(a)];
    if (u < 0 || u >= extent_) throw std::invalid_argument("cube_at: out of box");
    // absolute units of the cell corner, then divide by the cube stride
    const i64 abs_units = u + off_[ti][static_cast<std::size_t>(a)];
    q.pos[static_cast<std::size_t>(a)] =
        (abs_units - off_[si][static_cast<std::size_t>(a)]) >> (scale - win_.lmin);
  }
  return q;
}

void Grid::for_each_cell(const Cube& q, const std::function<void(i64)>& fn) const {
  const auto corner = corner_cells(q);
  const i64 side = side_cells(q.scale);
  i64 n = 1;
  for (int a = 0; a < dim_; ++a) n *= side;
  std::vector<i64> cell(corner);
  std::vector<i64> idx(static_cast<std::size_t>(dim_), 0);
  for (i64 k = 0; k < n; ++k) {
    fn(cell_index(cell));
    for (int a = 0; a < dim_; ++a) {
      auto& v = idx[static_cast<std::size_t>(a)];
      auto& u = cell[static_cast<std::size_t>(a)];
      if (++v < side) {
        ++u;
        break;
      }
      v = 0;
      u = corner[static_cast<std::size_t>(a)];
    }
  }
}

std::vector<i64> Grid::cells_of(const Cube& q) const {
  std::vector<i64> out;
  for_each_cell(q, [&](i64 c) { out.push_back(c); });
  return out;
}

double Grid::boundary_gap(const Cube& q, int scale) const {
  require(q);
  if (scale < q.scale || scale > win_.lmax)
    throw std::invalid_argument("boundary_gap: bad scale");
  const Cube anc = parent(q, scale - q.scale);
  const auto qc = corner_cells(q);
  const auto ac = corner_cells(anc);
  const i64 qs = side_cells(q.scale), as = side_cells(scale);
  i64 gap_cells = extent_;
  for (int a = 0; a < dim_; ++a) {
    const i64 lo = qc[static_cast<std::size_t>(a)] - ac[static_cast<std::size_t>(a)];
    const i64 hi = (ac[static_cast<std::size_t>(a)] + as) -
                   (qc[static_cast<std::size_t>(a)] + qs);
    gap_cells = std::min({gap_cells, lo, hi});
  }
  return std::ldexp(static_cast<double>(gap_cells), win_.lmin);
}

bool Grid::is_good(const Cube& q, double gamma, int r) const {
  require(q);
  if (r < 1) throw std::invalid_argument("is_good: r must be >= 1");
  for (int s = q.scale + r; s <= win_.lmax; ++s) {
    const double threshold =
        std::exp2(gamma * q.scale + (1.0 - gamma) * s);
    if (!(boundary_gap(q, s) > threshold)) return false;
  }
  return true;
}

std::vector<int> Grid::sublattice_scales(int j, int k) const {
  if (k < 0) throw std::invalid_argument("sublattice_scales: k < 0");
  const int mod = k + 1;
  std::vector<int> out;
  for (int s = win_.lmin; s <= win_.lmax; ++s) {
    int rem = s % mod;
    if (rem < 0) rem += mod;
    int want = j % mod;
    if (want < 0) want += mod;
    if (rem == want) out.push_back(s);
  }
  return out;
}

std::vector<Cube> Grid::sublattice(int j, int k) const {
  std::vector<Cube> out;
  for (int s : sublattice_scales(j, k)) {
    auto level = cubes(s);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

Cube Grid::central_cube() const {
  // Absolute probe point 2^lmax = extent_ / roots_ finest cells from the
  // coordinate origin; convert to box-relative cells.
  const auto ti = static_cast<std::size_t>(win_.lmax - win_.lmin);
  const i64 probe = extent_ / roots_;
  std::vector<i64> cell(static_cast<std::size_t>(dim_));
  for (int a = 0; a < dim_; ++a) {
    const i64 c = probe - off_[ti][static_cast<std::size_t>(a)];
    if (c < 0 || c >= extent_)
      throw std::logic_error(
          "central_cube: probe point outside shifted box (need roots >= 2)");
    cell[static_cast<std::size_t>(a)] = c;
  }
  return cube_at(win_.lmin, cell);
}

BadProbability bad_probability(int dim, ScaleWindow window, i64 roots,
                               double gamma, int r, i64 trials,
                               std::uint64_t seed, bool exhaustive) {
  BadProbability out;
  if (roots < 2)
    throw std::invalid_argument("bad_probability: need roots >= 2 to anchor the probe");
  const int levels = window.scales() - 1;
  auto run_one = [&](const LatticeShift& shift) {
    Grid g(dim, window, shift, roots);
    return g.is_good(g.central_cube(), gamma, r) ? 0 : 1;
  };
  if (exhaustive) {
    const int bits = levels * dim;
    if (bits > 20)
      throw std::invalid_argument("bad_probability: exhaustive window too large");
    const i64 total = i64{1} << bits;
    i64 bad = 0;
    for (i64 mask = 0; mask < total; ++mask) {
      LatticeShift shift = LatticeShift::none(window, dim);
      for (int l = 0; l < levels; ++l)
        for (int a = 0; a < dim; ++a)
          shift.bits[static_cast<std::size_t>(l)][static_cast<std::size_t>(a)] =
              static_cast<std::uint8_t>((mask >> (l * dim + a)) & 1);
      bad += run_one(shift);
    }
    out.estimate = static_cast<double>(bad) / static_cast<double>(total);
    out.stderr_ = 0;
    out.trials = total;
    out.exhaustive = true;
    return out;
  }
  if (trials < 1) throw std::invalid_argument("bad_probability: trials < 1");
  Rng rng(seed);
  i64 bad = 0;
  for (i64 t = 0; t < trials; ++t)
    bad += run_one(LatticeShift::sample(window, dim, rng));
  const double p = static_cast<double>(bad) / static_cast<double>(trials);
  out.estimate = p;
  out.stderr_ = std::sqrt(std::max(0.0, p * (1.0 - p) / static_cast<double>(trials)));
  out.trials = trials;
  return out;
}

}  // namespace dycalc
