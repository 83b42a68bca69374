// Randomly translated dyadic lattices on a finite scale window.
//
// A grid lives on the box  [off, off + roots * 2^lmax)^dim  where the offset
// is determined by one 0/1 translation vector per scale.  Cube geometry is
// exact: every corner is an integer multiple of the finest cell side 2^lmin,
// and all containment/parent/child logic is integer arithmetic.  Floating
// point enters only when physical coordinates or measures are requested.
#pragma once

#include "dycalc/common.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace dycalc {

using i64 = std::int64_t;

struct ScaleWindow {
  int lmin = 0;
  int lmax = 0;  // cube side lengths run through 2^l, l in [lmin, lmax]
  int scales() const { return lmax - lmin + 1; }
  bool valid() const { return lmax >= lmin && lmax - lmin <= 40; }
  friend bool operator==(const ScaleWindow&, const ScaleWindow&) = default;
};

// Translation parameter: one 0/1 vector per scale l in [lmin, lmax).  The
// grid translated by it has scale-l cubes at positions  m*2^l + sum_{k<l,
// k>=lmin} bits[k]*2^k,  so every offset is an exact multiple of 2^lmin.
struct LatticeShift {
  std::vector<std::vector<std::uint8_t>> bits;  // bits[l - lmin][axis] in {0,1}

  static LatticeShift none(const ScaleWindow& w, int dim);
  static LatticeShift sample(const ScaleWindow& w, int dim, Rng& rng);
  friend bool operator==(const LatticeShift&, const LatticeShift&) = default;
};

// A cube is (scale, per-axis position).  Its corner sits at
// pos*2^(scale-lmin) + shift_units(scale) finest cells from the coordinate
// origin; the box-relative corner used for cell indexing is nonnegative.
struct Cube {
  int scale = 0;
  std::vector<i64> pos;
  friend auto operator<=>(const Cube&, const Cube&) = default;
};

class Grid {
public:
  Grid(int dim, ScaleWindow window, LatticeShift shift, i64 roots = 1);

  int dim() const { return dim_; }
  const ScaleWindow& window() const { return win_; }
  const LatticeShift& shift() const { return shift_; }
  i64 roots() const { return roots_; }

  // Cells per axis and total finest cells in the box.
  i64 extent() const { return extent_; }
  i64 cell_count() const { return cell_count_; }

  // Cube side in finest cells at a scale.
  i64 side_cells(int scale) const { return i64{1} << (scale - win_.lmin); }

  // Physical quantities.
  double length(int scale) const { return std::ldexp(1.0, scale); }
  double measure(const Cube& q) const { return std::ldexp(1.0, q.scale * dim_); }
  double cell_measure() const { return std::ldexp(1.0, win_.lmin * dim_); }

  // Per-axis position range of in-box cubes at a scale.
  i64 pos_lo(int scale, int axis) const;
  i64 pos_count(int scale) const { return roots_ << (win_.lmax - scale); }

  // Enumeration (ordered by scale, then lexicographic position).
  i64 cube_count() const;
  std::vector<Cube> cubes(int scale) const;
  std::vector<Cube> all_cubes() const;

  bool in_grid(const Cube& q) const;
  void require(const Cube& q) const;  // throws on out-of-window cubes

  // Box-relative corner of a cube, in finest cells (>= 0 on each axis).
  std::vector<i64> corner_cells(const Cube& q) const;
  // Physical corner / center in coordinates where cells have side 2^lmin.
  std::vector<double> corner(const Cube& q) const;
  std::vector<double> center(const Cube& q) const;

  // Tree structure.
  Cube parent(const Cube& q, int up = 1) const;
  std::vector<Cube> children(const Cube& q) const;
  bool contains(const Cube& outer, const Cube& inner) const;
  // Minimal grid cube containing every listed cube, if one exists.
  std::optional<Cube> common_parent(const std::vector<Cube>& qs) const;

  // Cell <-> cube maps.  Cells are linearised axis-0 fastest.
  i64 cell_index(const std::vector<i64>& cell) const;
  std::vector<i64> cell_coords(i64 index) const;
  Cube cube_at(int scale, const std::vector<i64>& cell) const;
  Cube cell_cube(i64 index) const {
    return cube_at(win_.lmin, cell_coords(index));
  }
  // Invokes fn for each finest-cell linear index covered by q.
  void for_each_cell(const Cube& q, const std::function<void(i64)>& fn) const;
  std::vector<i64> cells_of(const Cube& q) const;

  // Distance from q to the nearest boundary of any in-grid cube at `scale`
  // (>= q.scale), in physical units.  Because same-scale cubes tile the box,
  // this equals the smallest per-axis gap between q and the faces of its
  // scale-`scale` ancestor.
  double boundary_gap(const Cube& q, int scale) const;

  // True iff for every in-grid cube R with side >= 2^r * side(q) the distance
  // d(q, boundary of R) strictly exceeds side(q)^gamma * side(R)^(1-gamma).
  // Vacuously true when the window holds no such R.
  bool is_good(const Cube& q, double gamma, int r) const;

  // Cubes whose scale is congruent to j modulo k+1 (window-restricted).
  std::vector<int> sublattice_scales(int j, int k) const;
  std::vector<Cube> sublattice(int j, int k) const;

  // Finest cube containing the fixed physical point (2^lmax, ..., 2^lmax),
  // the center of the unshifted two-root box.  Because the point is fixed
  // while the lattice translates, the cube's relative position inside each
  // ancestor is uniformly distributed under a sampled shift.  Requires
  // roots >= 2 so the point stays interior for every translation.
  Cube central_cube() const;

private:
  int dim_;
  ScaleWindow win_;
  LatticeShift shift_;
  i64 roots_;
  i64 extent_;
  i64 cell_count_;
  // shift offset in finest cells, per scale index (scale - lmin), per axis
  std::vector<std::vector<i64>> off_;
  std::uint8_t shift_bit(int scale, int axis) const {
    return shift_.bits[static_cast<std::size_t>(scale - win_.lmin)]
                      [static_cast<std::size_t>(axis)];
  }
};

struct BadProbability {
  double estimate = 0;
  double stderr_ = 0;
  i64 trials = 0;
  bool exhaustive = false;
};

// Fraction of sampled lattice translations whose central cube is not
// (gamma,r)-good.  With exhaustive=true all translations are enumerated
// (requires (scales-1)*dim <= 20 bits) and stderr is zero.
BadProbability bad_probability(int dim, ScaleWindow window, i64 roots,
                               double gamma, int r, i64 trials,
                               std::uint64_t seed, bool exhaustive = false);

}  // namespace dycalc
