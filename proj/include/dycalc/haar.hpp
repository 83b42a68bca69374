// Step functions on a dyadic grid with values in a finite-dimensional space,
// martingale averaging and difference operators, and the tensor Haar system
// with exact expansion/reconstruction over the scale window.
#pragma once

#include "dycalc/lattice.hpp"
#include "dycalc/spaces.hpp"

#include <span>
#include <utility>
#include <vector>

namespace dycalc {

// A function constant on the finest cells of a grid, one flat coefficient
// vector per cell.  All quadrature on such functions is a finite sum, so the
// algebraic identities in this module hold to rounding error only.
class GridFunction {
public:
  GridFunction(const Grid& grid, Space codomain);  // identically zero
  static GridFunction constant(const Grid& g, const Space& V, const cxvec& value);
  static GridFunction random(const Grid& g, const Space& V, Rng& rng,
                             bool real_entries = false);

  const Grid& grid() const { return *grid_; }
  const Space& space() const { return space_; }

  std::span<cx> at(i64 cell);
  std::span<const cx> at(i64 cell) const;

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(cx a);

  // Integral over the box: cell measure times the sum of cell values.
  cxvec integral() const;
  // L^p norm of the cell-wise codomain norm (p = infinity gives sup_norm).
  double lp_norm(double p) const;
  double sup_norm() const;
  // L^2 norm of the cell-wise Euclidean coefficient norm.
  double l2_flat_norm() const;

  bool compatible(const GridFunction& o) const;

private:
  const Grid* grid_;
  Space space_;
  cxvec data_;  // cell-major, space_.dim() entries per cell
};

// Signature bitmask over axes: bit a set means the factor along axis a is
// the sign-alternating one; eta = 0 is the normalized indicator.
struct HaarIndex {
  Cube cube;
  int eta = 0;
  friend auto operator<=>(const HaarIndex&, const HaarIndex&) = default;
};

// Tensor Haar function on q: product over axes of |I|^{-1/2} times, on the
// axes picked by eta, +1 on the lower half and -1 on the upper half.
// eta != 0 requires q.scale > lmin so the halves consist of whole cells.
GridFunction haar(const Grid& g, const Cube& q, int eta);
// Value of the same function on one finest cell (0 outside q).
double haar_cell_value(const Grid& g, const Cube& q, int eta, i64 cell);

// Bilinear pairing integral of f against a scalar g: cell measure times the
// sum over cells of f(c) * g(c).
cxvec pair(const GridFunction& f, const GridFunction& g);
// Pairing of f with the (q, eta) Haar function, touching only cells of q.
cxvec haar_coefficient(const GridFunction& f, const Cube& q, int eta);

// v times the (q, eta) Haar function, as a V-valued step function.
GridFunction haar_atom(const Grid& g, const Space& V, const cxvec& v,
                       const Cube& q, int eta);

// Flat bilinear integral: cell measure times the sum over cells and
// coordinates of f_j * g_j.  Codomains may differ but must share dimension.
cx bilinear_form(const GridFunction& f, const GridFunction& g);

cxvec average(const GridFunction& f, const Cube& q);
// E_q f: the average of f over q, spread over q as a step function.
GridFunction expectation(const GridFunction& f, const Cube& q);
// Sum over children q' of E_{q'} f minus E_q f; requires q.scale > lmin.
GridFunction martingale_diff(const GridFunction& f, const Cube& q);
// Sums of E_r f (resp. martingale differences) over the depth-k descendants
// r of q; requires q.scale - k >= lmin.  Differences at the finest scale
// vanish identically because f is constant on cells.
GridFunction block_avg(const GridFunction& f, const Cube& q, int k);
GridFunction block_diff(const GridFunction& f, const Cube& q, int k);

// Coefficients against all sign-alternating Haar functions in the window
// plus the averages over the top-scale cubes; reconstruct inverts exactly.
struct HaarExpansion {
  std::vector<std::pair<HaarIndex, cxvec>> coefficients;
  std::vector<std::pair<Cube, cxvec>> root_averages;
};
HaarExpansion expand(const GridFunction& f);
GridFunction reconstruct(const Grid& g, const Space& V, const HaarExpansion& e);

// Orthonormal basis indices: eta = 0 on each top-scale cube, every nonzero
// signature on each strictly coarser-than-finest cube.  Size = cell count.
std::vector<HaarIndex> haar_basis(const Grid& g);

}  // namespace dycalc
