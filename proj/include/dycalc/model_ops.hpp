// Finitely supported dyadic model operators: multilinear shifts that pair
// inputs against Haar functions hanging below a common top cube, paraproducts
// that pair against local averages, multi-parameter shifts over products of
// grids, and the lifting that packs a doubly-indexed family of bilinear
// shifts into one shift over stacked coefficient spaces.
#pragma once

#include "dycalc/haar.hpp"

#include <map>
#include <utility>
#include <vector>

namespace dycalc {

// One coefficient key: the top cube plus one (cube, signature) slot per
// argument and one for the output.  Slot cubes sit a prescribed number of
// levels below the top cube; signatures alternate exactly on the two slots
// the spec declares sign-alternating.
struct ShiftKey {
  Cube top;
  std::vector<HaarIndex> slots;
  friend auto operator<=>(const ShiftKey&, const ShiftKey&) = default;
};

class ShiftSpec {
public:
  // complexity has one depth per slot (inputs then output); cancellative
  // names the two slots (0-based, output slot = arity) whose Haar factor
  // must alternate in sign.
  ShiftSpec(const Grid& g, std::vector<int> complexity,
            std::pair<int, int> cancellative, std::vector<Space> ins,
            Space out);

  void set(const ShiftKey& key, MultilinearOp a);  // validates, overwrites

  const Grid& grid() const { return *grid_; }
  int arity() const { return static_cast<int>(ins_.size()); }
  const std::vector<int>& complexity() const { return complexity_; }
  std::pair<int, int> cancellative() const { return cancellative_; }
  const std::vector<Space>& ins() const { return ins_; }
  const Space& out() const { return out_; }
  const std::map<ShiftKey, MultilinearOp>& coefficients() const {
    return coeffs_;
  }

private:
  const Grid* grid_;
  std::vector<int> complexity_;
  std::pair<int, int> cancellative_;
  std::vector<Space> ins_;
  Space out_;
  std::map<ShiftKey, MultilinearOp> coeffs_;
};

// Sum over keys of a[<f_1, h_{Q_1}>, ..., <f_n, h_{Q_n}>] h_{Q_out}.
GridFunction apply_shift(const ShiftSpec& s, const std::vector<GridFunction>& fs);
// The pairing of that sum against g, evaluated without materializing it.
cx shift_form(const ShiftSpec& s, const std::vector<GridFunction>& fs,
              const GridFunction& g);
// Coefficients rescaled by |K|^n / prod_m |Q_m|^{1/2}, in sorted key order.
std::vector<std::pair<ShiftKey, MultilinearOp>> normalized_coeffs(
    const ShiftSpec& s);

class ParaproductSpec {
public:
  ParaproductSpec(const Grid& g, std::vector<Space> ins, Space out);
  // Keys are sign-alternating atoms; coefficients consume input averages.
  void set(const HaarIndex& key, MultilinearOp a);

  const Grid& grid() const { return *grid_; }
  int arity() const { return static_cast<int>(ins_.size()); }
  const std::vector<Space>& ins() const { return ins_; }
  const Space& out() const { return out_; }
  const std::map<HaarIndex, MultilinearOp>& coefficients() const {
    return coeffs_;
  }

private:
  const Grid* grid_;
  std::vector<Space> ins_;
  Space out_;
  std::map<HaarIndex, MultilinearOp> coeffs_;
};

// Sum over keys of a[<f_1>_Q, ..., <f_n>_Q] h_Q.
GridFunction apply_paraproduct(const ParaproductSpec& p,
                               const std::vector<GridFunction>& fs);

// Product of independent grids; cells are linearized factor-0 fastest.
class ProductGrid {
public:
  explicit ProductGrid(std::vector<const Grid*> factors);

  int params() const { return static_cast<int>(factors_.size()); }
  const Grid& factor(int i) const { return *factors_[static_cast<std::size_t>(i)]; }
  i64 cell_count() const { return cell_count_; }
  double cell_measure() const { return cell_measure_; }

  i64 index(const std::vector<i64>& cells) const;
  std::vector<i64> coords(i64 index) const;

private:
  std::vector<const Grid*> factors_;
  std::vector<i64> strides_;
  i64 cell_count_;
  double cell_measure_;
};

// Step function on a product of grids, constant on product cells.
class ProductFunction {
public:
  ProductFunction(ProductGrid grid, Space codomain);  // identically zero
  static ProductFunction random(const ProductGrid& g, const Space& V, Rng& rng);
  // u(x) v(y) for scalar v, over the two factor grids of u and v.
  static ProductFunction tensor(const GridFunction& u, const GridFunction& v);

  const ProductGrid& grid() const { return grid_; }
  const Space& space() const { return space_; }
  std::span<cx> at(i64 cell);
  std::span<const cx> at(i64 cell) const;
  double sup_norm() const;

private:
  ProductGrid grid_;
  Space space_;
  cxvec data_;
};

// Rectangle key: one per-parameter shift key, sharing the slot layout.
using MultiKey = std::vector<ShiftKey>;

class MultiParamShiftSpec {
public:
  // One complexity vector and one sign-alternating slot pair per parameter;
  // the pair may differ across parameters but is fixed within each.
  MultiParamShiftSpec(ProductGrid grid,
                      std::vector<std::vector<int>> complexity,
                      std::vector<std::pair<int, int>> cancellative,
                      std::vector<Space> ins, Space out);

  void set(const MultiKey& key, MultilinearOp a);

  const ProductGrid& grid() const { return grid_; }
  int arity() const { return static_cast<int>(ins_.size()); }
  const std::vector<std::vector<int>>& complexity() const { return complexity_; }
  const std::vector<std::pair<int, int>>& cancellative() const {
    return cancellative_;
  }
  const std::vector<Space>& ins() const { return ins_; }
  const Space& out() const { return out_; }
  const std::map<MultiKey, MultilinearOp>& coefficients() const {
    return coeffs_;
  }

private:
  ProductGrid grid_;
  std::vector<std::vector<int>> complexity_;
  std::vector<std::pair<int, int>> cancellative_;
  std::vector<Space> ins_;
  Space out_;
  std::map<MultiKey, MultilinearOp> coeffs_;
};

// Direct summation over rectangle keys.
ProductFunction apply_multiparam_shift(const MultiParamShiftSpec& s,
                                       const std::vector<ProductFunction>& fs);
// Evaluates by fixing the named parameter outermost: keys are grouped by
// their component there, each group's inner shift acts on the partial Haar
// coefficients over that parameter, and the group atom is tensored back on.
// Agrees with direct summation identically.
ProductFunction nested_apply(const MultiParamShiftSpec& s, int param,
                             const std::vector<ProductFunction>& fs);

// Stacks equal-shape component functions into one function whose codomain
// is the coefficient sequence space; block i holds component i.
GridFunction stack_components(const std::vector<GridFunction>& comps);

// Packs N^3 bilinear shifts S_{t,u,v} (lexicographic index (t*N+u)*N+v) with
// unimodular weights into a single shift over stacked spaces such that
// pairing the lifted shift against stacked data reproduces
//   sum_{t,u,v} eps_{t,u,v} <S_{t,u,v}(f1_{t,u}, f2_{u,v}), f3_{t,v}>
// exactly, with component (a,b) of a stacked argument stored in block a*N+b.
ShiftSpec lift_shift_family(const std::vector<ShiftSpec>& family,
                            const cxvec& eps, int N);

// Largest observed ratio ||S(f)||_{q} / prod_m ||f_m||_{p_m} over seeded
// random inputs interleaved with atoms drawn from the spec's own keys;
// exponents = (p_1, ..., p_n, q) with sum 1/p_m = 1/q.  Monotone
// nondecreasing in trials for a fixed seed.
double op_norm_estimate(const ShiftSpec& s, const std::vector<double>& exponents,
                        int trials, std::uint64_t seed);

}  // namespace dycalc
