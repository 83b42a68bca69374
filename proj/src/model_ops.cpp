#include "dycalc/model_ops.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>

namespace dycalc {

namespace {

bool same_grid(const Grid& a, const Grid& b) {
  return &a == &b ||
         (a.dim() == b.dim() && a.window() == b.window() &&
          a.shift() == b.shift() && a.roots() == b.roots());
}

bool same_product_grid(const ProductGrid& a, const ProductGrid& b) {
  if (a.params() != b.params()) return false;
  for (int i = 0; i < a.params(); ++i)
    if (!same_grid(a.factor(i), b.factor(i))) return false;
  return true;
}

void check_slot_pair(std::pair<int, int>& pair, int arity) {
  if (pair.first > pair.second) std::swap(pair.first, pair.second);
  if (pair.first < 0 || pair.second > arity || pair.first == pair.second)
    throw std::invalid_argument("shift: sign-alternating slots out of range");
}

void check_complexity(const std::vector<int>& k, int arity) {
  if (static_cast<int>(k.size()) != arity + 1)
    throw std::invalid_argument("shift: one depth per slot is required");
  for (int v : k)
    if (v < 0) throw std::invalid_argument("shift: negative depth");
}

void check_key_component(const Grid& g, const ShiftKey& key,
                         const std::vector<int>& complexity,
                         std::pair<int, int> cancellative, int arity) {
  g.require(key.top);
  if (static_cast<int>(key.slots.size()) != arity + 1)
    throw std::invalid_argument("shift: one slot per argument plus output");
  for (int j = 0; j <= arity; ++j) {
    const HaarIndex& slot = key.slots[static_cast<std::size_t>(j)];
    g.require(slot.cube);
    if (g.parent(slot.cube, complexity[static_cast<std::size_t>(j)]) != key.top)
      throw std::invalid_argument("shift: slot cube depth mismatch");
    if (slot.eta < 0 || slot.eta >= (1 << g.dim()))
      throw std::invalid_argument("shift: signature out of range");
    const bool alternating = j == cancellative.first || j == cancellative.second;
    if (alternating != (slot.eta != 0))
      throw std::invalid_argument("shift: signature pattern mismatch");
    if (slot.eta != 0 && slot.cube.scale <= g.window().lmin)
      throw std::invalid_argument("shift: no finer half at the finest scale");
  }
}

void check_coefficient_shape(const MultilinearOp& a,
                             const std::vector<Space>& ins, const Space& out) {
  if (a.arity() != static_cast<int>(ins.size()))
    throw std::invalid_argument("shift: coefficient arity mismatch");
  for (std::size_t m = 0; m < ins.size(); ++m)
    if (!(a.ins()[m] == ins[m]))
      throw std::invalid_argument("shift: coefficient input space mismatch");
  if (!(a.out() == out))
    throw std::invalid_argument("shift: coefficient output space mismatch");
}

void check_arguments(const std::vector<GridFunction>& fs, const Grid& g,
                     const std::vector<Space>& ins) {
  if (fs.size() != ins.size())
    throw std::invalid_argument("shift: wrong number of arguments");
  for (std::size_t m = 0; m < fs.size(); ++m) {
    if (!same_grid(fs[m].grid(), g))
      throw std::invalid_argument("shift: argument grid mismatch");
    if (!(fs[m].space() == ins[m]))
      throw std::invalid_argument("shift: argument space mismatch");
  }
}

}  // namespace

ShiftSpec::ShiftSpec(const Grid& g, std::vector<int> complexity,
                     std::pair<int, int> cancellative, std::vector<Space> ins,
                     Space out)
    : grid_(&g),
      complexity_(std::move(complexity)),
      cancellative_(cancellative),
      ins_(std::move(ins)),
      out_(std::move(out)) {
  if (ins_.empty()) throw std::invalid_argument("shift: at least one argument");
  check_complexity(complexity_, arity());
  check_slot_pair(cancellative_, arity());
}

void ShiftSpec::set(const ShiftKey& key, MultilinearOp a) {
  check_key_component(*grid_, key, complexity_, cancellative_, arity());
  check_coefficient_shape(a, ins_, out_);
  coeffs_.insert_or_assign(key, std::move(a));
}

GridFunction apply_shift(const ShiftSpec& s, const std::vector<GridFunction>& fs) {
  check_arguments(fs, s.grid(), s.ins());
  const int n = s.arity();

  std::vector<const std::pair<const ShiftKey, MultilinearOp>*> entries;
  entries.reserve(s.coefficients().size());
  for (const auto& e : s.coefficients()) entries.push_back(&e);

  // Per-key emitted values are independent; compute them in parallel and
  // scatter serially in sorted key order so output bits never depend on the
  // thread count.
  std::vector<cxvec> values(entries.size());
  run_chunks(entries.size(), [&](std::size_t lo, std::size_t hi, std::size_t) {
    std::vector<cxvec> args(static_cast<std::size_t>(n));
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& [key, op] = *entries[i];
      for (int m = 0; m < n; ++m) {
        const HaarIndex& slot = key.slots[static_cast<std::size_t>(m)];
        args[static_cast<std::size_t>(m)] =
            haar_coefficient(fs[static_cast<std::size_t>(m)], slot.cube, slot.eta);
      }
      values[i] = op.apply(args);
    }
  });

  GridFunction out(s.grid(), s.out());
  const Grid& g = s.grid();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const HaarIndex& emit = entries[i]->first.slots[static_cast<std::size_t>(n)];
    const cxvec& v = values[i];
    g.for_each_cell(emit.cube, [&](i64 c) {
      const double w = haar_cell_value(g, emit.cube, emit.eta, c);
      auto cell = out.at(c);
      for (std::size_t j = 0; j < v.size(); ++j) cell[j] += v[j] * w;
    });
  }
  return out;
}

cx shift_form(const ShiftSpec& s, const std::vector<GridFunction>& fs,
              const GridFunction& g) {
  check_arguments(fs, s.grid(), s.ins());
  if (!same_grid(g.grid(), s.grid()))
    throw std::invalid_argument("shift_form: pairing grid mismatch");
  if (g.space().dim() != s.out().dim())
    throw std::invalid_argument("shift_form: pairing dimension mismatch");
  const int n = s.arity();

  std::vector<const std::pair<const ShiftKey, MultilinearOp>*> entries;
  entries.reserve(s.coefficients().size());
  for (const auto& e : s.coefficients()) entries.push_back(&e);

  return reduce_sum(entries.size(), [&](std::size_t i) {
    const auto& [key, op] = *entries[i];
    std::vector<cxvec> args(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
      const HaarIndex& slot = key.slots[static_cast<std::size_t>(m)];
      args[static_cast<std::size_t>(m)] =
          haar_coefficient(fs[static_cast<std::size_t>(m)], slot.cube, slot.eta);
    }
    const HaarIndex& emit = key.slots[static_cast<std::size_t>(n)];
    const cxvec w = haar_coefficient(g, emit.cube, emit.eta);
    const cxvec v = op.apply(args);
    cx acc = 0;
    for (std::size_t j = 0; j < v.size(); ++j) acc += v[j] * w[j];
    return acc;
  });
}

std::vector<std::pair<ShiftKey, MultilinearOp>> normalized_coeffs(
    const ShiftSpec& s) {
  const int d = s.grid().dim();
  const int n = s.arity();
  std::vector<std::pair<ShiftKey, MultilinearOp>> out;
  out.reserve(s.coefficients().size());
  for (const auto& [key, op] : s.coefficients()) {
    double e = static_cast<double>(n) * d * key.top.scale;
    for (int j = 0; j <= n; ++j)
      e -= 0.5 * d * key.slots[static_cast<std::size_t>(j)].cube.scale;
    out.emplace_back(key, op.scaled(std::exp2(e)));
  }
  return out;
}

ParaproductSpec::ParaproductSpec(const Grid& g, std::vector<Space> ins,
                                 Space out)
    : grid_(&g), ins_(std::move(ins)), out_(std::move(out)) {
  if (ins_.empty())
    throw std::invalid_argument("paraproduct: at least one argument");
}

void ParaproductSpec::set(const HaarIndex& key, MultilinearOp a) {
  grid_->require(key.cube);
  if (key.eta <= 0 || key.eta >= (1 << grid_->dim()))
    throw std::invalid_argument("paraproduct: atom must alternate in sign");
  if (key.cube.scale <= grid_->window().lmin)
    throw std::invalid_argument("paraproduct: no finer half at the finest scale");
  check_coefficient_shape(a, ins_, out_);
  coeffs_.insert_or_assign(key, std::move(a));
}

GridFunction apply_paraproduct(const ParaproductSpec& p,
                               const std::vector<GridFunction>& fs) {
  check_arguments(fs, p.grid(), p.ins());
  const int n = p.arity();

  std::vector<const std::pair<const HaarIndex, MultilinearOp>*> entries;
  entries.reserve(p.coefficients().size());
  for (const auto& e : p.coefficients()) entries.push_back(&e);

  std::vector<cxvec> values(entries.size());
  run_chunks(entries.size(), [&](std::size_t lo, std::size_t hi, std::size_t) {
    std::vector<cxvec> args(static_cast<std::size_t>(n));
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& [key, op] = *entries[i];
      for (int m = 0; m < n; ++m)
        args[static_cast<std::size_t>(m)] =
            average(fs[static_cast<std::size_t>(m)], key.cube);
      values[i] = op.apply(args);
    }
  });

  GridFunction out(p.grid(), p.out());
  const Grid& g = p.grid();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const HaarIndex& key = entries[i]->first;
    const cxvec& v = values[i];
    g.for_each_cell(key.cube, [&](i64 c) {
      const double w = haar_cell_value(g, key.cube, key.eta, c);
      auto cell = out.at(c);
      for (std::size_t j = 0; j < v.size(); ++j) cell[j] += v[j] * w;
    });
  }
  return out;
}

ProductGrid::ProductGrid(std::vector<const Grid*> factors)
    : factors_(std::move(factors)) {
  if (factors_.empty())
    throw std::invalid_argument("ProductGrid: at least one factor");
  for (const Grid* g : factors_)
    if (g == nullptr) throw std::invalid_argument("ProductGrid: null factor");
  strides_.resize(factors_.size());
  cell_count_ = 1;
  cell_measure_ = 1.0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    strides_[i] = cell_count_;
    cell_count_ *= factors_[i]->cell_count();
    cell_measure_ *= factors_[i]->cell_measure();
  }
}

i64 ProductGrid::index(const std::vector<i64>& cells) const {
  if (cells.size() != factors_.size())
    throw std::invalid_argument("ProductGrid::index: arity mismatch");
  i64 idx = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] < 0 || cells[i] >= factors_[i]->cell_count())
      throw std::invalid_argument("ProductGrid::index: cell out of range");
    idx += cells[i] * strides_[i];
  }
  return idx;
}

std::vector<i64> ProductGrid::coords(i64 index) const {
  std::vector<i64> out(factors_.size());
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    out[i] = index % factors_[i]->cell_count();
    index /= factors_[i]->cell_count();
  }
  return out;
}

ProductFunction::ProductFunction(ProductGrid grid, Space codomain)
    : grid_(std::move(grid)),
      space_(std::move(codomain)),
      data_(static_cast<std::size_t>(grid_.cell_count()) *
            static_cast<std::size_t>(space_.dim())) {}

ProductFunction ProductFunction::random(const ProductGrid& g, const Space& V,
                                        Rng& rng) {
  ProductFunction f(g, V);
  for (cx& z : f.data_) z = rng.cnormal();
  return f;
}

ProductFunction ProductFunction::tensor(const GridFunction& u,
                                        const GridFunction& v) {
  if (v.space().dim() != 1)
    throw std::invalid_argument("ProductFunction::tensor: second factor scalar");
  ProductGrid pg({&u.grid(), &v.grid()});
  ProductFunction f(pg, u.space());
  const int dim = u.space().dim();
  for (i64 c1 = 0; c1 < v.grid().cell_count(); ++c1) {
    const cx w = v.at(c1)[0];
    for (i64 c0 = 0; c0 < u.grid().cell_count(); ++c0) {
      auto cell = f.at(c0 + c1 * u.grid().cell_count());
      auto base = u.at(c0);
      for (int j = 0; j < dim; ++j) cell[j] = base[j] * w;
    }
  }
  return f;
}

std::span<cx> ProductFunction::at(i64 cell) {
  return {data_.data() + cell * space_.dim(),
          static_cast<std::size_t>(space_.dim())};
}

std::span<const cx> ProductFunction::at(i64 cell) const {
  return {data_.data() + cell * space_.dim(),
          static_cast<std::size_t>(space_.dim())};
}

double ProductFunction::sup_norm() const {
  double m = 0;
  for (i64 c = 0; c < grid_.cell_count(); ++c) m = std::max(m, space_.norm(at(c)));
  return m;
}

MultiParamShiftSpec::MultiParamShiftSpec(
    ProductGrid grid, std::vector<std::vector<int>> complexity,
    std::vector<std::pair<int, int>> cancellative, std::vector<Space> ins,
    Space out)
    : grid_(std::move(grid)),
      complexity_(std::move(complexity)),
      cancellative_(std::move(cancellative)),
      ins_(std::move(ins)),
      out_(std::move(out)) {
  if (ins_.empty())
    throw std::invalid_argument("multiparam shift: at least one argument");
  const int m = grid_.params();
  if (static_cast<int>(complexity_.size()) != m ||
      static_cast<int>(cancellative_.size()) != m)
    throw std::invalid_argument("multiparam shift: one pattern per parameter");
  for (int i = 0; i < m; ++i) {
    check_complexity(complexity_[static_cast<std::size_t>(i)], arity());
    check_slot_pair(cancellative_[static_cast<std::size_t>(i)], arity());
  }
}

void MultiParamShiftSpec::set(const MultiKey& key, MultilinearOp a) {
  if (static_cast<int>(key.size()) != grid_.params())
    throw std::invalid_argument("multiparam shift: one key part per parameter");
  for (int i = 0; i < grid_.params(); ++i)
    check_key_component(grid_.factor(i), key[static_cast<std::size_t>(i)],
                        complexity_[static_cast<std::size_t>(i)],
                        cancellative_[static_cast<std::size_t>(i)], arity());
  check_coefficient_shape(a, ins_, out_);
  coeffs_.insert_or_assign(key, std::move(a));
}

namespace {

using CellList = std::vector<std::pair<i64, double>>;

CellList slot_cells(const Grid& g, const HaarIndex& slot) {
  CellList out;
  g.for_each_cell(slot.cube, [&](i64 c) {
    out.emplace_back(c, haar_cell_value(g, slot.cube, slot.eta, c));
  });
  return out;
}

// Invokes fn(linear index, product of slot values) for every product cell of
// a rectangle given by one cell list per parameter.
void for_each_rect_cell(const ProductGrid& g,
                        const std::vector<CellList>& lists,
                        const std::function<void(i64, double)>& fn) {
  const int m = g.params();
  std::vector<std::size_t> pick(static_cast<std::size_t>(m), 0);
  std::vector<i64> cells(static_cast<std::size_t>(m));
  for (;;) {
    double w = 1.0;
    for (int i = 0; i < m; ++i) {
      const auto& [cell, val] = lists[static_cast<std::size_t>(i)]
                                     [pick[static_cast<std::size_t>(i)]];
      cells[static_cast<std::size_t>(i)] = cell;
      w *= val;
    }
    fn(g.index(cells), w);
    int i = 0;
    while (i < m) {
      auto& p = pick[static_cast<std::size_t>(i)];
      if (++p < lists[static_cast<std::size_t>(i)].size()) break;
      p = 0;
      ++i;
    }
    if (i == m) return;
  }
}

void check_product_arguments(const std::vector<ProductFunction>& fs,
                             const ProductGrid& g,
                             const std::vector<Space>& ins) {
  if (fs.size() != ins.size())
    throw std::invalid_argument("multiparam shift: wrong number of arguments");
  for (std::size_t m = 0; m < fs.size(); ++m) {
    if (!same_product_grid(fs[m].grid(), g))
      throw std::invalid_argument("multiparam shift: argument grid mismatch");
    if (!(fs[m].space() == ins[m]))
      throw std::invalid_argument("multiparam shift: argument space mismatch");
  }
}

}  // namespace

ProductFunction apply_multiparam_shift(const MultiParamShiftSpec& s,
                                       const std::vector<ProductFunction>& fs) {
  check_product_arguments(fs, s.grid(), s.ins());
  const ProductGrid& g = s.grid();
  const int n = s.arity();
  const int m = g.params();

  ProductFunction out(g, s.out());
  std::vector<cxvec> args(static_cast<std::size_t>(n));
  for (const auto& [key, op] : s.coefficients()) {
    for (int j = 0; j < n; ++j) {
      std::vector<CellList> lists(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i)
        lists[static_cast<std::size_t>(i)] = slot_cells(
            g.factor(i),
            key[static_cast<std::size_t>(i)].slots[static_cast<std::size_t>(j)]);
      cxvec acc(static_cast<std::size_t>(
          s.ins()[static_cast<std::size_t>(j)].dim()));
      const ProductFunction& f = fs[static_cast<std::size_t>(j)];
      for_each_rect_cell(g, lists, [&](i64 idx, double w) {
        auto cell = f.at(idx);
        for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += cell[t] * w;
      });
      for (cx& z : acc) z *= g.cell_measure();
      args[static_cast<std::size_t>(j)] = std::move(acc);
    }
    const cxvec v = op.apply(args);

    std::vector<CellList> lists(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
      lists[static_cast<std::size_t>(i)] = slot_cells(
          g.factor(i),
          key[static_cast<std::size_t>(i)].slots[static_cast<std::size_t>(n)]);
    for_each_rect_cell(g, lists, [&](i64 idx, double w) {
      auto cell = out.at(idx);
      for (std::size_t t = 0; t < v.size(); ++t) cell[t] += v[t] * w;
    });
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> erase_at(std::vector<T> v, int pos) {
  v.erase(v.begin() + pos);
  return v;
}

}  // namespace

ProductFunction nested_apply(const MultiParamShiftSpec& s, int param,
                             const std::vector<ProductFunction>& fs) {
  check_product_arguments(fs, s.grid(), s.ins());
  const ProductGrid& g = s.grid();
  const int m = g.params();
  if (param < 0 || param >= m)
    throw std::invalid_argument("nested_apply: parameter out of range");
  if (m == 1) return apply_multiparam_shift(s, fs);
  const int n = s.arity();
  const Grid& fg = g.factor(param);

  std::vector<const Grid*> rest_factors;
  for (int i = 0; i < m; ++i)
    if (i != param) rest_factors.push_back(&g.factor(i));
  ProductGrid rest(rest_factors);

  // Group keys by their component at `param`.
  std::map<ShiftKey, std::vector<std::pair<MultiKey, const MultilinearOp*>>>
      groups;
  for (const auto& [key, op] : s.coefficients()) {
    MultiKey restkey = key;
    restkey.erase(restkey.begin() + param);
    groups[key[static_cast<std::size_t>(param)]].emplace_back(
        std::move(restkey), &op);
  }

  ProductFunction out(g, s.out());
  for (const auto& [comp, members] : groups) {
    MultiParamShiftSpec inner(
        rest, erase_at(s.complexity(), param), erase_at(s.cancellative(), param),
        s.ins(), s.out());
    for (const auto& [restkey, op] : members) inner.set(restkey, *op);

    // Integrate out `param` against each input slot's Haar factor.
    std::vector<ProductFunction> partial;
    partial.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const HaarIndex& slot = comp.slots[static_cast<std::size_t>(j)];
      ProductFunction pj(rest, s.ins()[static_cast<std::size_t>(j)]);
      const ProductFunction& f = fs[static_cast<std::size_t>(j)];
      for (i64 idx = 0; idx < g.cell_count(); ++idx) {
        std::vector<i64> coords = g.coords(idx);
        const double w =
            haar_cell_value(fg, slot.cube, slot.eta,
                            coords[static_cast<std::size_t>(param)]);
        if (w == 0.0) continue;
        coords.erase(coords.begin() + param);
        auto dst = pj.at(rest.index(coords));
        auto src = f.at(idx);
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += src[t] * w;
      }
      const double cm = fg.cell_measure();
      for (i64 c = 0; c < rest.cell_count(); ++c) {
        auto dst = pj.at(c);
        for (cx& z : dst) z *= cm;
      }
      partial.push_back(std::move(pj));
    }

    ProductFunction r = apply_multiparam_shift(inner, partial);

    // Tensor the group's output atom back onto the result.
    const HaarIndex& emit = comp.slots[static_cast<std::size_t>(n)];
    for (i64 c = 0; c < rest.cell_count(); ++c) {
      auto src = r.at(c);
      bool nonzero = false;
      for (const cx& z : src)
        if (z != cx{0.0, 0.0}) {
          nonzero = true;
          break;
        }
      if (!nonzero) continue;
      std::vector<i64> coords = rest.coords(c);
      coords.insert(coords.begin() + param, 0);
      fg.for_each_cell(emit.cube, [&](i64 ci) {
        const double w = haar_cell_value(fg, emit.cube, emit.eta, ci);
        coords[static_cast<std::size_t>(param)] = ci;
        auto dst = out.at(g.index(coords));
        for (std::size_t t = 0; t < src.size(); ++t) dst[t] += src[t] * w;
      });
    }
  }
  return out;
}

GridFunction stack_components(const std::vector<GridFunction>& comps) {
  if (comps.empty())
    throw std::invalid_argument("stack_components: empty family");
  const Grid& g = comps[0].grid();
  const Space& V = comps[0].space();
  for (const GridFunction& f : comps)
    if (!f.compatible(comps[0]))
      throw std::invalid_argument("stack_components: mixed grids or codomains");
  const int d = V.dim();
  const int count = static_cast<int>(comps.size());
  GridFunction out(g, Space::seq_lp(2.0, count * d));
  for (i64 c = 0; c < g.cell_count(); ++c) {
    auto dst = out.at(c);
    for (int i = 0; i < count; ++i) {
      auto src = comps[static_cast<std::size_t>(i)].at(c);
      for (int j = 0; j < d; ++j) dst[static_cast<std::size_t>(i * d + j)] = src[j];
    }
  }
  return out;
}

ShiftSpec lift_shift_family(const std::vector<ShiftSpec>& family,
                            const cxvec& eps, int N) {
  if (N < 1) throw std::invalid_argument("lift_shift_family: N < 1");
  const std::size_t total = static_cast<std::size_t>(N) * N * N;
  if (family.size() != total || eps.size() != total)
    throw std::invalid_argument("lift_shift_family: need N^3 members/weights");
  for (const cx& e : eps)
    if (std::abs(std::abs(e) - 1.0) > 1e-12)
      throw std::invalid_argument("lift_shift_family: weights must be unimodular");

  const ShiftSpec& first = family[0];
  if (first.arity() != 2)
    throw std::invalid_argument("lift_shift_family: bilinear members required");
  for (const ShiftSpec& s : family) {
    if (!same_grid(s.grid(), first.grid()) ||
        s.complexity() != first.complexity() ||
        s.cancellative() != first.cancellative() || s.arity() != 2 ||
        !(s.out() == first.out()) || !(s.ins()[0] == first.ins()[0]) ||
        !(s.ins()[1] == first.ins()[1]))
      throw std::invalid_argument("lift_shift_family: heterogeneous family");
  }

  const int d1 = first.ins()[0].dim();
  const int d2 = first.ins()[1].dim();
  const int d3 = first.out().dim();
  const Space L1 = Space::seq_lp(2.0, N * N * d1);
  const Space L2 = Space::seq_lp(2.0, N * N * d2);
  const Space L3 = Space::seq_lp(2.0, N * N * d3);

  std::set<ShiftKey> keys;
  for (const ShiftSpec& s : family)
    for (const auto& [key, op] : s.coefficients()) keys.insert(key);

  ShiftSpec lifted(first.grid(), first.complexity(), first.cancellative(),
                   {L1, L2}, L3);
  for (const ShiftKey& key : keys) {
    std::vector<std::optional<MultilinearOp>> comps(total);
    for (std::size_t i = 0; i < total; ++i) {
      auto it = family[i].coefficients().find(key);
      if (it != family[i].coefficients().end()) comps[i] = it->second;
    }
    auto fn = [comps = std::move(comps), eps, N, d1, d2,
               d3](std::span<const cxvec> args) {
      cxvec out(static_cast<std::size_t>(N) * N * d3);
      std::vector<cxvec> sub(2);
      for (int t = 0; t < N; ++t)
        for (int u = 0; u < N; ++u)
          for (int v = 0; v < N; ++v) {
            const std::size_t i =
                static_cast<std::size_t>((t * N + u) * N + v);
            if (!comps[i]) continue;
            const auto* a1 = args[0].data() + (t * N + u) * d1;
            const auto* a2 = args[1].data() + (u * N + v) * d2;
            sub[0].assign(a1, a1 + d1);
            sub[1].assign(a2, a2 + d2);
            const cxvec w = comps[i]->apply(sub);
            const std::size_t base = static_cast<std::size_t>((t * N + v) * d3);
            for (int j = 0; j < d3; ++j)
              out[base + static_cast<std::size_t>(j)] +=
                  eps[i] * w[static_cast<std::size_t>(j)];
          }
      return out;
    };
    lifted.set(key, MultilinearOp::handle({L1, L2}, L3, fn));
  }
  return lifted;
}

double op_norm_estimate(const ShiftSpec& s, const std::vector<double>& exponents,
                        int trials, std::uint64_t seed) {
  const int n = s.arity();
  if (static_cast<int>(exponents.size()) != n + 1)
    throw std::invalid_argument("op_norm_estimate: one exponent per slot");
  double inv = 0;
  for (int m = 0; m < n; ++m) {
    const double p = exponents[static_cast<std::size_t>(m)];
    if (!(p >= 1.0)) throw std::invalid_argument("op_norm_estimate: p < 1");
    if (!std::isinf(p)) inv += 1.0 / p;
  }
  const double q = exponents[static_cast<std::size_t>(n)];
  if (!(q >= 1.0)) throw std::invalid_argument("op_norm_estimate: q < 1");
  const double qinv = std::isinf(q) ? 0.0 : 1.0 / q;
  if (std::abs(inv - qinv) > 1e-9)
    throw std::invalid_argument("op_norm_estimate: exponents do not align");

  std::vector<const ShiftKey*> keys;
  for (const auto& [key, op] : s.coefficients()) keys.push_back(&key);

  Rng base(seed);
  double best = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = base.fork(static_cast<std::uint64_t>(trial));
    const bool atoms = trial % 2 == 0 && !keys.empty();
    std::vector<GridFunction> fs;
    fs.reserve(static_cast<std::size_t>(n));
    if (atoms) {
      const ShiftKey& key = *keys[static_cast<std::size_t>(rng.index(keys.size()))];
      for (int m = 0; m < n; ++m) {
        const Space& X = s.ins()[static_cast<std::size_t>(m)];
        const HaarIndex& slot = key.slots[static_cast<std::size_t>(m)];
        fs.push_back(
            haar_atom(s.grid(), X, random_unit(X, rng), slot.cube, slot.eta));
      }
    } else {
      for (int m = 0; m < n; ++m)
        fs.push_back(GridFunction::random(
            s.grid(), s.ins()[static_cast<std::size_t>(m)], rng));
    }
    double den = 1.0;
    for (int m = 0; m < n; ++m)
      den *= fs[static_cast<std::size_t>(m)].lp_norm(
          exponents[static_cast<std::size_t>(m)]);
    if (!(den > 1e-300)) continue;
    const double num = apply_shift(s, fs).lp_norm(q);
    best = std::max(best, num / den);
  }
  return best;
}

}  // namespace dycalc
