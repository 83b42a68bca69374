// Quadrature evaluation of multilinear singular forms and their dyadic
// expansion: cell tables of kernel blocks, adjoint reindexing, geometric
// classification of cube/rectangle pairs, Haar-profile pairings, the shift
// plus paraproduct expansion with reconstruction checks, translation
// averaging with goodness reweighting, oscillation norms of coefficient
// sequences, and randomized kernel-constant estimates.

#include "dycalc/represent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

namespace dycalc {
namespace {

bool grids_match(const Grid& a, const Grid& b) {
  return &a == &b ||
         (a.dim() == b.dim() && a.window() == b.window() &&
          a.shift() == b.shift() && a.roots() == b.roots());
}

std::vector<i64> every_cell(const Grid& g) {
  std::vector<i64> cells(static_cast<std::size_t>(g.cell_count()));
  std::iota(cells.begin(), cells.end(), i64{0});
  return cells;
}

// Physical center of every finest cell.
std::vector<std::vector<double>> cell_centers(const Grid& g) {
  std::vector<std::vector<double>> cs(static_cast<std::size_t>(g.cell_count()));
  for (i64 c = 0; c < g.cell_count(); ++c)
    cs[static_cast<std::size_t>(c)] = g.center(g.cell_cube(c));
  return cs;
}

std::vector<i64> support_cells(const GridFunction& f) {
  std::vector<i64> cells;
  for (i64 c = 0; c < f.grid().cell_count(); ++c) {
    bool nz = false;
    for (const cx& v : f.at(c)) nz = nz || v != cx{0.0, 0.0};
    if (nz) cells.push_back(c);
  }
  return cells;
}

void check_arguments(const KernelSpec& k, const std::vector<GridFunction>& fs,
                     const char* who) {
  const int n = k.arity();
  if (static_cast<int>(fs.size()) != n + 1)
    throw std::invalid_argument(std::string(who) +
                                ": needs one function per kernel input plus "
                                "the output pairing function");
  const Grid& g = fs.front().grid();
  for (const auto& f : fs)
    if (!grids_match(f.grid(), g))
      throw std::invalid_argument(std::string(who) +
                                  ": arguments live on different grids");
  for (int m = 0; m < n; ++m)
    if (!(fs[static_cast<std::size_t>(m)].space() ==
          k.ins[static_cast<std::size_t>(m)]))
      throw std::invalid_argument(std::string(who) +
                                  ": argument space mismatch");
  if (!(fs[static_cast<std::size_t>(n)].space() == k.out))
    throw std::invalid_argument(std::string(who) +
                                ": output pairing space mismatch");
}

// ---------------------------------------------------------------------------
// Cell tables: quadrature-averaged kernel blocks over one cell list per
// variable (output variable first), one flat operator block per tuple in the
// dense layout (output coordinate slowest, last input fastest).  Tuples whose
// cells all coincide stay zero, the same convention the direct form uses.

struct CellTable {
  const Grid* grid = nullptr;
  const KernelSpec* kernel = nullptr;
  int rho = 1;
  std::vector<i64> xs;                                  // output-variable cells
  std::vector<std::vector<i64>> ys;                     // input cells per slot
  const std::vector<std::vector<double>>* centers = nullptr;
  i64 block = 0;
  cxvec vals;

  i64 tuples() const {
    i64 t = static_cast<i64>(xs.size());
    for (const auto& l : ys) t *= static_cast<i64>(l.size());
    return t;
  }
};

void build_table(CellTable& t) {
  const KernelSpec& k = *t.kernel;
  const Grid& g = *t.grid;
  const int n = k.arity();
  const int d = g.dim();
  i64 block = k.out.dim();
  for (const auto& s : k.ins) block *= s.dim();
  t.block = block;
  const i64 total = t.tuples();
  t.vals.assign(static_cast<std::size_t>(total * block), cx{0.0, 0.0});
  if (total == 0) return;

  const double h = g.length(g.window().lmin);
  const int rho = t.rho;
  i64 combos = 1;
  for (int c = 0; c < (n + 1) * d; ++c) combos *= rho;
  const double inv = 1.0 / static_cast<double>(combos);

  run_chunks(static_cast<std::size_t>(total), [&](std::size_t begin,
                                                  std::size_t end,
                                                  std::size_t) {
    std::vector<std::size_t> pos(static_cast<std::size_t>(n) + 1);
    std::vector<double> x(static_cast<std::size_t>(d));
    std::vector<std::vector<double>> y(
        static_cast<std::size_t>(n),
        std::vector<double>(static_cast<std::size_t>(d)));
    for (std::size_t tu = begin; tu < end; ++tu) {
      std::size_t rem = tu;
      for (int m = n - 1; m >= 0; --m) {
        const std::size_t sz = t.ys[static_cast<std::size_t>(m)].size();
        pos[static_cast<std::size_t>(m) + 1] = rem % sz;
        rem /= sz;
      }
      pos[0] = rem;
      const i64 xcell = t.xs[pos[0]];
      bool all_equal = true;
      for (int m = 0; m < n && all_equal; ++m)
        all_equal =
            t.ys[static_cast<std::size_t>(m)][pos[static_cast<std::size_t>(m) + 1]] ==
            xcell;
      if (all_equal) continue;
      cx* out = &t.vals[tu * static_cast<std::size_t>(block)];
      for (i64 cb = 0; cb < combos; ++cb) {
        i64 crem = cb;
        for (int s = n; s >= 0; --s) {
          const i64 cell =
              s == 0 ? xcell
                     : t.ys[static_cast<std::size_t>(s - 1)]
                           [pos[static_cast<std::size_t>(s)]];
          const auto& base = (*t.centers)[static_cast<std::size_t>(cell)];
          for (int a = d - 1; a >= 0; --a) {
            const int o = static_cast<int>(crem % rho);
            crem /= rho;
            const double coord =
                base[static_cast<std::size_t>(a)] + ((o + 0.5) / rho - 0.5) * h;
            if (s == 0)
              x[static_cast<std::size_t>(a)] = coord;
            else
              y[static_cast<std::size_t>(s - 1)][static_cast<std::size_t>(a)] =
                  coord;
          }
        }
        const MultilinearOp v = k.eval(x, y);
        if (!v.is_dense() || static_cast<i64>(v.tensor().size()) != block)
          throw std::invalid_argument(
              "kernel evaluator returned a value of the wrong shape");
        const cxvec& tv = v.tensor();
        for (i64 e = 0; e < block; ++e)
          out[e] += tv[static_cast<std::size_t>(e)];
      }
      for (i64 e = 0; e < block; ++e) out[e] *= inv;
    }
  });
}

std::vector<int> block_dims(const KernelSpec& k) {
  std::vector<int> dims{k.out.dim()};
  for (const auto& s : k.ins) dims.push_back(s.dim());
  return dims;
}

// Flat-entry permutation from the slot-m transposed block layout back into
// the base layout (identity when m == 0).
std::vector<i64> entry_map(const std::vector<int>& dims, int m) {
  const int n = static_cast<int>(dims.size()) - 1;
  i64 total = 1;
  for (int v : dims) total *= v;
  std::vector<i64> map(static_cast<std::size_t>(total));
  if (m == 0) {
    std::iota(map.begin(), map.end(), i64{0});
    return map;
  }
  std::vector<int> ndim(dims);
  std::swap(ndim[0], ndim[static_cast<std::size_t>(m)]);
  std::vector<int> idx(static_cast<std::size_t>(n) + 1);
  for (i64 c = 0; c < total; ++c) {
    i64 rem = c;
    for (int s = n; s >= 0; --s) {
      idx[static_cast<std::size_t>(s)] =
          static_cast<int>(rem % dims[static_cast<std::size_t>(s)]);
      rem /= dims[static_cast<std::size_t>(s)];
    }
    i64 nc = 0;
    for (int s = 0; s <= n; ++s) {
      const int v = s == 0 ? idx[static_cast<std::size_t>(m)]
                           : (s == m ? idx[0] : idx[static_cast<std::size_t>(s)]);
      nc = nc * ndim[static_cast<std::size_t>(s)] + v;
    }
    map[static_cast<std::size_t>(nc)] = c;
  }
  return map;
}

// Argument spaces seen by the slot-m transposed form (originals, permuted).
std::vector<Space> view_ins(const KernelSpec& k, int m) {
  std::vector<Space> ins = k.ins;
  if (m >= 1) ins[static_cast<std::size_t>(m - 1)] = k.out;
  return ins;
}

Space view_out(const KernelSpec& k, int m) {
  return m == 0 ? k.out : k.ins[static_cast<std::size_t>(m - 1)];
}

// Weighted cell list: (position into the table's list for that variable,
// real weight).
using WList = std::vector<std::pair<i64, double>>;

WList unit_list(std::size_t count) {
  WList w;
  w.reserve(count);
  for (std::size_t p = 0; p < count; ++p)
    w.push_back({static_cast<i64>(p), 1.0});
  return w;
}

// Contract table blocks against one weight list per variable of the slot-m
// transposed arrangement.  The view output draws on the base slot-m list and
// the view slot m on the base output list; with m == 0 everything is direct.
// Weights index positions in the corresponding base lists, so for m >= 1 all
// lists of the table must be identical.  The result is the view-layout block
// scaled by the quadrature measure of one cell tuple.
cxvec pair_weighted(const CellTable& t, int m, const std::vector<i64>& emap,
                    const std::vector<const WList*>& yw, const WList& xw) {
  const int n = t.kernel->arity();
  const i64 block = t.block;
  cxvec acc(static_cast<std::size_t>(block), cx{0.0, 0.0});
  bool empty = xw.empty();
  for (const WList* w : yw) empty = empty || w->empty();
  double meas = 1.0;
  for (int s = 0; s <= n; ++s) meas *= t.grid->cell_measure();
  if (empty) return acc;

  // strides of the base tuple index (x slowest, last input fastest)
  std::vector<i64> istr(static_cast<std::size_t>(n));
  i64 run = 1;
  for (int l = n - 1; l >= 0; --l) {
    istr[static_cast<std::size_t>(l)] = run;
    run *= static_cast<i64>(t.ys[static_cast<std::size_t>(l)].size());
  }
  const i64 xstr = run;
  // view variable -> base stride
  const i64 vx = m == 0 ? xstr : istr[static_cast<std::size_t>(m - 1)];
  std::vector<i64> vstr(static_cast<std::size_t>(n));
  for (int l = 1; l <= n; ++l)
    vstr[static_cast<std::size_t>(l - 1)] =
        l == m ? xstr : istr[static_cast<std::size_t>(l - 1)];

  std::vector<std::size_t> it(static_cast<std::size_t>(n));
  for (const auto& [px, wx] : xw) {
    if (wx == 0.0) continue;
    const i64 bx = px * vx;
    std::fill(it.begin(), it.end(), std::size_t{0});
    for (;;) {
      double w = wx;
      i64 bi = bx;
      for (int l = 0; l < n; ++l) {
        const auto& e = (*yw[static_cast<std::size_t>(l)])[it[static_cast<std::size_t>(l)]];
        w *= e.second;
        bi += e.first * vstr[static_cast<std::size_t>(l)];
      }
      if (w != 0.0) {
        const cx* blk = &t.vals[static_cast<std::size_t>(bi * block)];
        for (i64 e2 = 0; e2 < block; ++e2)
          acc[static_cast<std::size_t>(e2)] +=
              w * blk[emap[static_cast<std::size_t>(e2)]];
      }
      int l = n - 1;
      while (l >= 0 &&
             ++it[static_cast<std::size_t>(l)] ==
                 yw[static_cast<std::size_t>(l)]->size()) {
        it[static_cast<std::size_t>(l)] = 0;
        --l;
      }
      if (l < 0) break;
    }
  }
  for (cx& v : acc) v *= meas;
  return acc;
}

// Haar profile of a cube over its own cells, indexed by cell id (valid as a
// position list whenever the table list is the identity over all cells).
WList haar_cells(const Grid& g, const Cube& q, int eta) {
  WList w;
  for (i64 c : g.cells_of(q)) w.push_back({c, haar_cell_value(g, q, eta, c)});
  return w;
}

// Shape validation shared by the rectangle consumers; returns the top scale.
int checked_rect_scale(const Grid& g, const ScaleRect& rect) {
  const int n = static_cast<int>(rect.factors.size());
  if (n < 1)
    throw std::invalid_argument("rectangle needs at least one factor");
  if (rect.split < 1 || rect.split > n)
    throw std::invalid_argument("rectangle split slot out of range");
  for (const Cube& f : rect.factors) g.require(f);
  const int t = rect.factors.front().scale;
  for (int j = 0; j < n; ++j)
    if (rect.factors[static_cast<std::size_t>(j)].scale !=
        (j < rect.split ? t : t - 1))
      throw std::invalid_argument(
          "rectangle scales must drop right after the split slot");
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernels and the quadrature form

KernelSpec::KernelSpec(std::vector<Space> ins_, Space out_, double alpha_,
                       Evaluator eval_)
    : ins(std::move(ins_)),
      out(std::move(out_)),
      alpha(alpha_),
      eval(std::move(eval_)) {
  if (ins.empty())
    throw std::invalid_argument("kernel needs at least one input variable");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument(
        "kernel smoothness exponent must lie in (0, 1]");
  for (const auto& s : ins)
    if (s.kind() == SpaceKind::Bochner)
      throw std::invalid_argument(
          "kernel values pair flatly; Bochner slots are not supported");
  if (out.kind() == SpaceKind::Bochner)
    throw std::invalid_argument(
        "kernel values pair flatly; Bochner slots are not supported");
  if (!eval)
    throw std::invalid_argument("kernel evaluator must be callable");
}

KernelSpec scalar_kernel(
    int n, double alpha,
    std::function<cx(const std::vector<double>&,
                     const std::vector<std::vector<double>>&)> k) {
  if (!k) throw std::invalid_argument("scalar kernel must be callable");
  std::vector<Space> ins;
  for (int m = 0; m < n; ++m) ins.push_back(Space::scalar());
  auto wrap = [ins, k = std::move(k)](const std::vector<double>& x,
                                      const std::vector<std::vector<double>>& y) {
    return MultilinearOp::dense(ins, Space::scalar(), {k(x, y)});
  };
  return KernelSpec(std::move(ins), Space::scalar(), alpha, std::move(wrap));
}

SIOForm::SIOForm(KernelSpec kernel_, int rho_)
    : kernel(std::move(kernel_)), rho(rho_) {
  if (rho < 1)
    throw std::invalid_argument("quadrature refinement must be at least 1");
}

cx direct_form(const SIOForm& T, const std::vector<GridFunction>& fs) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  check_arguments(k, fs, "direct_form");
  const Grid& g = fs.front().grid();

  CellTable tab;
  tab.grid = &g;
  tab.kernel = &k;
  tab.rho = T.rho;
  tab.xs = support_cells(fs[static_cast<std::size_t>(n)]);
  for (int m = 0; m < n; ++m)
    tab.ys.push_back(support_cells(fs[static_cast<std::size_t>(m)]));
  const auto centers = cell_centers(g);
  tab.centers = &centers;
  build_table(tab);

  const std::vector<int> dims = block_dims(k);
  double meas = 1.0;
  for (int s = 0; s <= n; ++s) meas *= g.cell_measure();

  const cx total = reduce_sum(
      static_cast<std::size_t>(tab.tuples()), [&](std::size_t tu) {
        std::size_t rem = tu;
        std::vector<i64> cells(static_cast<std::size_t>(n) + 1);
        for (int m = n - 1; m >= 0; --m) {
          const std::size_t sz = tab.ys[static_cast<std::size_t>(m)].size();
          cells[static_cast<std::size_t>(m) + 1] =
              tab.ys[static_cast<std::size_t>(m)][rem % sz];
          rem /= sz;
        }
        cells[0] = tab.xs[rem];
        const cx* blk =
            &tab.vals[tu * static_cast<std::size_t>(tab.block)];
        cx s{0.0, 0.0};
        for (i64 e = 0; e < tab.block; ++e) {
          i64 erem = e;
          cx prod = blk[e];
          for (int v = n; v >= 0; --v) {
            const int c =
                static_cast<int>(erem % dims[static_cast<std::size_t>(v)]);
            erem /= dims[static_cast<std::size_t>(v)];
            const int arg = v == 0 ? n : v - 1;
            prod *= fs[static_cast<std::size_t>(arg)].at(
                cells[static_cast<std::size_t>(v)])[static_cast<std::size_t>(c)];
          }
          s += prod;
        }
        return s;
      });
  return total * meas;
}

// ---------------------------------------------------------------------------
// Transposed forms

SIOForm adjoint(const SIOForm& T, int m) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  if (m < 1 || m > n)
    throw std::invalid_argument("adjoint slot out of range");
  std::vector<Space> ins = view_ins(k, m);
  Space out = view_out(k, m);
  auto base = k.eval;
  auto eval = [base, m, ins, out](const std::vector<double>& x,
                                  const std::vector<std::vector<double>>& y) {
    std::vector<std::vector<double>> yb = y;
    const std::vector<double> xb = y[static_cast<std::size_t>(m - 1)];
    yb[static_cast<std::size_t>(m - 1)] = x;
    return MultilinearOp::dense(ins, out, base(xb, yb).transposed(m).tensor());
  };
  return SIOForm(KernelSpec(std::move(ins), std::move(out), k.alpha,
                            std::move(eval)),
                 T.rho);
}

std::vector<GridFunction> adjoint_arguments(const std::vector<GridFunction>& fs,
                                            int m) {
  if (fs.empty())
    throw std::invalid_argument("adjoint_arguments: empty argument tuple");
  const int n = static_cast<int>(fs.size()) - 1;
  if (m < 0 || m > n)
    throw std::invalid_argument("adjoint_arguments: slot out of range");
  std::vector<GridFunction> out = fs;
  if (m >= 1)
    std::swap(out[static_cast<std::size_t>(m - 1)],
              out[static_cast<std::size_t>(n)]);
  return out;
}

// ---------------------------------------------------------------------------
// Cube/rectangle classification

PairClass classify_pair(const Grid& g, const Cube& q, const ScaleRect& rect,
                        double gamma, int r) {
  g.require(q);
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("classify_pair: gamma must lie in (0, 1)");
  if (r < 1)
    throw std::invalid_argument("classify_pair: r must be at least 1");
  const int t = checked_rect_scale(g, rect);
  if (t < q.scale)
    throw std::invalid_argument("classify_pair: rectangle finer than the cube");

  const int d = g.dim();
  const auto qlo = g.corner(q);
  const double qlen = g.length(q.scale);
  double dist = 0.0;
  bool disjoint = false;
  for (const Cube& f : rect.factors) {
    const auto flo = g.corner(f);
    const double flen = g.length(f.scale);
    double sum = 0.0, gap1 = 0.0;
    bool dj = false;
    for (int a = 0; a < d; ++a) {
      const double lo_gap =
          flo[static_cast<std::size_t>(a)] - (qlo[static_cast<std::size_t>(a)] + qlen);
      const double hi_gap =
          qlo[static_cast<std::size_t>(a)] - (flo[static_cast<std::size_t>(a)] + flen);
      const double gap = std::max({lo_gap, hi_gap, 0.0});
      dj = dj || flo[static_cast<std::size_t>(a)] + flen <= qlo[static_cast<std::size_t>(a)] ||
           qlo[static_cast<std::size_t>(a)] + qlen <= flo[static_cast<std::size_t>(a)];
      sum += gap * gap;
      gap1 = gap;
    }
    dist = std::max(dist, d == 1 ? gap1 : std::sqrt(sum));
    disjoint = disjoint || dj;
  }
  const double thr = std::pow(g.length(q.scale), gamma) *
                     std::pow(g.length(t) / 2.0, 1.0 - gamma);
  if (dist > thr) return PairClass::Separated;
  if (disjoint) return PairClass::Nearby;
  if (t > q.scale) return PairClass::Inside;
  return PairClass::Diagonal;
}

// ---------------------------------------------------------------------------
// Haar-profile pairings

MultilinearOp haar_pairing(const SIOForm& T, const Grid& g,
                           const ScaleRect& rect, int eta,
                           const HaarIndex& out) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  const int sigs = 1 << g.dim();
  if (static_cast<int>(rect.factors.size()) != n)
    throw std::invalid_argument(
        "haar_pairing: one rectangle factor per kernel input required");
  const int t = checked_rect_scale(g, rect);
  if (eta < 1 || eta >= sigs)
    throw std::invalid_argument(
        "haar_pairing: signature must be nonzero and in range");
  if (out.eta < 1 || out.eta >= sigs)
    throw std::invalid_argument(
        "haar_pairing: output signature must be nonzero and in range");
  g.require(out.cube);

  CellTable tab;
  tab.grid = &g;
  tab.kernel = &k;
  tab.rho = T.rho;
  tab.xs = g.cells_of(out.cube);
  for (int j = 0; j < n; ++j)
    tab.ys.push_back(g.cells_of(rect.factors[static_cast<std::size_t>(j)]));
  const auto centers = cell_centers(g);
  tab.centers = &centers;
  build_table(tab);

  WList xw;
  for (std::size_t p = 0; p < tab.xs.size(); ++p)
    xw.push_back({static_cast<i64>(p),
                  haar_cell_value(g, out.cube, out.eta, tab.xs[p])});
  std::vector<WList> yw(static_cast<std::size_t>(n));
  std::vector<const WList*> ywp;
  for (int j = 0; j < n; ++j) {
    const Cube& f = rect.factors[static_cast<std::size_t>(j)];
    const int e = j == rect.split - 1 ? eta : 0;
    for (std::size_t p = 0; p < tab.ys[static_cast<std::size_t>(j)].size(); ++p)
      yw[static_cast<std::size_t>(j)].push_back(
          {static_cast<i64>(p),
           haar_cell_value(g, f, e, tab.ys[static_cast<std::size_t>(j)][p])});
    ywp.push_back(&yw[static_cast<std::size_t>(j)]);
  }
  const std::vector<i64> emap = entry_map(block_dims(k), 0);
  cxvec v = pair_weighted(tab, 0, emap, ywp, xw);
  return MultilinearOp::dense(k.ins, k.out, std::move(v));
}

MultilinearOp t1_pairing(const SIOForm& T, const std::vector<GridFunction>& phis,
                         const GridFunction& phi_q, const Cube& q, double C) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  if (static_cast<int>(phis.size()) != n)
    throw std::invalid_argument(
        "t1_pairing: one localized function per kernel input required");
  const Grid& g = phi_q.grid();
  for (const auto& f : phis)
    if (!grids_match(f.grid(), g))
      throw std::invalid_argument("t1_pairing: arguments live on different grids");
  for (int m = 0; m < n; ++m)
    if (!(phis[static_cast<std::size_t>(m)].space() ==
          k.ins[static_cast<std::size_t>(m)]))
      throw std::invalid_argument("t1_pairing: argument space mismatch");
  if (!(phi_q.space() == k.out))
    throw std::invalid_argument("t1_pairing: output pairing space mismatch");
  g.require(q);
  const int d = g.dim();
  if (!(C >= 2.0 * std::sqrt(static_cast<double>(d))))
    throw std::invalid_argument(
        "t1_pairing: cutoff must cover the cube diameter");
  const cxvec mass = phi_q.integral();
  double massnorm = 0.0;
  for (const cx& v : mass) massnorm += std::norm(v);
  if (std::sqrt(massnorm) > 1e-12)
    throw std::invalid_argument(
        "t1_pairing: the localized pairing function must have mean zero");
  const std::vector<i64> qcells = g.cells_of(q);
  std::vector<char> inq(static_cast<std::size_t>(g.cell_count()), 0);
  for (i64 c : qcells) inq[static_cast<std::size_t>(c)] = 1;
  for (i64 c = 0; c < g.cell_count(); ++c) {
    if (inq[static_cast<std::size_t>(c)]) continue;
    for (const cx& v : phi_q.at(c))
      if (v != cx{0.0, 0.0})
        throw std::invalid_argument(
            "t1_pairing: the pairing function must be supported on the cube");
  }

  const auto centers = cell_centers(g);
  const auto cq = g.center(q);
  const double half = C * g.length(q.scale) / 2.0;
  std::vector<i64> near, far;
  for (i64 c = 0; c < g.cell_count(); ++c) {
    bool in = true;
    for (int a = 0; a < d; ++a)
      in = in && std::abs(centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)] -
                          cq[static_cast<std::size_t>(a)]) <= half;
    (in ? near : far).push_back(c);
  }

  const std::vector<int> dims = block_dims(k);
  double meas = 1.0;
  for (int s = 0; s <= n; ++s) meas *= g.cell_measure();
  i64 ycombos = 1;
  for (int c = 0; c < n * d; ++c) ycombos *= T.rho;
  const double h = g.length(g.window().lmin);

  cx value{0.0, 0.0};
  for (int mask = 0; mask < (1 << n); ++mask) {
    CellTable tab;
    tab.grid = &g;
    tab.kernel = &k;
    tab.rho = T.rho;
    tab.xs = qcells;
    bool empty = false;
    for (int j = 0; j < n; ++j) {
      tab.ys.push_back(((mask >> j) & 1) ? far : near);
      empty = empty || tab.ys.back().empty();
    }
    if (empty) continue;
    tab.centers = &centers;
    build_table(tab);

    // compensation at the cube center for patterns with a far slot: the
    // subtracted blocks are constant in the output variable, so they cancel
    // against the mean-zero pairing function exactly
    i64 ytuples = 1;
    for (const auto& l : tab.ys) ytuples *= static_cast<i64>(l.size());
    cxvec sub;
    if (mask != 0) {
      sub.assign(static_cast<std::size_t>(ytuples * tab.block), cx{0.0, 0.0});
      std::vector<std::vector<double>> y(
          static_cast<std::size_t>(n),
          std::vector<double>(static_cast<std::size_t>(d)));
      for (i64 yt = 0; yt < ytuples; ++yt) {
        i64 rem = yt;
        std::vector<i64> cells(static_cast<std::size_t>(n));
        for (int m = n - 1; m >= 0; --m) {
          const i64 sz = static_cast<i64>(tab.ys[static_cast<std::size_t>(m)].size());
          cells[static_cast<std::size_t>(m)] =
              tab.ys[static_cast<std::size_t>(m)][static_cast<std::size_t>(rem % sz)];
          rem /= sz;
        }
        cx* out = &sub[static_cast<std::size_t>(yt * tab.block)];
        for (i64 cb = 0; cb < ycombos; ++cb) {
          i64 crem = cb;
          for (int s = n; s >= 1; --s) {
            const auto& base =
                centers[static_cast<std::size_t>(cells[static_cast<std::size_t>(s - 1)])];
            for (int a = d - 1; a >= 0; --a) {
              const int o = static_cast<int>(crem % T.rho);
              crem /= T.rho;
              y[static_cast<std::size_t>(s - 1)][static_cast<std::size_t>(a)] =
                  base[static_cast<std::size_t>(a)] + ((o + 0.5) / T.rho - 0.5) * h;
            }
          }
          const MultilinearOp v = k.eval(cq, y);
          if (!v.is_dense() || static_cast<i64>(v.tensor().size()) != tab.block)
            throw std::invalid_argument(
                "kernel evaluator returned a value of the wrong shape");
          for (i64 e = 0; e < tab.block; ++e)
            out[e] += v.tensor()[static_cast<std::size_t>(e)];
        }
        for (i64 e = 0; e < tab.block; ++e)
          out[e] /= static_cast<double>(ycombos);
      }
    }

    value += reduce_sum(
        static_cast<std::size_t>(tab.tuples()), [&](std::size_t tu) {
          std::size_t rem = tu;
          std::vector<i64> cells(static_cast<std::size_t>(n) + 1);
          for (int m = n - 1; m >= 0; --m) {
            const std::size_t sz = tab.ys[static_cast<std::size_t>(m)].size();
            cells[static_cast<std::size_t>(m) + 1] =
                tab.ys[static_cast<std::size_t>(m)][rem % sz];
            rem /= sz;
          }
          cells[0] = tab.xs[rem];
          const std::size_t yflat = tu % static_cast<std::size_t>(ytuples);
          const cx* blk = &tab.vals[tu * static_cast<std::size_t>(tab.block)];
          const cx* cmp =
              mask == 0 ? nullptr
                        : &sub[yflat * static_cast<std::size_t>(tab.block)];
          cx s{0.0, 0.0};
          for (i64 e = 0; e < tab.block; ++e) {
            i64 erem = e;
            cx prod = cmp ? blk[e] - cmp[e] : blk[e];
            for (int v = n; v >= 0; --v) {
              const int c =
                  static_cast<int>(erem % dims[static_cast<std::size_t>(v)]);
              erem /= dims[static_cast<std::size_t>(v)];
              const GridFunction& f =
                  v == 0 ? phi_q : phis[static_cast<std::size_t>(v - 1)];
              prod *= f.at(cells[static_cast<std::size_t>(v)])[static_cast<std::size_t>(c)];
            }
            s += prod;
          }
          return s;
        }) * meas;
  }
  return MultilinearOp::dense({}, Space::scalar(), {value});
}

std::map<HaarIndex, MultilinearOp> full_t1_sequence(const SIOForm& T,
                                                    const Grid& g, int m) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  if (m < 0 || m > n)
    throw std::invalid_argument("full_t1_sequence: slot out of range");

  CellTable tab;
  tab.grid = &g;
  tab.kernel = &k;
  tab.rho = T.rho;
  tab.xs = every_cell(g);
  tab.ys.assign(static_cast<std::size_t>(n), tab.xs);
  const auto centers = cell_centers(g);
  tab.centers = &centers;
  build_table(tab);

  const std::vector<i64> emap = entry_map(block_dims(k), m);
  const WList ones = unit_list(static_cast<std::size_t>(g.cell_count()));
  std::vector<const WList*> yw(static_cast<std::size_t>(n), &ones);

  std::vector<HaarIndex> keys;
  const int sigs = 1 << g.dim();
  for (int s = g.window().lmin + 1; s <= g.window().lmax; ++s)
    for (const Cube& q : g.cubes(s))
      for (int eta = 1; eta < sigs; ++eta) keys.push_back({q, eta});

  std::vector<cxvec> vals(keys.size());
  run_chunks(keys.size(), [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      const WList xw = haar_cells(g, keys[i].cube, keys[i].eta);
      vals[i] = pair_weighted(tab, m, emap, yw, xw);
    }
  });

  std::map<HaarIndex, MultilinearOp> seq;
  for (std::size_t i = 0; i < keys.size(); ++i)
    seq.emplace(keys[i],
                MultilinearOp::dense(view_ins(k, m), view_out(k, m),
                                     std::move(vals[i])));
  return seq;
}

double default_gamma(int n, int dim, double alpha) {
  if (n < 1 || dim < 1 || !(alpha > 0.0))
    throw std::invalid_argument("default_gamma: bad parameters");
  return alpha / (2.0 * (dim * n + alpha));
}

// ---------------------------------------------------------------------------
// The expansion into shifts and paraproducts

Decomposition decompose(const SIOForm& T, const Grid& g, double gamma, int r,
                        const DecomposeOptions& opt) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  const int d = g.dim();
  const int lmin = g.window().lmin, lmax = g.window().lmax;
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("decompose: gamma must lie in (0, 1)");
  if (r < 1) throw std::invalid_argument("decompose: r must be at least 1");
  if (g.window().scales() < r + 1)
    throw std::invalid_argument(
        "decompose: the scale window is too shallow for the comparison depth");
  if (g.cubes(lmax).size() != 1)
    throw std::invalid_argument("decompose: a single top cube is required");

  const auto centers = cell_centers(g);
  CellTable tab;
  tab.grid = &g;
  tab.kernel = &k;
  tab.rho = T.rho;
  tab.xs = every_cell(g);
  tab.ys.assign(static_cast<std::size_t>(n), tab.xs);
  tab.centers = &centers;
  build_table(tab);

  const std::vector<int> dims = block_dims(k);
  std::vector<std::vector<i64>> emaps;
  std::vector<std::vector<Space>> vins;
  std::vector<Space> vouts;
  for (int m = 0; m <= n; ++m) {
    emaps.push_back(entry_map(dims, m));
    vins.push_back(view_ins(k, m));
    vouts.push_back(view_out(k, m));
  }

  const int sigs = 1 << d;
  std::vector<std::vector<Cube>> by_scale(
      static_cast<std::size_t>(lmax - lmin) + 1);
  for (int s = lmin; s <= lmax; ++s)
    by_scale[static_cast<std::size_t>(s - lmin)] = g.cubes(s);
  const auto cubes_at = [&](int s) -> const std::vector<Cube>& {
    return by_scale[static_cast<std::size_t>(s - lmin)];
  };

  struct Part {
    double sign;
    std::vector<WList> yw;
    WList xw;
  };
  struct Job {
    ShiftKey key;
    std::vector<Part> parts;
  };
  using BucketId = std::tuple<int, int, int, int, int>;  // m, slot, origin, out depth, in depth
  std::map<BucketId, std::vector<Job>> buckets;

  const auto emit = [&](int m, int slot, TermOrigin o, int p1, int p2,
                        ShiftKey key, std::vector<Part> parts) {
    buckets[{m, slot, static_cast<int>(o), p1, p2}].push_back(
        {std::move(key), std::move(parts)});
  };

  // enumerate the rectangles paired against each sign-alternating atom
  for (int m = 0; m <= n; ++m) {
    for (int qs = lmin + 1; qs <= lmax; ++qs) {
      for (const Cube& q : cubes_at(qs)) {
        const std::vector<i64> qfirst_cells = g.cells_of(q);
        const i64 qfirst = qfirst_cells.front();

        // coarser rectangles: one slot per level carries the moving atom
        for (int i = 1; i <= n; ++i) {
          for (int t = qs + 1; t <= lmax; ++t) {
            std::vector<const std::vector<Cube>*> lists;
            for (int l = 1; l <= n; ++l)
              lists.push_back(&cubes_at(l <= i ? t : t - 1));
            std::vector<std::size_t> it(static_cast<std::size_t>(n), 0);
            for (;;) {
              ScaleRect rect;
              rect.split = i;
              for (int l = 0; l < n; ++l)
                rect.factors.push_back(
                    (*lists[static_cast<std::size_t>(l)])[it[static_cast<std::size_t>(l)]]);
              const PairClass cls = classify_pair(g, q, rect, gamma, r);
              if (cls == PairClass::Separated || cls == PairClass::Nearby) {
                std::vector<Cube> family = rect.factors;
                family.push_back(q);
                const auto top = g.common_parent(family);
                if (!top)
                  throw std::logic_error(
                      "decompose: no common ancestor despite a single root");
                const int j1 = top->scale - qs;
                const int j2 = top->scale - t;
                const TermOrigin o = cls == PairClass::Separated
                                         ? TermOrigin::Separated
                                         : TermOrigin::Nearby;
                for (int eta = 1; eta < sigs; ++eta)
                  for (int eo = 1; eo < sigs; ++eo) {
                    ShiftKey key;
                    key.top = *top;
                    for (int l = 0; l < n; ++l)
                      key.slots.push_back(
                          {rect.factors[static_cast<std::size_t>(l)],
                           l == i - 1 ? eta : 0});
                    key.slots.push_back({q, eo});
                    Part part;
                    part.sign = 1.0;
                    for (int l = 0; l < n; ++l)
                      part.yw.push_back(
                          haar_cells(g, rect.factors[static_cast<std::size_t>(l)],
                                     l == i - 1 ? eta : 0));
                    part.xw = haar_cells(g, q, eo);
                    emit(m, i, o, j1, j2, std::move(key), {std::move(part)});
                  }
              } else if (cls == PairClass::Inside) {
                // the unique rectangle of exact ancestors: replace the
                // averaged atom by its value at the cube plus compensating
                // profiles with flipped sign
                const int kappa = t - qs;
                const Cube topc = g.parent(q, kappa);
                const Cube midc = g.parent(q, kappa - 1);
                for (int eta = 1; eta < sigs; ++eta) {
                  std::vector<Cube> ucube(static_cast<std::size_t>(n));
                  std::vector<int> ueta(static_cast<std::size_t>(n));
                  for (int l = 0; l < n; ++l) {
                    ucube[static_cast<std::size_t>(l)] = l < i ? topc : midc;
                    ueta[static_cast<std::size_t>(l)] = l == i - 1 ? eta : 0;
                  }
                  std::vector<WList> ulist(static_cast<std::size_t>(n));
                  std::vector<double> uval(static_cast<std::size_t>(n));
                  for (int l = 0; l < n; ++l) {
                    ulist[static_cast<std::size_t>(l)] =
                        haar_cells(g, ucube[static_cast<std::size_t>(l)],
                                   ueta[static_cast<std::size_t>(l)]);
                    uval[static_cast<std::size_t>(l)] = haar_cell_value(
                        g, ucube[static_cast<std::size_t>(l)],
                        ueta[static_cast<std::size_t>(l)], qfirst);
                  }
                  for (int eo = 1; eo < sigs; ++eo) {
                    ShiftKey key;
                    key.top = topc;
                    for (int l = 0; l < n; ++l)
                      key.slots.push_back({ucube[static_cast<std::size_t>(l)],
                                           ueta[static_cast<std::size_t>(l)]});
                    key.slots.push_back({q, eo});
                    std::vector<Part> parts;
                    for (int j = 0; j < n; ++j) {
                      Part p;
                      p.sign = -1.0;
                      p.xw = haar_cells(g, q, eo);
                      for (int l = 0; l < n; ++l) {
                        if (l < j) {
                          WList w;
                          for (i64 c = 0; c < g.cell_count(); ++c)
                            w.push_back({c, uval[static_cast<std::size_t>(l)]});
                          p.yw.push_back(std::move(w));
                        } else if (l == j) {
                          WList w;
                          for (i64 c = 0; c < g.cell_count(); ++c)
                            w.push_back(
                                {c, uval[static_cast<std::size_t>(l)] -
                                        haar_cell_value(
                                            g, ucube[static_cast<std::size_t>(l)],
                                            ueta[static_cast<std::size_t>(l)], c)});
                          p.yw.push_back(std::move(w));
                        } else {
                          p.yw.push_back(ulist[static_cast<std::size_t>(l)]);
                        }
                      }
                      parts.push_back(std::move(p));
                    }
                    emit(m, i, TermOrigin::Error, kappa, 0, std::move(key),
                         std::move(parts));
                  }
                }
              }
              int l = n - 1;
              while (l >= 0 && ++it[static_cast<std::size_t>(l)] ==
                                   lists[static_cast<std::size_t>(l)]->size()) {
                it[static_cast<std::size_t>(l)] = 0;
                --l;
              }
              if (l < 0) break;
            }
          }
        }

        // same-scale rectangles appear once the output slot has moved
        if (m >= 1) {
          for (int j = m; j <= n; ++j) {
            std::vector<const std::vector<Cube>*> lists;
            for (int l = 1; l <= n; ++l)
              lists.push_back(&cubes_at(l <= j ? qs : qs - 1));
            std::vector<std::size_t> it(static_cast<std::size_t>(n), 0);
            for (;;) {
              ScaleRect rect;
              rect.split = j;
              for (int l = 0; l < n; ++l)
                rect.factors.push_back(
                    (*lists[static_cast<std::size_t>(l)])[it[static_cast<std::size_t>(l)]]);
              const PairClass cls = classify_pair(g, q, rect, gamma, r);
              if (cls == PairClass::Separated || cls == PairClass::Nearby) {
                std::vector<Cube> family = rect.factors;
                family.push_back(q);
                const auto top = g.common_parent(family);
                if (!top)
                  throw std::logic_error(
                      "decompose: no common ancestor despite a single root");
                const int j1 = top->scale - qs;
                const int j2 = top->scale - qs;
                const TermOrigin o = cls == PairClass::Separated
                                         ? TermOrigin::Separated
                                         : TermOrigin::Nearby;
                for (int eta = 1; eta < sigs; ++eta)
                  for (int eo = 1; eo < sigs; ++eo) {
                    ShiftKey key;
                    key.top = *top;
                    for (int l = 0; l < n; ++l)
                      key.slots.push_back(
                          {rect.factors[static_cast<std::size_t>(l)],
                           l == j - 1 ? eta : 0});
                    key.slots.push_back({q, eo});
                    Part part;
                    part.sign = 1.0;
                    for (int l = 0; l < n; ++l)
                      part.yw.push_back(
                          haar_cells(g, rect.factors[static_cast<std::size_t>(l)],
                                     l == j - 1 ? eta : 0));
                    part.xw = haar_cells(g, q, eo);
                    emit(m, j, o, j1, j2, std::move(key), {std::move(part)});
                  }
              } else if (cls == PairClass::Diagonal) {
                // split the full pairing into child-aligned and mixed halves
                for (int eta = 1; eta < sigs; ++eta) {
                  std::vector<WList> ulist(static_cast<std::size_t>(n));
                  for (int l = 0; l < n; ++l)
                    ulist[static_cast<std::size_t>(l)] =
                        haar_cells(g, rect.factors[static_cast<std::size_t>(l)],
                                   l == j - 1 ? eta : 0);
                  for (int eo = 1; eo < sigs; ++eo) {
                    ShiftKey key;
                    key.top = q;
                    for (int l = 0; l < n; ++l)
                      key.slots.push_back(
                          {rect.factors[static_cast<std::size_t>(l)],
                           l == j - 1 ? eta : 0});
                    key.slots.push_back({q, eo});
                    const WList xw = haar_cells(g, q, eo);

                    std::vector<Part> aligned;
                    for (const Cube& ch : g.children(q)) {
                      std::vector<char> inch(
                          static_cast<std::size_t>(g.cell_count()), 0);
                      for (i64 c : g.cells_of(ch))
                        inch[static_cast<std::size_t>(c)] = 1;
                      const auto restrict_to = [&](const WList& w) {
                        WList o2;
                        for (const auto& e : w)
                          if (inch[static_cast<std::size_t>(e.first)])
                            o2.push_back(e);
                        return o2;
                      };
                      Part p;
                      p.sign = 1.0;
                      bool empty = false;
                      for (int l = 0; l < n; ++l) {
                        p.yw.push_back(
                            restrict_to(ulist[static_cast<std::size_t>(l)]));
                        empty = empty || p.yw.back().empty();
                      }
                      p.xw = restrict_to(xw);
                      empty = empty || p.xw.empty();
                      if (!empty) aligned.push_back(std::move(p));
                    }
                    std::vector<Part> mixed;
                    {
                      Part p;
                      p.sign = 1.0;
                      p.yw = ulist;
                      p.xw = xw;
                      mixed.push_back(std::move(p));
                    }
                    for (const Part& p : aligned) {
                      Part q2 = p;
                      q2.sign = -1.0;
                      mixed.push_back(std::move(q2));
                    }
                    ShiftKey key2 = key;
                    emit(m, j, TermOrigin::DiagonalMixed, 0, 0, std::move(key),
                         std::move(mixed));
                    emit(m, j, TermOrigin::DiagonalAligned, 0, 0,
                         std::move(key2), std::move(aligned));
                  }
                }
              }
              int l = n - 1;
              while (l >= 0 && ++it[static_cast<std::size_t>(l)] ==
                                   lists[static_cast<std::size_t>(l)]->size()) {
                it[static_cast<std::size_t>(l)] = 0;
                --l;
              }
              if (l < 0) break;
            }
          }
        }
      }
    }
  }

  // assemble terms in bucket order, then evaluate every coefficient
  Decomposition dec{k.alpha,
                    gamma,
                    r,
                    {},
                    {},
                    MultilinearOp::zero(k.ins, k.out),
                    0.0};
  struct FlatJob {
    std::size_t term;
    const Job* job;
  };
  std::vector<FlatJob> flat;
  for (const auto& [id, jobs] : buckets) {
    const auto& [m, slot, oi, p1, p2] = id;
    std::vector<int> comp(static_cast<std::size_t>(n) + 1);
    for (int l = 0; l < n; ++l)
      comp[static_cast<std::size_t>(l)] = l < slot ? p2 : p2 + 1;
    comp[static_cast<std::size_t>(n)] = p1;
    const int maxk = *std::max_element(comp.begin(), comp.end());
    dec.terms.push_back(
        {m, slot, static_cast<TermOrigin>(oi),
         std::exp2(-k.alpha * maxk / 2.0),
         ShiftSpec(g, comp, {slot - 1, n}, vins[static_cast<std::size_t>(m)],
                   vouts[static_cast<std::size_t>(m)])});
    for (const Job& j : jobs)
      flat.push_back({dec.terms.size() - 1, &j});
  }

  std::vector<cxvec> coeffs(flat.size());
  run_chunks(flat.size(), [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      const int m = dec.terms[flat[i].term].adjoint;
      cxvec acc(static_cast<std::size_t>(tab.block), cx{0.0, 0.0});
      for (const Part& p : flat[i].job->parts) {
        std::vector<const WList*> yw;
        for (const WList& w : p.yw) yw.push_back(&w);
        const cxvec v =
            pair_weighted(tab, m, emaps[static_cast<std::size_t>(m)], yw, p.xw);
        for (std::size_t e2 = 0; e2 < acc.size(); ++e2)
          acc[e2] += p.sign * v[e2];
      }
      coeffs[i] = std::move(acc);
    }
  });
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const int m = dec.terms[flat[i].term].adjoint;
    dec.terms[flat[i].term].spec.set(
        flat[i].job->key,
        MultilinearOp::dense(vins[static_cast<std::size_t>(m)],
                             vouts[static_cast<std::size_t>(m)],
                             std::move(coeffs[i])));
  }

  // direct symbols: unit-profile pairings against every alternating atom
  const WList ones = unit_list(static_cast<std::size_t>(g.cell_count()));
  for (int m = 0; m <= n; ++m) {
    ParaproductSpec pp(g, vins[static_cast<std::size_t>(m)],
                       vouts[static_cast<std::size_t>(m)]);
    std::vector<HaarIndex> keys;
    for (int s = lmin + 1; s <= lmax; ++s)
      for (const Cube& q : cubes_at(s))
        for (int eta = 1; eta < sigs; ++eta) keys.push_back({q, eta});
    std::vector<cxvec> vals(keys.size());
    run_chunks(keys.size(), [&](std::size_t b, std::size_t e, std::size_t) {
      std::vector<const WList*> yw(static_cast<std::size_t>(n), &ones);
      for (std::size_t i = b; i < e; ++i)
        vals[i] = pair_weighted(tab, m, emaps[static_cast<std::size_t>(m)], yw,
                                haar_cells(g, keys[i].cube, keys[i].eta));
    });
    for (std::size_t i = 0; i < keys.size(); ++i)
      pp.set(keys[i],
             MultilinearOp::dense(vins[static_cast<std::size_t>(m)],
                                  vouts[static_cast<std::size_t>(m)],
                                  std::move(vals[i])));
    dec.paraproducts.push_back(std::move(pp));
  }

  // coarsest-average remainder
  {
    std::vector<const WList*> yw(static_cast<std::size_t>(n), &ones);
    dec.remainder =
        MultilinearOp::dense(k.ins, k.out,
                             pair_weighted(tab, 0, emaps[0], yw, ones));
  }

  // probe the reconstruction with random argument tuples
  Rng rng(opt.seed);
  double worst = 0.0;
  for (int trial = 0; trial < opt.check_tuples; ++trial) {
    std::vector<GridFunction> fs;
    for (int m = 0; m < n; ++m)
      fs.push_back(
          GridFunction::random(g, k.ins[static_cast<std::size_t>(m)], rng));
    fs.push_back(GridFunction::random(g, k.out, rng));
    worst = std::max(worst, verify_decomposition(dec, T, fs).residual);
  }
  dec.residual = worst;
  return dec;
}

ReconstructionCheck verify_decomposition(const Decomposition& dec,
                                         const SIOForm& T,
                                         const std::vector<GridFunction>& fs) {
  ReconstructionCheck chk;
  chk.direct = direct_form(T, fs);
  const Grid& g = fs.front().grid();
  const int n = static_cast<int>(fs.size()) - 1;
  cx recon{0.0, 0.0};
  for (const auto& term : dec.terms) {
    const auto args = adjoint_arguments(fs, term.adjoint);
    const std::vector<GridFunction> ins(args.begin(), args.end() - 1);
    recon += shift_form(term.spec, ins, args.back());
  }
  for (int m = 0; m <= n && m < static_cast<int>(dec.paraproducts.size()); ++m) {
    const auto args = adjoint_arguments(fs, m);
    const std::vector<GridFunction> ins(args.begin(), args.end() - 1);
    recon += bilinear_form(
        apply_paraproduct(dec.paraproducts[static_cast<std::size_t>(m)], ins),
        args.back());
  }
  const Cube root = g.cubes(g.window().lmax).front();
  std::vector<cxvec> avgs;
  for (int m = 0; m < n; ++m)
    avgs.push_back(average(fs[static_cast<std::size_t>(m)], root));
  recon += dec.remainder.pair_apply(avgs,
                                    average(fs[static_cast<std::size_t>(n)], root));
  chk.reconstructed = recon;
  chk.residual = std::abs(chk.direct - recon) / (1.0 + std::abs(chk.direct));
  return chk;
}

// ---------------------------------------------------------------------------
// Translation averaging

OmegaAverage average_over_omega(const SIOForm& T,
                                const std::vector<GridFunction>& fs,
                                double gamma, int r, bool enumerate_mode,
                                int samples, std::uint64_t seed) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  check_arguments(k, fs, "average_over_omega");
  const Grid& g = fs.front().grid();
  const int d = g.dim();
  const int lmin = g.window().lmin, lmax = g.window().lmax;
  if (!(g.shift() == LatticeShift::none(g.window(), d)))
    throw std::invalid_argument(
        "average_over_omega: the reference grid must be unshifted");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument(
        "average_over_omega: gamma must lie in (0, 1)");
  if (r < 1)
    throw std::invalid_argument("average_over_omega: r must be at least 1");
  const int L = lmax - lmin;

  OmegaAverage res;
  res.direct = direct_form(T, fs);

  // translation list (per-axis offsets in finest cells)
  std::vector<std::vector<i64>> trans;
  if (L == 0) {
    trans.push_back(std::vector<i64>(static_cast<std::size_t>(d), 0));
    res.enumerated = true;
  } else {
    if (g.roots() < 2)
      throw std::invalid_argument(
          "average_over_omega: translations need spare root cubes");
    if (enumerate_mode) {
      if (L * d > 12)
        throw std::invalid_argument(
            "average_over_omega: enumeration budget exceeded");
      const i64 per = i64{1} << L;
      i64 total = 1;
      for (int a = 0; a < d; ++a) total *= per;
      for (i64 w = 0; w < total; ++w) {
        std::vector<i64> tv(static_cast<std::size_t>(d));
        i64 rem = w;
        for (int a = 0; a < d; ++a) {
          tv[static_cast<std::size_t>(a)] = rem % per;
          rem /= per;
        }
        trans.push_back(std::move(tv));
      }
      res.enumerated = true;
    } else {
      if (samples < 1)
        throw std::invalid_argument(
            "average_over_omega: at least one sample required");
      Rng rng(seed);
      for (int s = 0; s < samples; ++s) {
        std::vector<i64> tv(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a)
          tv[static_cast<std::size_t>(a)] =
              static_cast<i64>(rng.below(std::uint64_t{1} << L));
        trans.push_back(std::move(tv));
      }
      res.enumerated = false;
    }
    // the data core must stay clear of the sliding box edges
    const i64 tmax = (i64{1} << L) - 1;
    const i64 hbit = i64{1} << (L - 1);
    for (const auto& f : fs)
      for (i64 c : support_cells(f)) {
        const auto coords = g.cell_coords(c);
        for (int a = 0; a < d; ++a)
          if (coords[static_cast<std::size_t>(a)] < tmax + hbit - 1 ||
              coords[static_cast<std::size_t>(a)] > g.extent() - hbit)
            throw std::invalid_argument(
                "average_over_omega: data too close to the sliding box edges");
      }
  }
  res.omegas = static_cast<int>(trans.size());

  // per-scale goodness fractions of the sliding offsets, finest first,
  // mirroring the cube goodness test bit for bit
  res.scale_probability.assign(static_cast<std::size_t>(L) + 1, 1.0);
  for (int l = lmin; l <= lmax; ++l) {
    const i64 side_l = i64{1} << (l - lmin);
    const i64 count_u = i64{1} << (lmax - l);
    i64 good = 0;
    for (i64 u = 0; u < count_u; ++u) {
      bool ok = true;
      for (int s = l + r; s <= lmax && ok; ++s) {
        const i64 side_s = i64{1} << (s - lmin);
        const i64 o = (u * side_l) % side_s;
        const i64 gap_cells = std::min(o, side_s - side_l - o);
        ok = std::ldexp(static_cast<double>(gap_cells), lmin) >
             std::exp2(gamma * l + (1.0 - gamma) * s);
      }
      if (ok) ++good;
    }
    double p = 1.0;
    const double p1 = static_cast<double>(good) / static_cast<double>(count_u);
    for (int a = 0; a < d; ++a) p *= p1;
    res.scale_probability[static_cast<std::size_t>(l - lmin)] = p;
    if (l > lmin && p == 0.0)
      throw std::runtime_error(
          "average_over_omega: goodness probability vanishes at a splittable "
          "scale");
  }

  const std::vector<int> dims = block_dims(k);
  std::vector<std::vector<i64>> emaps;
  for (int m = 0; m <= n; ++m) emaps.push_back(entry_map(dims, m));
  std::vector<int> sdim(static_cast<std::size_t>(n) + 1);
  for (int m = 0; m <= n; ++m)
    sdim[static_cast<std::size_t>(m)] =
        fs[static_cast<std::size_t>(m)].space().dim();
  double meas = 1.0;
  for (int s = 0; s <= n; ++s) meas *= g.cell_measure();
  const i64 cells = g.cell_count();
  const std::vector<Cube> roots = g.cubes(lmax);

  cx accum{0.0, 0.0};
  for (const auto& tv : trans) {
    // load the data translated into box coordinates (zero off the window)
    std::vector<cxvec> data(static_cast<std::size_t>(n) + 1);
    std::vector<std::vector<char>> nz(static_cast<std::size_t>(n) + 1);
    for (int m = 0; m <= n; ++m) {
      data[static_cast<std::size_t>(m)].assign(
          static_cast<std::size_t>(cells * sdim[static_cast<std::size_t>(m)]),
          cx{0.0, 0.0});
      nz[static_cast<std::size_t>(m)].assign(static_cast<std::size_t>(cells), 0);
    }
    for (int m = 0; m <= n; ++m)
      for (i64 c = 0; c < cells; ++c) {
        auto coords = g.cell_coords(c);
        bool in = true;
        for (int a = 0; a < d; ++a) {
          coords[static_cast<std::size_t>(a)] += tv[static_cast<std::size_t>(a)];
          in = in && coords[static_cast<std::size_t>(a)] < g.extent();
        }
        if (!in) continue;
        i64 src = 0;
        for (int a = d - 1; a >= 0; --a)
          src = src * g.extent() + coords[static_cast<std::size_t>(a)];
        const auto v = fs[static_cast<std::size_t>(m)].at(src);
        bool any = false;
        for (int e = 0; e < sdim[static_cast<std::size_t>(m)]; ++e) {
          data[static_cast<std::size_t>(m)]
              [static_cast<std::size_t>(c * sdim[static_cast<std::size_t>(m)] + e)] =
                  v[static_cast<std::size_t>(e)];
          any = any || v[static_cast<std::size_t>(e)] != cx{0.0, 0.0};
        }
        nz[static_cast<std::size_t>(m)][static_cast<std::size_t>(c)] = any;
      }

    // active region: root cubes meeting any translated data
    std::vector<char> cell_active(static_cast<std::size_t>(cells), 0);
    for (const Cube& rt : roots) {
      bool hit = false;
      for (i64 c : g.cells_of(rt))
        for (int m = 0; m <= n && !hit; ++m)
          hit = nz[static_cast<std::size_t>(m)][static_cast<std::size_t>(c)];
      if (hit)
        for (i64 c : g.cells_of(rt)) cell_active[static_cast<std::size_t>(c)] = 1;
    }
    std::vector<i64> act;
    for (i64 c = 0; c < cells; ++c)
      if (cell_active[static_cast<std::size_t>(c)]) act.push_back(c);
    if (act.empty()) continue;  // nothing stored: zero contribution
    std::vector<i64> apos(static_cast<std::size_t>(cells), -1);
    for (std::size_t i = 0; i < act.size(); ++i)
      apos[static_cast<std::size_t>(act[i])] = static_cast<i64>(i);

    // kernel table over active cells at translated physical centers
    std::vector<std::vector<double>> tc(static_cast<std::size_t>(cells));
    for (i64 c = 0; c < cells; ++c) {
      const auto coords = g.cell_coords(c);
      std::vector<double> p(static_cast<std::size_t>(d));
      for (int a = 0; a < d; ++a)
        p[static_cast<std::size_t>(a)] = std::ldexp(
            static_cast<double>(tv[static_cast<std::size_t>(a)] +
                                coords[static_cast<std::size_t>(a)]) + 0.5,
            lmin);
      tc[static_cast<std::size_t>(c)] = std::move(p);
    }
    CellTable tab;
    tab.grid = &g;
    tab.kernel = &k;
    tab.rho = T.rho;
    tab.xs = act;
    tab.ys.assign(static_cast<std::size_t>(n), act);
    tab.centers = &tc;
    build_table(tab);

    // scale projections of the stored data (value of the cube average on
    // every cell of the cube)
    std::vector<std::vector<cxvec>> avg(static_cast<std::size_t>(n) + 1);
    for (int m = 0; m <= n; ++m) {
      avg[static_cast<std::size_t>(m)].assign(
          static_cast<std::size_t>(L) + 1,
          cxvec(static_cast<std::size_t>(cells * sdim[static_cast<std::size_t>(m)]),
                cx{0.0, 0.0}));
      for (int s = lmin; s <= lmax; ++s)
        for (const Cube& q : g.cubes(s)) {
          const auto qc = g.cells_of(q);
          cxvec mean(static_cast<std::size_t>(sdim[static_cast<std::size_t>(m)]),
                     cx{0.0, 0.0});
          for (i64 c : qc)
            for (int e = 0; e < sdim[static_cast<std::size_t>(m)]; ++e)
              mean[static_cast<std::size_t>(e)] +=
                  data[static_cast<std::size_t>(m)][static_cast<std::size_t>(
                      c * sdim[static_cast<std::size_t>(m)] + e)];
          for (cx& v : mean) v /= static_cast<double>(qc.size());
          for (i64 c : qc)
            for (int e = 0; e < sdim[static_cast<std::size_t>(m)]; ++e)
              avg[static_cast<std::size_t>(m)][static_cast<std::size_t>(s - lmin)]
                 [static_cast<std::size_t>(c * sdim[static_cast<std::size_t>(m)] + e)] =
                     mean[static_cast<std::size_t>(e)];
        }
    }

    // profile contraction leaving the view output coordinate open:
    // W[x][io'] over active cells, for given per-slot profile arrays
    const auto profile_sums =
        [&](int m, const std::vector<const cxvec*>& prof) {
          const int od = dims[0];
          const int vod = m == 0 ? od : dims[static_cast<std::size_t>(m)];
          std::vector<cxvec> W(act.size(),
                               cxvec(static_cast<std::size_t>(vod), cx{0.0, 0.0}));
          const i64 block = tab.block;
          std::vector<int> vdims(dims);
          if (m >= 1) std::swap(vdims[0], vdims[static_cast<std::size_t>(m)]);
          run_chunks(act.size(), [&](std::size_t b, std::size_t e,
                                     std::size_t) {
            std::vector<std::size_t> it(static_cast<std::size_t>(n), 0);
            for (std::size_t px = b; px < e; ++px) {
              cxvec& row = W[px];
              std::fill(it.begin(), it.end(), std::size_t{0});
              for (;;) {
                // base tuple index under the view role swap
                i64 bi = 0;
                {
                  const std::size_t xpos =
                      m == 0 ? px : it[static_cast<std::size_t>(m - 1)];
                  bi = static_cast<i64>(xpos);
                  for (int l = 1; l <= n; ++l) {
                    const std::size_t p2 =
                        l == m ? px : it[static_cast<std::size_t>(l - 1)];
                    bi = bi * static_cast<i64>(act.size()) +
                         static_cast<i64>(p2);
                  }
                }
                const cx* blk =
                    &tab.vals[static_cast<std::size_t>(bi * block)];
                for (i64 e2 = 0; e2 < block; ++e2) {
                  cx prod = blk[emaps[static_cast<std::size_t>(m)]
                                     [static_cast<std::size_t>(e2)]];
                  i64 erem = e2;
                  int io = 0;
                  for (int v = n; v >= 0; --v) {
                    const int cdim = vdims[static_cast<std::size_t>(v)];
                    const int cc = static_cast<int>(erem % cdim);
                    erem /= cdim;
                    if (v == 0) {
                      io = cc;
                    } else {
                      prod *= (*prof[static_cast<std::size_t>(v - 1)])
                          [it[static_cast<std::size_t>(v - 1)] *
                               static_cast<std::size_t>(cdim) +
                           static_cast<std::size_t>(cc)];
                    }
                  }
                  row[static_cast<std::size_t>(io)] += prod;
                }
                int l = n - 1;
                while (l >= 0 && ++it[static_cast<std::size_t>(l)] == act.size()) {
                  it[static_cast<std::size_t>(l)] = 0;
                  --l;
                }
                if (l < 0) break;
              }
            }
          });
          return W;
        };

    // per-slot profile arrays over active cells for one view and scale pair
    const auto profile_of = [&](int arg, int scale) {
      cxvec p(act.size() * static_cast<std::size_t>(sdim[static_cast<std::size_t>(arg)]));
      for (std::size_t i = 0; i < act.size(); ++i)
        for (int e = 0; e < sdim[static_cast<std::size_t>(arg)]; ++e)
          p[i * static_cast<std::size_t>(sdim[static_cast<std::size_t>(arg)]) +
            static_cast<std::size_t>(e)] =
              avg[static_cast<std::size_t>(arg)][static_cast<std::size_t>(scale - lmin)]
                 [static_cast<std::size_t>(act[i] * sdim[static_cast<std::size_t>(arg)] + e)];
      return p;
    };

    cx bracket{0.0, 0.0};
    for (int m = 0; m <= n; ++m) {
      // view slot l (1-based) reads original argument ia(l); the view output
      // reads argument io
      const auto ia = [&](int l) { return m >= 1 && l == m ? n : l - 1; };
      const int io = m == 0 ? n : m - 1;
      for (int qs = lmin + 1; qs <= lmax; ++qs) {
        const double pw =
            res.scale_probability[static_cast<std::size_t>(qs - lmin)];
        std::vector<cxvec> profs;
        std::vector<const cxvec*> profp;
        for (int l = 1; l <= n; ++l) {
          const bool full = m == 0 || l < m;
          profs.push_back(profile_of(ia(l), full ? qs : qs - 1));
        }
        for (const auto& p : profs) profp.push_back(&p);
        const std::vector<cxvec> W = profile_sums(m, profp);
        for (const Cube& q : g.cubes(qs)) {
          if (!g.is_good(q, gamma, r)) continue;
          cx lam{0.0, 0.0};
          for (i64 c : g.cells_of(q)) {
            const i64 p2 = apos[static_cast<std::size_t>(c)];
            if (p2 < 0) continue;
            for (int e = 0; e < sdim[static_cast<std::size_t>(io)]; ++e) {
              const cx diff =
                  avg[static_cast<std::size_t>(io)][static_cast<std::size_t>(qs - 1 - lmin)]
                     [static_cast<std::size_t>(c * sdim[static_cast<std::size_t>(io)] + e)] -
                  avg[static_cast<std::size_t>(io)][static_cast<std::size_t>(qs - lmin)]
                     [static_cast<std::size_t>(c * sdim[static_cast<std::size_t>(io)] + e)];
              lam += diff * W[static_cast<std::size_t>(p2)][static_cast<std::size_t>(e)];
            }
          }
          bracket += lam * (meas / pw);
        }
      }
    }
    // top-scale remainder with the original arrangement
    {
      std::vector<cxvec> profs;
      std::vector<const cxvec*> profp;
      for (int l = 1; l <= n; ++l) profs.push_back(profile_of(l - 1, lmax));
      for (const auto& p : profs) profp.push_back(&p);
      const std::vector<cxvec> W = profile_sums(0, profp);
      const cxvec top = profile_of(n, lmax);
      cx rem{0.0, 0.0};
      for (std::size_t i = 0; i < act.size(); ++i)
        for (int e = 0; e < sdim[static_cast<std::size_t>(n)]; ++e)
          rem += top[i * static_cast<std::size_t>(sdim[static_cast<std::size_t>(n)]) +
                     static_cast<std::size_t>(e)] *
                 W[i][static_cast<std::size_t>(e)];
      bracket += rem * meas;
    }
    accum += bracket;
  }
  res.averaged = accum / static_cast<double>(trans.size());
  return res;
}

// ---------------------------------------------------------------------------
// Oscillation norm of a coefficient sequence

double bmo_norm(const Grid& g, const std::map<HaarIndex, MultilinearOp>& seq,
                double p, int sign_cutoff, std::uint64_t seed) {
  if (seq.empty()) return 0.0;
  if (!(p >= 1.0))
    throw std::invalid_argument("bmo_norm: p must be at least 1");
  if (sign_cutoff < 0)
    throw std::invalid_argument("bmo_norm: sign cutoff must be nonnegative");
  for (const auto& [key, op] : seq) g.require(key.cube);

  double best = 0.0;
  if (p == 2.0) {
    for (const Cube& q0 : g.all_cubes()) {
      double sum = 0.0;
      for (const auto& [key, op] : seq)
        if (g.contains(q0, key.cube)) sum += op.frob() * op.frob();
      best = std::max(best, std::sqrt(sum / g.measure(q0)));
    }
    return best;
  }

  Rng base(seed);
  std::uint64_t q0_index = 0;
  for (const Cube& q0 : g.all_cubes()) {
    ++q0_index;
    struct Entry {
      const HaarIndex* key;
      const cxvec* tensor;
    };
    std::vector<Entry> inside;
    std::size_t width = 0;
    for (const auto& [key, op] : seq)
      if (g.contains(q0, key.cube)) {
        inside.push_back({&key, &op.tensor()});
        width = std::max(width, op.tensor().size());
      }
    if (inside.empty()) continue;
    const int kk = static_cast<int>(inside.size());
    const std::vector<i64> q0cells = g.cells_of(q0);
    // per-entry Haar value on every cell of the base cube
    std::vector<std::vector<double>> hv(inside.size());
    for (std::size_t i = 0; i < inside.size(); ++i) {
      hv[i].resize(q0cells.size());
      for (std::size_t ci = 0; ci < q0cells.size(); ++ci)
        hv[i][ci] = haar_cell_value(g, inside[i].key->cube, inside[i].key->eta,
                                    q0cells[ci]);
    }
    const bool enumerate = kk <= sign_cutoff;
    const i64 masks = enumerate ? (i64{1} << kk) : 2048;
    Rng rng = base.fork(q0_index);
    double mean = 0.0;
    cxvec v(width);
    for (i64 ms = 0; ms < masks; ++ms) {
      std::uint64_t bits =
          enumerate ? static_cast<std::uint64_t>(ms) : rng.u64();
      double integral = 0.0;
      for (std::size_t ci = 0; ci < q0cells.size(); ++ci) {
        std::fill(v.begin(), v.end(), cx{0.0, 0.0});
        for (std::size_t i = 0; i < inside.size(); ++i) {
          const double sign = (bits >> i) & 1 ? -1.0 : 1.0;
          const double w = sign * hv[i][ci];
          if (w == 0.0) continue;
          const cxvec& tsr = *inside[i].tensor;
          for (std::size_t e = 0; e < tsr.size(); ++e) v[e] += w * tsr[e];
        }
        double nrm2 = 0.0;
        for (const cx& z : v) nrm2 += std::norm(z);
        integral += std::pow(std::sqrt(nrm2), p) * g.cell_measure();
      }
      mean += integral / static_cast<double>(masks);
    }
    best = std::max(best, std::pow(mean / g.measure(q0), 1.0 / p));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Randomized kernel-constant estimates

CzEstimates cz_constants(const SIOForm& T, const Grid& g, int budget,
                         std::uint64_t seed, const Contraction* varpi) {
  const KernelSpec& k = T.kernel;
  const int n = k.arity();
  const int d = g.dim();
  if (n >= 3 && varpi == nullptr)
    throw std::invalid_argument(
        "cz_constants: families with three or more inputs need a contraction");
  if (budget < 1)
    throw std::invalid_argument("cz_constants: budget must be positive");

  const auto centers = cell_centers(g);
  const i64 cells = g.cell_count();
  const i64 block_check = [&] {
    i64 b = k.out.dim();
    for (const auto& s : k.ins) b *= s.dim();
    return b;
  }();
  const auto eval_checked = [&](const std::vector<double>& x,
                                const std::vector<std::vector<double>>& y) {
    MultilinearOp v = k.eval(x, y);
    if (!v.is_dense() || static_cast<i64>(v.tensor().size()) != block_check)
      throw std::invalid_argument(
          "kernel evaluator returned a value of the wrong shape");
    return v;
  };
  const auto dist = [&](const std::vector<double>& a,
                        const std::vector<double>& b) {
    if (d == 1) return std::abs(a[0] - b[0]);
    double s = 0.0;
    for (int ax = 0; ax < d; ++ax) {
      const double t = a[static_cast<std::size_t>(ax)] - b[static_cast<std::size_t>(ax)];
      s += t * t;
    }
    return std::sqrt(s);
  };

  Rng rng(seed);
  std::vector<MultilinearOp> size_fam, holder_fam;
  for (int b = 0; b < budget; ++b) {
    std::vector<double> x;
    std::vector<std::vector<double>> y;
    double spread = 0.0;
    for (;;) {
      const i64 cx0 =
          static_cast<i64>(rng.below(static_cast<std::uint64_t>(cells)));
      x = centers[static_cast<std::size_t>(cx0)];
      y.clear();
      bool alleq = true;
      for (int m = 0; m < n; ++m) {
        const i64 cy =
            static_cast<i64>(rng.below(static_cast<std::uint64_t>(cells)));
        y.push_back(centers[static_cast<std::size_t>(cy)]);
        alleq = alleq && cy == cx0;
      }
      if (alleq) continue;
      spread = 0.0;
      for (int m = 0; m < n; ++m) spread += dist(x, y[static_cast<std::size_t>(m)]);
      if (spread > 0.0) break;
    }
    const MultilinearOp K = eval_checked(x, y);
    size_fam.push_back(
        K.scaled(std::pow(spread, static_cast<double>(d * n))));

    double maxd = 0.0;
    for (int m = 0; m < n; ++m)
      maxd = std::max(maxd, dist(x, y[static_cast<std::size_t>(m)]));
    for (int j = 0; j <= n; ++j) {
      std::vector<double> delta(static_cast<std::size_t>(d));
      double nrm = 0.0;
      do {
        nrm = 0.0;
        for (int a = 0; a < d; ++a) {
          delta[static_cast<std::size_t>(a)] = rng.normal();
          nrm += delta[static_cast<std::size_t>(a)] * delta[static_cast<std::size_t>(a)];
        }
        nrm = std::sqrt(nrm);
      } while (nrm == 0.0);
      const double mag = (0.25 + 0.75 * rng.unit()) * 0.5 * maxd;
      for (int a = 0; a < d; ++a)
        delta[static_cast<std::size_t>(a)] *= mag / nrm;
      auto x2 = x;
      auto y2 = y;
      if (j == 0)
        for (int a = 0; a < d; ++a) x2[static_cast<std::size_t>(a)] += delta[static_cast<std::size_t>(a)];
      else
        for (int a = 0; a < d; ++a)
          y2[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(a)] +=
              delta[static_cast<std::size_t>(a)];
      MultilinearOp diff = eval_checked(x, y);
      diff.add_scaled(eval_checked(x2, y2), cx{-1.0, 0.0});
      holder_fam.push_back(
          diff.scaled(std::pow(spread, static_cast<double>(d * n) + k.alpha) /
                      std::pow(mag, k.alpha)));
    }
  }
  std::vector<MultilinearOp> whole = size_fam;
  whole.insert(whole.end(), holder_fam.begin(), holder_fam.end());

  // localized unit-profile pairings, one per cube
  std::vector<MultilinearOp> weak_fam;
  const std::vector<i64> emap0 = entry_map(block_dims(k), 0);
  for (const Cube& q : g.all_cubes()) {
    CellTable tab;
    tab.grid = &g;
    tab.kernel = &k;
    tab.rho = T.rho;
    tab.xs = g.cells_of(q);
    tab.ys.assign(static_cast<std::size_t>(n), tab.xs);
    tab.centers = &centers;
    build_table(tab);
    const WList ones = unit_list(tab.xs.size());
    std::vector<const WList*> yw(static_cast<std::size_t>(n), &ones);
    cxvec v = pair_weighted(tab, 0, emap0, yw, ones);
    for (cx& z : v) z /= g.measure(q);
    weak_fam.push_back(MultilinearOp::dense(k.ins, k.out, std::move(v)));
  }

  SearchOptions so;
  so.rounds = 200 + 8 * budget;
  so.seed = seed ^ 0x517cc1b727220a95ull;

  CzEstimates est;
  est.size_bound = r_bound_max(size_fam, varpi, so);
  est.holder_bound = r_bound_max(holder_fam, varpi, so);
  est.kernel_bound = r_bound_max(whole, varpi, so);
  est.weak_bound = r_bound_max(weak_fam, varpi, so);
  for (int m = 0; m <= n; ++m)
    est.bmo.push_back(bmo_norm(g, full_t1_sequence(T, g, m)));
  return est;
}

}  // namespace dycalc
