#include "dycalc/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <stdexcept>

namespace dycalc {
namespace {

bool matches(const Grid& g, const Grid& h) {
  return g.dim() == h.dim() && g.window().lmin == h.window().lmin &&
         g.window().lmax == h.window().lmax && g.shift() == h.shift() &&
         g.roots() == h.roots();
}

void require_same_grid(const std::vector<GridFunction>& fs) {
  if (fs.empty()) throw std::invalid_argument("empty function tuple");
  for (const auto& f : fs)
    if (!matches(fs[0].grid(), f.grid()))
      throw std::invalid_argument("functions live on different grids");
}

i64 cube_cells(const Grid& g, const Cube& q) {
  i64 n = 1;
  for (int a = 0; a < g.dim(); ++a) n *= g.side_cells(q.scale);
  return n;
}

// per-cube sums of the codomain norm over cells, built fine-to-coarse
std::map<Cube, double> abs_sums(const GridFunction& f) {
  const Grid& g = f.grid();
  std::map<Cube, double> sums;
  for (int s = g.window().lmin; s <= g.window().lmax; ++s) {
    for (const Cube& q : g.cubes(s)) {
      if (s == g.window().lmin) {
        sums[q] = f.space().norm(f.at(g.cell_index(q.pos)));
      } else {
        double total = 0;
        for (const Cube& c : g.children(q)) total += sums[c];
        sums[q] = total;
      }
    }
  }
  return sums;
}

double abs_avg(const std::map<Cube, double>& sums, const Grid& g,
               const Cube& q) {
  return sums.at(q) / static_cast<double>(cube_cells(g, q));
}

}  // namespace

int StoppingTree::find(const Cube& q) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].cube == q) return static_cast<int>(i);
  return -1;
}

int StoppingTree::locate(const Cube& q) const {
  if (!grid || !grid->in_grid(q)) return -1;
  Cube cur = q;
  while (true) {
    int idx = find(cur);
    if (idx >= 0) return idx;
    if (cur.scale >= nodes[0].cube.scale) return -1;
    cur = grid->parent(cur);
  }
}

SparseCollection StoppingTree::collection() const {
  SparseCollection sc;
  for (const auto& node : nodes) sc.cubes.push_back(node.cube);
  std::sort(sc.cubes.begin(), sc.cubes.end());
  sc.eta = 0.5;
  return sc;
}

StoppingTree build_stopping(const std::vector<GridFunction>& fs,
                            const Cube& q0) {
  require_same_grid(fs);
  const Grid& g = fs[0].grid();
  g.require(q0);

  // supports must sit inside the base cube
  std::vector<char> inside(static_cast<std::size_t>(g.cell_count()), 0);
  g.for_each_cell(q0, [&](i64 c) { inside[static_cast<std::size_t>(c)] = 1; });
  for (const auto& f : fs)
    for (i64 c = 0; c < g.cell_count(); ++c)
      if (!inside[static_cast<std::size_t>(c)] && f.space().norm(f.at(c)) != 0.0)
        throw std::invalid_argument("function support leaks out of the base cube");

  const int n = static_cast<int>(fs.size());
  std::vector<std::map<Cube, double>> sums;
  sums.reserve(fs.size());
  for (const auto& f : fs) sums.push_back(abs_sums(f));

  StoppingTree tree;
  tree.grid = &g;

  // depth-first construction; a child is selected when, for some input, the
  // cross-multiplied average comparison exceeds 2n times the node average
  std::function<void(const Cube&, int)> grow = [&](const Cube& s, int parent) {
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({s, parent, {}});
    if (parent >= 0) tree.nodes[parent].children.push_back(self);

    const double ncells_s = static_cast<double>(cube_cells(g, s));
    for (int m = 0; m < n; ++m)
      if (sums[m].at(s) == 0.0) return;  // zero average: recursion stops

    std::function<void(const Cube&)> scan = [&](const Cube& q) {
      const double ncells_q = static_cast<double>(cube_cells(g, q));
      bool trigger = false;
      for (int m = 0; m < n && !trigger; ++m)
        trigger = sums[m].at(q) * ncells_s >
                  2.0 * n * sums[m].at(s) * ncells_q;
      if (trigger) {
        grow(q, self);
        return;
      }
      if (q.scale > g.window().lmin)
        for (const Cube& c : g.children(q)) scan(c);
    };
    if (s.scale > g.window().lmin)
      for (const Cube& c : g.children(s)) scan(c);
  };
  grow(q0, -1);

  // localized parts
  tree.blocks.assign(fs.size(), {});
  for (int m = 0; m < n; ++m) {
    tree.blocks[m].reserve(tree.nodes.size());
    for (const auto& node : tree.nodes) {
      GridFunction blk(g, fs[m].space());
      g.for_each_cell(node.cube, [&](i64 c) {
        for (int j = 0; j < fs[m].space().dim(); ++j)
          blk.at(c)[j] = fs[m].at(c)[j];
      });
      for (int cidx : node.children) {
        const Cube& cq = tree.nodes[cidx].cube;
        const cxvec avg = average(fs[m], cq);
        g.for_each_cell(cq, [&](i64 c) {
          for (int j = 0; j < fs[m].space().dim(); ++j) blk.at(c)[j] = avg[j];
        });
      }
      tree.blocks[m].push_back(std::move(blk));
    }
  }
  return tree;
}

std::vector<GridFunction> adapted_family(const StoppingTree& tree, Rng& rng) {
  if (!tree.grid) throw std::invalid_argument("empty stopping tree");
  const Grid& g = *tree.grid;
  std::vector<GridFunction> out;
  out.reserve(tree.nodes.size());
  for (const auto& node : tree.nodes) {
    GridFunction piece(g, Space::scalar());
    // one constant per selected child, then independent cell values
    for (int cidx : node.children) {
      const cx value = rng.cnormal();
      g.for_each_cell(tree.nodes[cidx].cube,
                      [&](i64 c) { piece.at(c)[0] = value; });
    }
    std::vector<char> owned(static_cast<std::size_t>(g.cell_count()), 0);
    for (int cidx : node.children)
      g.for_each_cell(tree.nodes[cidx].cube,
                      [&](i64 c) { owned[static_cast<std::size_t>(c)] = 1; });
    g.for_each_cell(node.cube, [&](i64 c) {
      if (!owned[static_cast<std::size_t>(c)]) piece.at(c)[0] = rng.cnormal();
    });
    // subtract the node mean so the piece integrates to zero
    cx mean{0.0, 0.0};
    g.for_each_cell(node.cube, [&](i64 c) { mean += piece.at(c)[0]; });
    mean /= static_cast<double>(cube_cells(g, node.cube));
    g.for_each_cell(node.cube, [&](i64 c) { piece.at(c)[0] -= mean; });
    out.push_back(std::move(piece));
  }
  return out;
}

SparseCheck verify_sparse(const Grid& g, const std::vector<Cube>& cubes,
                          double eta) {
  if (!(eta > 0.0) || !(eta < 1.0))
    throw std::invalid_argument("sparseness parameter must lie in (0,1)");
  std::set<Cube> members(cubes.begin(), cubes.end());
  for (const Cube& q : members) g.require(q);

  SparseCheck check;
  check.ok = true;
  for (const Cube& q : members) {
    std::vector<char> covered(static_cast<std::size_t>(cube_cells(g, q)), 0);
    std::vector<i64> cells = g.cells_of(q);
    std::map<i64, std::size_t> slot;
    for (std::size_t i = 0; i < cells.size(); ++i) slot[cells[i]] = i;
    for (const Cube& finer : members) {
      if (finer == q || !g.contains(q, finer)) continue;
      g.for_each_cell(finer, [&](i64 c) { covered[slot.at(c)] = 1; });
    }
    std::vector<i64> witness;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (!covered[i]) witness.push_back(cells[i]);
    if (static_cast<double>(witness.size()) <
        eta * static_cast<double>(cells.size()))
      check.ok = false;
    check.witnesses[q] = std::move(witness);
  }
  return check;
}

double sparse_form(const Grid& g, const std::vector<Cube>& cubes,
                   const std::vector<GridFunction>& fs) {
  require_same_grid(fs);
  if (!matches(g, fs[0].grid()))
    throw std::invalid_argument("grid mismatch");
  std::set<Cube> members(cubes.begin(), cubes.end());
  std::vector<std::map<Cube, double>> sums;
  for (const auto& f : fs) sums.push_back(abs_sums(f));
  double total = 0;
  for (const Cube& q : members) {
    g.require(q);
    double term = g.measure(q);
    for (std::size_t m = 0; m < fs.size(); ++m)
      term *= abs_avg(sums[m], g, q);
    total += term;
  }
  return total;
}

CzDecomposition cz_decompose(const GridFunction& f, double lambda,
                             double ell) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("threshold parameter must be positive");
  if (!(ell > 0.0) || !std::isfinite(ell))
    throw std::invalid_argument("exponent count must be positive");
  const Grid& g = f.grid();
  const double t = std::pow(lambda, 1.0 / ell);
  const auto sums = abs_sums(f);

  std::vector<Cube> selected;
  std::function<void(const Cube&)> scan = [&](const Cube& q) {
    if (abs_avg(sums, g, q) > t) {
      selected.push_back(q);
      return;
    }
    if (q.scale > g.window().lmin)
      for (const Cube& c : g.children(q)) scan(c);
  };
  for (const Cube& root : g.cubes(g.window().lmax)) scan(root);
  std::sort(selected.begin(), selected.end());

  CzDecomposition dec{f, GridFunction(g, f.space()), selected};
  for (const Cube& q : selected) {
    const cxvec avg = average(f, q);
    g.for_each_cell(q, [&](i64 c) {
      for (int j = 0; j < f.space().dim(); ++j) {
        dec.good.at(c)[j] = avg[j];
        dec.bad.at(c)[j] = f.at(c)[j] - avg[j];
      }
    });
  }
  return dec;
}

namespace {

// shared validation for the domination routines; returns the tuple size
int validate_rm_args(const std::vector<GridFunction>& fs, const Grid& g,
                     const Cube& top, const std::vector<Cube>& family,
                     double weak_constant, const Contraction& varpi,
                     const std::vector<int>& J, int v) {
  require_same_grid(fs);
  g.require(top);
  const int slots = varpi.slots();
  const int ell = static_cast<int>(J.size());
  if (ell < 1) throw std::invalid_argument("empty tuple index set");
  std::set<int> seen(J.begin(), J.end());
  if (static_cast<int>(seen.size()) != ell)
    throw std::invalid_argument("repeated tuple index");
  for (int j : J)
    if (j < 0 || j >= slots) throw std::invalid_argument("tuple index range");
  if (v < 0 || v >= slots || seen.count(v))
    throw std::invalid_argument("distinguished slot invalid");
  if (slots - ell - 1 < 2)
    throw std::invalid_argument("fewer than two free slots");
  if (static_cast<int>(fs.size()) != ell)
    throw std::invalid_argument("tuple size mismatch");
  for (int i = 0; i < ell; ++i)
    if (!(fs[i].space() == varpi.spaces()[J[i]]))
      throw std::invalid_argument("tuple space mismatch");
  if (!(weak_constant > 0.0))
    throw std::invalid_argument("weak-type constant must be positive");
  if (std::exp2(ell) * weak_constant < 1.0)
    throw std::invalid_argument("weak-type constant too small to close");
  for (const Cube& q : family) {
    g.require(q);
    if (!g.contains(top, q))
      throw std::invalid_argument("family cube outside the base cube");
  }
  return ell;
}

}  // namespace

SparseCollection sparse_dominate_rmf(const std::vector<GridFunction>& fs,
                                     const Cube& top,
                                     const std::vector<Cube>& family,
                                     double weak_constant,
                                     const Contraction& varpi,
                                     const std::vector<int>& J, int v) {
  const Grid& g = fs.empty() ? throw std::invalid_argument("empty tuple")
                             : fs[0].grid();
  const int ell =
      validate_rm_args(fs, g, top, family, weak_constant, varpi, J, v);
  const std::set<Cube> fam(family.begin(), family.end());

  std::vector<std::map<Cube, double>> sums;
  for (const auto& f : fs) sums.push_back(abs_sums(f));

  auto tuple_at = [&](const Cube& q) {
    std::vector<cxvec> tup;
    tup.reserve(fs.size());
    for (const auto& f : fs) tup.push_back(average(f, q));
    return tup;
  };

  std::set<Cube> out;
  std::function<void(const Cube&)> level = [&](const Cube& s) {
    out.insert(s);
    double thr = std::exp2(ell) * weak_constant;
    for (std::size_t m = 0; m < fs.size(); ++m) thr *= abs_avg(sums[m], g, s);

    // running list of family members on the current root-to-cube path
    std::vector<std::vector<cxvec>> chain;
    if (fam.count(s)) chain.push_back(tuple_at(s));
    std::function<void(const Cube&)> descend = [&](const Cube& q) {
      const bool member = fam.count(q) > 0;
      if (member) chain.push_back(tuple_at(q));
      const double value =
          chain.empty() ? 0.0 : rm_norm(varpi, chain, J, v).value;
      if (value > thr) {
        level(q);
      } else if (q.scale > g.window().lmin) {
        for (const Cube& c : g.children(q)) descend(c);
      }
      if (member) chain.pop_back();
    };
    if (s.scale > g.window().lmin)
      for (const Cube& c : g.children(s)) descend(c);
  };
  level(top);

  SparseCollection sc;
  sc.cubes.assign(out.begin(), out.end());
  sc.eta = 0.5;
  return sc;
}

DominationCheck check_rm_domination(const std::vector<GridFunction>& fs,
                                    const Cube& top,
                                    const std::vector<Cube>& family,
                                    const SparseCollection& sc,
                                    double weak_constant,
                                    const Contraction& varpi,
                                    const std::vector<int>& J, int v) {
  const Grid& g = fs.empty() ? throw std::invalid_argument("empty tuple")
                             : fs[0].grid();
  const int ell =
      validate_rm_args(fs, g, top, family, weak_constant, varpi, J, v);
  const std::set<Cube> fam(family.begin(), family.end());

  std::vector<std::map<Cube, double>> sums;
  for (const auto& f : fs) sums.push_back(abs_sums(f));

  // per sparse cube: 2^l B times the product of average norms
  std::vector<std::pair<Cube, double>> terms;
  for (const Cube& q : sc.cubes) {
    g.require(q);
    double t = std::exp2(ell) * weak_constant;
    for (std::size_t m = 0; m < fs.size(); ++m) t *= abs_avg(sums[m], g, q);
    terms.emplace_back(q, t);
  }

  DominationCheck rep;
  rep.holds = true;
  std::vector<i64> cells = g.cells_of(top);
  for (i64 c : cells) {
    // collect family members on the ancestor path
    std::vector<std::vector<cxvec>> chain;
    Cube cur = g.cell_cube(c);
    while (true) {
      if (fam.count(cur)) {
        std::vector<cxvec> tup;
        for (const auto& f : fs) tup.push_back(average(f, cur));
        chain.push_back(std::move(tup));
      }
      if (cur == top) break;
      cur = g.parent(cur);
    }
    double lhs = 0.0;
    if (!chain.empty()) {
      auto r = rm_norm(varpi, chain, J, v);
      lhs = r.value;
      rep.exact = rep.exact && r.exact;
    }
    double rhs = 0.0;
    for (const auto& [q, t] : terms)
      if (g.contains(q, g.cell_cube(c))) rhs += t;
    if (lhs == 0.0) continue;
    if (rhs == 0.0) {
      rep.holds = false;
      rep.worst = std::numeric_limits<double>::infinity();
      continue;
    }
    rep.worst = std::max(rep.worst, lhs / rhs);
  }
  rep.holds = rep.holds && rep.worst <= 1.0 + 1e-12;
  return rep;
}

}  // namespace dycalc
