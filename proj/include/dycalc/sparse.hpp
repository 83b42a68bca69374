#pragma once

#include "dycalc/haar.hpp"

#include <map>
#include <vector>

namespace dycalc {

// A collection of cubes together with a sparseness parameter and, when
// verified, disjoint witness cell sets covering an eta fraction of each cube.
struct SparseCollection {
  std::vector<Cube> cubes;  // unique, sorted
  double eta = 0;
  std::map<Cube, std::vector<i64>> witnesses;
};

// Stopping-time localization of an input tuple below a base cube.  Each node
// selects the maximal subcubes on which some input average jumps past 2n
// times its average on the node; the selected children of a node cover at
// most half of it.
struct StoppingTree {
  struct Node {
    Cube cube;
    int parent = -1;            // index into nodes, -1 at the root
    std::vector<int> children;  // indices into nodes
  };

  const Grid* grid = nullptr;
  std::vector<Node> nodes;  // node 0 is the base cube; parents precede children
  // blocks[m][i]: input m localized to node i -- the child average on each
  // selected child, the input itself elsewhere on the node, zero outside.
  std::vector<std::vector<GridFunction>> blocks;

  // exact member lookup (-1 when absent)
  int find(const Cube& q) const;
  // minimal member containing q (-1 when q is not below the base cube)
  int locate(const Cube& q) const;
  SparseCollection collection() const;
};

StoppingTree build_stopping(const std::vector<GridFunction>& fs,
                            const Cube& q0);

// One scalar function per node: supported on the node, mean zero, constant
// on each selected child, random elsewhere.  Distinct pieces are orthogonal.
std::vector<GridFunction> adapted_family(const StoppingTree& tree, Rng& rng);

struct SparseCheck {
  bool ok = false;
  std::map<Cube, std::vector<i64>> witnesses;
};

// Greedy witness construction: each cube keeps the cells not covered by
// finer members.  Succeeds when every cube keeps an eta fraction.
SparseCheck verify_sparse(const Grid& g, const std::vector<Cube>& cubes,
                          double eta);

// sum over the collection of |Q| times the product of the average codomain
// norms of the inputs on Q
double sparse_form(const Grid& g, const std::vector<Cube>& cubes,
                   const std::vector<GridFunction>& fs);

// Split at threshold lambda^(1/ell): the clamped part keeps the function
// away from the maximal cubes whose average norm exceeds the threshold and
// carries their averages there; the oscillating part has zero mean on each
// selected cube.
struct CzDecomposition {
  GridFunction good;
  GridFunction bad;
  std::vector<Cube> cubes;  // maximal cubes over the threshold, sorted
};

CzDecomposition cz_decompose(const GridFunction& f, double lambda,
                             double ell = 1.0);

// Builds a sparse collection below `top` dominating the maximal tuple norm
// over `family` pointwise: the norm of the averages over family cubes
// containing x is at most 2^l B times the sum over selected cubes containing
// x of the product of average input norms.  The factor 2^l B must be at
// least one for the bound to close at the selected cubes themselves.
SparseCollection sparse_dominate_rmf(const std::vector<GridFunction>& fs,
                                     const Cube& top,
                                     const std::vector<Cube>& family,
                                     double weak_constant,
                                     const Contraction& varpi,
                                     const std::vector<int>& J, int v);

struct DominationCheck {
  double worst = 0;   // largest ratio of maximal value to sparse bound
  bool exact = true;  // every norm evaluation took the closed-form path
  bool holds = false;
};

// Evaluates both sides of the domination inequality at every finest cell.
DominationCheck check_rm_domination(const std::vector<GridFunction>& fs,
                                    const Cube& top,
                                    const std::vector<Cube>& family,
                                    const SparseCollection& sc,
                                    double weak_constant,
                                    const Contraction& varpi,
                                    const std::vector<int>& J, int v);

}  // namespace dycalc
