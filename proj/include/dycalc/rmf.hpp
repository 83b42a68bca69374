// Maximal functions built from a contraction norm on tuples of cube
// averages: the tuple-slot maximal function, the classic single-function
// variants, and a seeded lower-bound search for the associated Lebesgue
// mapping ratio.
#pragma once

#include "dycalc/haar.hpp"

#include <vector>

namespace dycalc {

// Which slots of the contraction receive the running tuple of averages and
// which slot carries the fixed vector; the remaining slots (at least two)
// are contracted at a Rademacher-type norm.  J lists distinct 0-based slot
// indices; v is a slot outside J.  When exponents is nonempty it gives one
// Lebesgue exponent per member of J for the mapping-ratio search.
struct RMConfig {
  Contraction varpi = Contraction::product_of_scalars(4);
  std::vector<int> J = {0};
  int v = 1;
  std::vector<double> exponents;
  RmOptions options;
};

struct MaximalResult {
  GridFunction values;  // scalar-valued, one number per finest cell
  bool exact = false;   // closed form used on every chain
};

// At each finest cell: the tuple norm of the family of average tuples
// (<f_1>_Q, ..., <f_k>_Q) over all cubes Q containing the cell.  Scalar
// product contractions evaluate in closed form; otherwise the tuple norm of
// the full chain is estimated at each cell and the flag is cleared.
MaximalResult rm_maximal(const std::vector<GridFunction>& fs,
                         const RMConfig& cfg);

// Classic maximal function of one codomain-valued f: at each cell, the
// supremum over square-summable scalings of the chain of averages of the
// randomized-sum norm with the given exponent (power 1 or 2).  Scalar and
// inner-product codomains reduce exactly to the sup of average norms along
// the chain for both powers (one-point scalings attain the mean-square
// upper bound); other codomains search scalings and report a certified
// lower bound.
MaximalResult classic_mr(const GridFunction& f, int power = 2,
                         int rounds = 48, std::uint64_t seed = 1);

struct LpEstimate {
  double value = 0;        // best ratio found
  double p_out = 0;        // output exponent, 1/p_out = sum of 1/p_j
  int witness_trial = -1;  // trial achieving the best ratio
  bool exact_path = true;  // every numerator used the closed form
};

// Seeded search for a lower bound on the mapping constant of rm_maximal
// from the product of L^{p_j} spaces to L^{p_out}: the best over trials of
// ||rm_maximal(fs)||_{p_out} / prod_j ||f_j||_{p_j}.  Trial 0 always tests
// constants; with a fixed seed the sequence of trials is a prefix, so the
// result is nondecreasing in the trial count.
LpEstimate rmf_lp_estimate(const Grid& g, const RMConfig& cfg, int trials,
                           std::uint64_t seed);

}  // namespace dycalc
