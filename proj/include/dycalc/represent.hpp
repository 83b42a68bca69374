// Quadrature forms driven by off-diagonal kernels, and their exact expansion
// into dyadic model operators: a kernel evaluated at cell-center tuples
// defines a multilinear form on grid functions; the expansion rewrites that
// form as a sum of finitely supported shifts, one paraproduct per transposed
// slot, and an explicit top-scale remainder, with every coefficient obtained
// by pairing the form against Haar atoms.  Also provides goodness-weighted
// translation averaging and sampled estimates of kernel regularity constants.
#pragma once

#include "dycalc/model_ops.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace dycalc {

// A kernel value is a multilinear operator between the argument codomains;
// the first point is the output variable, the rest feed the input slots.
// The evaluator is only ever invoked at tuples of points that do not all lie
// in one finest-scale cell, so it may be singular on the full diagonal; it
// must tolerate partial coincidences between its points.
struct KernelSpec {
  using Evaluator = std::function<MultilinearOp(
      const std::vector<double>& x, const std::vector<std::vector<double>>& y)>;

  // Validates: at least one input, alpha in (0, 1], no weighted codomains.
  KernelSpec(std::vector<Space> ins, Space out, double alpha, Evaluator eval);

  int arity() const { return static_cast<int>(ins.size()); }

  std::vector<Space> ins;
  Space out;
  double alpha;  // regularity exponent used by classification and weights
  Evaluator eval;
};

// Scalar kernel with n input slots.
KernelSpec scalar_kernel(
    int n, double alpha,
    std::function<cx(const std::vector<double>& x,
                     const std::vector<std::vector<double>>& y)> k);

// A kernel together with the quadrature refinement: each kernel table entry
// is the mean of the evaluator over rho subcell centers per axis and point.
// Cell tuples whose points all share one cell contribute nothing at any rho.
struct SIOForm {
  explicit SIOForm(KernelSpec kernel, int rho = 1);

  KernelSpec kernel;
  int rho;
};

// <T(f_1, ..., f_n), f_{n+1}> by cell-center quadrature over the grid the
// arguments live on.  Argument codomains must equal the kernel spaces, with
// the last argument in the kernel's output space (paired flat).
cx direct_form(const SIOForm& T, const std::vector<GridFunction>& fs);

// The form with input slot m (1-based) exchanged against the output: the
// kernel arguments swap and the operator values transpose, so that
// direct_form(adjoint(T, m), adjoint_arguments(fs, m)) == direct_form(T, fs).
// Coefficient spaces follow the plugged-in tuple: the output codomain moves
// into slot m and slot m's codomain becomes the output.
SIOForm adjoint(const SIOForm& T, int m);

// Argument tuple for the m-th adjoint form, m in 0..n: for m = 0 the tuple is
// returned unchanged; for m >= 1 the last argument moves into slot m and the
// displaced one becomes the pairing partner.
std::vector<GridFunction> adjoint_arguments(const std::vector<GridFunction>& fs,
                                            int m);

// A rectangle of factor cubes feeding the input slots: slots 1..split sit at
// the top scale, slots split+1..n one scale below; the Haar factor at slot
// `split` is the sign-alternating one.
struct ScaleRect {
  std::vector<Cube> factors;
  int split;
};

enum class PairClass { Separated, Nearby, Inside, Diagonal };

// Places one (cube, rectangle) pair: Separated when the largest slot distance
// beats ell(Q)^gamma * (ell(R)/2)^(1-gamma), Nearby when some factor misses
// the cube, Inside when the rectangle is strictly coarser (its factors are
// then ancestors of the cube), Diagonal at equal scales.  The rectangle must
// not be finer than the cube.
PairClass classify_pair(const Grid& g, const Cube& q, const ScaleRect& rect,
                        double gamma, int r);

// <T(h_{R_1}, ..., h_{R_n}), h_out> where the factor at the split slot
// carries signature eta, the other factors carry the mean signature, and the
// output atom is h_out.  Returns the coefficient as an operator between the
// kernel spaces.
MultilinearOp haar_pairing(const SIOForm& T, const Grid& g,
                           const ScaleRect& rect, int eta,
                           const HaarIndex& out);

// <T(phi_1, ..., phi_n), phi_q> computed by splitting every input between the
// box of side C * ell(q) around the cube center and its complement, with far
// contributions paired against the kernel's oscillation about the center.
// The value does not depend on C; C must be at least 2 * sqrt(dim).  phi_q
// must be supported on q with exact mean zero.
MultilinearOp t1_pairing(const SIOForm& T, const std::vector<GridFunction>& phis,
                         const GridFunction& phi_q, const Cube& q, double C);

// All coefficients <T^(m)(1, ..., 1), h_Q^eta> of the m-th transposed form
// against unit profiles, one per sign-alternating atom of the grid.
std::map<HaarIndex, MultilinearOp> full_t1_sequence(const SIOForm& T,
                                                    const Grid& g, int m);

// Classification exponent used when nothing else is requested.
double default_gamma(int n, int dim, double alpha);

enum class TermOrigin { Separated, Nearby, Error, DiagonalMixed, DiagonalAligned };

// One finitely supported shift produced by the expansion, tagged with the
// transposed slot it pairs through (0 = plain form), the sign-alternating
// input slot, where its coefficients came from, and the scale-depth weight
// exp2(-alpha * max(complexity) / 2) its family is normalized against.  The
// weight is bookkeeping only: reconstruction sums the specs as they are.
struct ShiftTerm {
  int adjoint;
  int slot;
  TermOrigin origin;
  double weight;
  ShiftSpec spec;
};

struct Decomposition {
  double alpha = 0;
  double gamma = 0;
  int r = 0;
  std::vector<ShiftTerm> terms;
  std::vector<ParaproductSpec> paraproducts;  // one per transposed slot, 0..n
  MultilinearOp remainder;  // pairs the top-cube averages of all arguments
  double residual = 0;      // worst reconstruction error over check tuples
};

struct DecomposeOptions {
  int check_tuples = 2;
  std::uint64_t seed = 1;
};

// Expands the form exactly over the grid's finite scale window.  Requires a
// single top cube and a window of at least r + 1 scales.  The identity
//   direct_form(T, fs) = sum of shift forms over terms (via the transposed
//   argument tuples) + sum of paraproduct forms + remainder on top averages
// holds for every argument tuple; `residual` records it on sampled tuples.
Decomposition decompose(const SIOForm& T, const Grid& g, double gamma, int r,
                        const DecomposeOptions& opt = {});

struct ReconstructionCheck {
  cx direct{0, 0};
  cx reconstructed{0, 0};
  double residual = 0;
};

// Evaluates both sides of the expansion identity on one argument tuple.
ReconstructionCheck verify_decomposition(const Decomposition& dec,
                                         const SIOForm& T,
                                         const std::vector<GridFunction>& fs);

struct OmegaAverage {
  cx direct{0, 0};
  cx averaged{0, 0};
  std::vector<double> scale_probability;  // per scale, finest first
  int omegas = 0;
  bool enumerated = false;
};

// Averages the good-cube part of the expansion bracket over lattice
// translations: per translation the arguments and the kernel stay pinned to
// physical space, cancellative cubes enter only when good, and each level is
// reweighted by the exact probability that a cube of its scale is good.  The
// mean over all translations (or a sample of them) matches direct_form when
// the argument supports keep the required margin from the sliding box edges.
// Requires an unshifted grid; enumeration needs at most 12 translation bits.
OmegaAverage average_over_omega(const SIOForm& T,
                                const std::vector<GridFunction>& fs,
                                double gamma, int r, bool enumerate_mode,
                                int samples, std::uint64_t seed);

// sup over base cubes of the p-th mean oscillation of the atom expansion of
// a coefficient sequence; p = 2 uses the closed square-sum form, other p
// enumerate signs exactly up to the cutoff and sample beyond it.
double bmo_norm(const Grid& g, const std::map<HaarIndex, MultilinearOp>& seq,
                double p = 2.0, int sign_cutoff = 16, std::uint64_t seed = 1);

struct CzEstimates {
  BoundResult size_bound;    // spread^(dn)-normalized kernel values
  BoundResult holder_bound;  // oscillation quotients per coordinate
  BoundResult kernel_bound;  // the union of both families
  BoundResult weak_bound;    // indicator pairings over all cubes
  std::vector<double> bmo;   // oscillation norm per transposed slot
};

// Samples the normalized kernel families on `budget` off-diagonal tuples and
// certifies lower bounds for their size functionals; forms with three or
// more inputs need a contraction to reduce against.
CzEstimates cz_constants(const SIOForm& T, const Grid& g, int budget,
                         std::uint64_t seed, const Contraction* varpi = nullptr);

}  // namespace dycalc
