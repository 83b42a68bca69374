// Finite-dimensional normed spaces, randomized-sum norms, contractions, and
// multilinear operators between the spaces, together with certified lower
// bounds / estimators for the associated boundedness functionals.
//
// Conventions.  Vectors are flat complex arrays.  Matrix-valued elements are
// stored row-major.  All pairings are bilinear (no conjugation): scalar,
// sequence, and matrix spaces pair flat (sum of products; for matrices this
// is tr(X Y^T), and matrix norms are transpose-invariant, so Hoelder holds
// verbatim); weighted discrete Bochner spaces pair with their weights.
#pragma once

#include "dycalc/common.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace dycalc {

using i64 = std::int64_t;

// ---------------------------------------------------------------------------
// Spaces

enum class SpaceKind { Scalar, SeqLp, Schatten, Bochner };

class Space {
public:
  Space() = default;  // the scalar space

  static Space scalar();
  static Space seq_lp(double p, int dim);
  static Space schatten(double p, int side);  // side x side matrices, side <= 8
  static Space bochner(double p, std::vector<double> weights, const Space& inner);

  SpaceKind kind() const { return kind_; }
  double p() const { return p_; }
  int dim() const { return dim_; }    // flat length
  int side() const { return side_; }  // Schatten only
  const std::vector<double>& weights() const { return weights_; }
  const Space& inner() const;

  double norm(std::span<const cx> v) const;
  Space dual() const;  // exponents conjugated, structure kept

  bool operator==(const Space& o) const;

private:
  SpaceKind kind_ = SpaceKind::Scalar;
  double p_ = 2;
  int dim_ = 1;
  int side_ = 1;
  std::vector<double> weights_;
  std::shared_ptr<const Space> inner_;
};

// Bilinear duality pairing; x in X, y in dual(X) (same flat length).
cx dual_pair(const Space& X, std::span<const cx> x, std::span<const cx> y);

// Gaussian sample (complex by default) and its unit-norm rescaling.
cxvec random_vector(const Space& X, Rng& rng, bool real_entries = false);
cxvec random_unit(const Space& X, Rng& rng, bool real_entries = false);

// ---------------------------------------------------------------------------
// Randomized-sum norm:  (average over independent signs of |sum eps_k x_k|^q)^(1/q)

struct EstValue {
  double value = 0;
  double stderr_ = 0;  // zero when exact
  bool exact = false;
};

struct RadOptions {
  int exponent = 2;        // q in {1, 2}
  int exact_cutoff = 16;   // enumerate all sign patterns up to this length
  i64 samples = 20000;     // Monte Carlo size beyond the cutoff
  std::uint64_t seed = 1;
};

EstValue rad_norm(const Space& X, const std::vector<cxvec>& xs,
                  const RadOptions& opt = {});

// Scalar-coefficient contraction data:  rad(a.x) vs rad(x) for |a_k| <= 1.
struct ContractionCheck {
  double lhs = 0, rhs = 0;
  bool holds = false;
};
ContractionCheck contraction_check(const Space& X, const std::vector<cxvec>& xs,
                                   const std::vector<double>& coeffs,
                                   const RadOptions& opt = {});

// ---------------------------------------------------------------------------
// Contractions (multilinear scalar-valued forms bounded by the norm product)

class Contraction {
public:
  // varpi(x_1..x_s) = prod of scalar entries.
  static Contraction product_of_scalars(int slots);
  // varpi = trace of the product of the matrix slots times the scalar slots.
  // Matrix slots must share one side and their exponents must satisfy
  // sum 1/p = 1 so that the norm-product bound holds.
  static Contraction trace_of_product(std::vector<Space> spaces);
  // varpi(f_1..f_s) = sum_w mu_w inner(f_1(w), .., f_s(w)) over shared-weight
  // Bochner spaces.
  static Contraction integral_form(std::vector<Space> spaces, Contraction inner);

  int slots() const { return static_cast<int>(spaces_.size()); }
  const std::vector<Space>& spaces() const { return spaces_; }
  bool scalar_product() const;  // true for the all-scalar product form

  cx eval(std::span<const cxvec> args) const;

private:
  enum class Kind { Product, Trace, Integral };
  Kind kind_ = Kind::Product;
  std::vector<Space> spaces_;
  std::shared_ptr<const Contraction> inner_;
};

// ---------------------------------------------------------------------------
// Multilinear operators

class MultilinearOp {
public:
  static constexpr i64 kDenseLimit = 4096;  // max stored tensor entries

  // Degenerate scalar zero; useful only as an assignment target.
  MultilinearOp() = default;

  static MultilinearOp zero(std::vector<Space> ins, Space out);
  static MultilinearOp dense(std::vector<Space> ins, Space out, cxvec tensor);
  static MultilinearOp handle(std::vector<Space> ins, Space out,
                              std::function<cxvec(std::span<const cxvec>)> fn);
  static MultilinearOp random(std::vector<Space> ins, Space out, Rng& rng);

  int arity() const { return static_cast<int>(ins_.size()); }
  const std::vector<Space>& ins() const { return ins_; }
  const Space& out() const { return out_; }
  bool is_dense() const { return !tensor_.empty() || total_ == 0; }
  const cxvec& tensor() const { return tensor_; }

  cxvec apply(std::span<const cxvec> args) const;
  // <T(args), y> with y in dual(out)
  cx pair_apply(std::span<const cxvec> args, std::span<const cx> y) const;

  // Adjoint in slot m (1-based): <T*(.., y, ..), x_m> = <T(.., x_m, ..), y>.
  // Dense-only; requires flat-pairing slots (no Bochner in slot m or output).
  MultilinearOp transposed(int m) const;

  MultilinearOp scaled(cx a) const;
  void add_scaled(const MultilinearOp& o, cx a);
  double frob() const;

private:
  std::vector<Space> ins_;
  Space out_ = Space::scalar();
  i64 total_ = 0;  // dense tensor length = dim(out) * prod dim(in)
  cxvec tensor_;
  std::function<cxvec(std::span<const cxvec>)> fn_;
};

// ---------------------------------------------------------------------------
// Multi-index maximal norm over a finite tuple set
//
//   rm_norm(varpi, A, J, v):  sup | sum_k varpi(e_{1,k}, .., e_{s,k}) |
// where the J slots run over tuples from A (tuples[a][index-of-j-in-J]),
// slot v is a fixed vector of norm <= 1, and the remaining slots carry
// sequences normalized in the randomized-sum norm.  Requires at least two
// free slots, otherwise the supremum is unbounded.

struct RmOptions {
  int rounds = 160;        // random restarts
  int max_len = 8;         // test sequence length (<= 16)
  int ascent_passes = 2;   // sign-flip hill-climbing sweeps
  std::uint64_t seed = 1;
  bool force_estimate = false;  // skip the exact scalar path (tests)
};

struct RmResult {
  double value = 0;
  bool exact = false;
};

RmResult rm_norm(const Contraction& varpi,
                 const std::vector<std::vector<cxvec>>& tuples,
                 const std::vector<int>& J, int v, const RmOptions& opt = {});

// Lattice comparison value  || sup_k prod_{j in J} |f_{j,k}| ||_{p(J)} with
// 1/p(J) = sum_{j in J} 1/p_j, for sequence-lattice tuples (componentwise
// modulus and supremum).
double rm_lattice_formula(const std::vector<Space>& spaces,
                          const std::vector<std::vector<cxvec>>& tuples,
                          const std::vector<int>& J);

// ---------------------------------------------------------------------------
// Randomized boundedness of an operator family
//
// A tight partition splits the n+1 slots (n inputs + the output pairing slot
// n, 0-based) into one fixed slot, exactly two randomized slots, and n-2
// maximal slots.

struct TightPartition {
  int fixed_slot = 0;
  std::array<int, 2> rad{};
  std::vector<int> rm;
};

std::vector<TightPartition> tight_partitions(int n);

struct SearchOptions {
  int rounds = 200;
  int max_len = 8;
  int ascent_passes = 2;
  std::uint64_t seed = 1;
};

struct BoundResult {
  double value = 0;     // certified lower bound for the functional
  bool certified = true;  // all denominator factors evaluated exactly
};

// varpi may be null when the partition has no maximal slots (always so for
// bilinear families).
BoundResult r_bound(const std::vector<MultilinearOp>& family,
                    const Contraction* varpi, const TightPartition& part,
                    const SearchOptions& opt = {});
BoundResult r_bound_max(const std::vector<MultilinearOp>& family,
                        const Contraction* varpi, const SearchOptions& opt = {});

// Doubly-indexed randomized boundedness of a bilinear family: test arrays
// e1_{t,u}, e2_{u,v}, e3_{t,v} with absolute values summed over (t,u,v) in
// the numerator and doubly-indexed randomized-sum norms in the denominator.
struct RhatOptions {
  int rounds = 200;
  int max_n = 3;
  int ascent_passes = 2;
  std::uint64_t seed = 1;
};

BoundResult rhat_bound(const std::vector<MultilinearOp>& family,
                       const RhatOptions& opt = {});

}  // namespace dycalc
