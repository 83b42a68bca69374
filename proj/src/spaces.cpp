#include "dycalc/spaces.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dycalc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_exponent(double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("space exponent must be >= 1");
}

double conj_exponent(double p) {
  if (p == kInf) return 1.0;
  if (p == 1.0) return kInf;
  return p / (p - 1.0);
}

double lp_of(std::span<const double> vals, double p) {
  if (p == kInf) {
    double m = 0;
    for (double v : vals) m = std::max(m, v);
    return m;
  }
  double s = 0;
  for (double v : vals) s += std::pow(v, p);
  return std::pow(s, 1.0 / p);
}

std::vector<double> singular_values(std::span<const cx> m, int side) {
  Eigen::MatrixXcd a(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j)
      a(i, j) = m[static_cast<std::size_t>(i * side + j)];
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  std::vector<double> s(static_cast<std::size_t>(side));
  for (int i = 0; i < side; ++i) s[static_cast<std::size_t>(i)] = svd.singularValues()(i);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Space

Space Space::scalar() {
  Space x;
  x.kind_ = SpaceKind::Scalar;
  x.p_ = 2;
  x.dim_ = 1;
  return x;
}

Space Space::seq_lp(double p, int dim) {
  check_exponent(p);
  if (dim < 1) throw std::invalid_argument("seq_lp: dim < 1");
  Space x;
  x.kind_ = SpaceKind::SeqLp;
  x.p_ = p;
  x.dim_ = dim;
  return x;
}

Space Space::schatten(double p, int side) {
  check_exponent(p);
  if (side < 1 || side > 8) throw std::invalid_argument("schatten: side out of range");
  Space x;
  x.kind_ = SpaceKind::Schatten;
  x.p_ = p;
  x.side_ = side;
  x.dim_ = side * side;
  return x;
}

Space Space::bochner(double p, std::vector<double> weights, const Space& inner) {
  check_exponent(p);
  if (weights.empty()) throw std::invalid_argument("bochner: empty weight vector");
  for (double w : weights)
    if (!(w > 0)) throw std::invalid_argument("bochner: weights must be positive");
  Space x;
  x.kind_ = SpaceKind::Bochner;
  x.p_ = p;
  x.weights_ = std::move(weights);
  x.inner_ = std::make_shared<Space>(inner);
  x.dim_ = static_cast<int>(x.weights_.size()) * inner.dim();
  return x;
}

const Space& Space::inner() const {
  if (!inner_) throw std::logic_error("Space::inner: not a Bochner space");
  return *inner_;
}

double Space::norm(std::span<const cx> v) const {
  if (static_cast<int>(v.size()) != dim_)
    throw std::invalid_argument("Space::norm: wrong length");
  switch (kind_) {
    case SpaceKind::Scalar:
      return std::abs(v[0]);
    case SpaceKind::SeqLp: {
      std::vector<double> a(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
      return lp_of(a, p_);
    }
    case SpaceKind::Schatten:
      return lp_of(singular_values(v, side_), p_);
    case SpaceKind::Bochner: {
      const int id = inner_->dim();
      std::vector<double> a(weights_.size());
      for (std::size_t w = 0; w < weights_.size(); ++w)
        a[w] = inner_->norm(v.subspan(w * static_cast<std::size_t>(id),
                                      static_cast<std::size_t>(id)));
      if (p_ == kInf) return lp_of(a, kInf);
      double s = 0;
      for (std::size_t w = 0; w < weights_.size(); ++w)
        s += weights_[w] * std::pow(a[w], p_);
      return std::pow(s, 1.0 / p_);
    }
  }
  return 0;
}

Space Space::dual() const {
  switch (kind_) {
    case SpaceKind::Scalar:
      return scalar();
    case SpaceKind::SeqLp:
      return seq_lp(conj_exponent(p_), dim_);
    case SpaceKind::Schatten:
      return schatten(conj_exponent(p_), side_);
    case SpaceKind::Bochner:
      return bochner(conj_exponent(p_), weights_, inner_->dual());
  }
  return scalar();
}

bool Space::operator==(const Space& o) const {
  // exponents compare with a tolerance: conjugation is not exact in floating
  // point, and dual().dual() must round-trip
  auto close = [](double a, double b) {
    if (a == b) return true;
    if (a == kInf || b == kInf) return false;
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  if (kind_ != o.kind_ || !close(p_, o.p_) || dim_ != o.dim_ || side_ != o.side_)
    return false;
  if (weights_.size() != o.weights_.size()) return false;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    if (!close(weights_[i], o.weights_[i])) return false;
  if (!inner_ != !o.inner_) return false;
  return !inner_ || *inner_ == *o.inner_;
}

cx dual_pair(const Space& X, std::span<const cx> x, std::span<const cx> y) {
  if (x.size() != y.size() || static_cast<int>(x.size()) != X.dim())
    throw std::invalid_argument("dual_pair: wrong lengths");
  if (X.kind() == SpaceKind::Bochner) {
    const int id = X.inner().dim();
    cx s{0, 0};
    for (std::size_t w = 0; w < X.weights().size(); ++w)
      s += X.weights()[w] *
           dual_pair(X.inner(), x.subspan(w * static_cast<std::size_t>(id),
                                          static_cast<std::size_t>(id)),
                     y.subspan(w * static_cast<std::size_t>(id),
                               static_cast<std::size_t>(id)));
    return s;
  }
  cx s{0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

cxvec random_vector(const Space& X, Rng& rng, bool real_entries) {
  cxvec v(static_cast<std::size_t>(X.dim()));
  for (auto& z : v) z = real_entries ? cx{rng.normal(), 0} : rng.cnormal();
  return v;
}

cxvec random_unit(const Space& X, Rng& rng, bool real_entries) {
  for (;;) {
    cxvec v = random_vector(X, rng, real_entries);
    const double n = X.norm(v);
    if (n > 1e-8) {
      for (auto& z : v) z /= n;
      return v;
    }
  }
}

// ---------------------------------------------------------------------------
// rad_norm

EstValue rad_norm(const Space& X, const std::vector<cxvec>& xs,
                  const RadOptions& opt) {
  if (opt.exponent != 1 && opt.exponent != 2)
    throw std::invalid_argument("rad_norm: exponent must be 1 or 2");
  EstValue out;
  const int K = static_cast<int>(xs.size());
  if (K == 0) {
    out.exact = true;
    return out;
  }
  for (const auto& x : xs)
    if (static_cast<int>(x.size()) != X.dim())
      throw std::invalid_argument("rad_norm: vector length mismatch");
  const auto q = static_cast<double>(opt.exponent);
  auto power = [&](std::span<const cx> s) {
    const double n = X.norm(s);
    return opt.exponent == 1 ? n : n * n;
  };
  if (K <= opt.exact_cutoff) {
    // Gray-code walk over all sign patterns; one term flips per step.
    cxvec sum(static_cast<std::size_t>(X.dim()), cx{0, 0});
    std::vector<double> eps(static_cast<std::size_t>(K), 1.0);
    for (const auto& x : xs) axpy(sum, cx{1, 0}, x);
    double acc = power(sum);
    const std::uint64_t total = std::uint64_t{1} << K;
    for (std::uint64_t k = 1; k < total; ++k) {
      const int b = std::countr_zero(k);
      eps[static_cast<std::size_t>(b)] = -eps[static_cast<std::size_t>(b)];
      axpy(sum, cx{2.0 * eps[static_cast<std::size_t>(b)], 0}, xs[static_cast<std::size_t>(b)]);
      acc += power(sum);
    }
    const double mean = acc / static_cast<double>(total);
    out.value = std::pow(mean, 1.0 / q);
    out.exact = true;
    return out;
  }
  if (opt.samples < 2) throw std::invalid_argument("rad_norm: too few samples");
  Rng rng(opt.seed);
  double s1 = 0, s2 = 0;
  cxvec sum(static_cast<std::size_t>(X.dim()));
  for (i64 t = 0; t < opt.samples; ++t) {
    std::fill(sum.begin(), sum.end(), cx{0, 0});
    for (const auto& x : xs) axpy(sum, cx{rng.sign(), 0}, x);
    const double v = power(sum);
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / static_cast<double>(opt.samples);
  const double var =
      std::max(0.0, s2 / static_cast<double>(opt.samples) - mean * mean);
  const double se_mean = std::sqrt(var / static_cast<double>(opt.samples));
  out.value = std::pow(mean, 1.0 / q);
  // delta method for mean^(1/q)
  out.stderr_ = mean > 0 ? se_mean * out.value / (q * mean) : se_mean;
  out.exact = false;
  return out;
}

ContractionCheck contraction_check(const Space& X, const std::vector<cxvec>& xs,
                                   const std::vector<double>& coeffs,
                                   const RadOptions& opt) {
  if (coeffs.size() != xs.size())
    throw std::invalid_argument("contraction_check: size mismatch");
  for (double a : coeffs)
    if (!(std::abs(a) <= 1.0))
      throw std::invalid_argument("contraction_check: |coefficient| > 1");
  std::vector<cxvec> scaled(xs);
  for (std::size_t k = 0; k < xs.size(); ++k)
    for (auto& z : scaled[k]) z *= coeffs[k];
  ContractionCheck c;
  c.lhs = rad_norm(X, scaled, opt).value;
  c.rhs = rad_norm(X, xs, opt).value;
  c.holds = c.lhs <= c.rhs + 1e-12;
  return c;
}

// ---------------------------------------------------------------------------
// Contraction

Contraction Contraction::product_of_scalars(int slots) {
  if (slots < 1) throw std::invalid_argument("product_of_scalars: slots < 1");
  Contraction c;
  c.kind_ = Kind::Product;
  c.spaces_.assign(static_cast<std::size_t>(slots), Space::scalar());
  return c;
}

Contraction Contraction::trace_of_product(std::vector<Space> spaces) {
  if (spaces.empty()) throw std::invalid_argument("trace_of_product: no slots");
  int side = 0;
  double inv = 0;
  for (const auto& s : spaces) {
    if (s.kind() == SpaceKind::Scalar) continue;
    if (s.kind() != SpaceKind::Schatten)
      throw std::invalid_argument("trace_of_product: slots must be scalar or matrix");
    if (side == 0) side = s.side();
    if (s.side() != side)
      throw std::invalid_argument("trace_of_product: mixed matrix sides");
    inv += s.p() == kInf ? 0.0 : 1.0 / s.p();
  }
  if (side != 0 && std::abs(inv - 1.0) > 1e-9)
    throw std::invalid_argument(
        "trace_of_product: matrix exponents must satisfy sum 1/p = 1");
  Contraction c;
  c.kind_ = Kind::Trace;
  c.spaces_ = std::move(spaces);
  return c;
}

Contraction Contraction::integral_form(std::vector<Space> spaces, Contraction inner) {
  if (spaces.size() != static_cast<std::size_t>(inner.slots()))
    throw std::invalid_argument("integral_form: slot count mismatch");
  double inv = 0;
  for (std::size_t i = 0; i < spaces.size(); ++i) {
    if (spaces[i].kind() != SpaceKind::Bochner)
      throw std::invalid_argument("integral_form: slots must be Bochner spaces");
    if (spaces[i].weights() != spaces[0].weights())
      throw std::invalid_argument("integral_form: slots must share weights");
    if (!(spaces[i].inner() == inner.spaces()[i]))
      throw std::invalid_argument("integral_form: inner space mismatch");
    inv += spaces[i].p() == kInf ? 0.0 : 1.0 / spaces[i].p();
  }
  if (std::abs(inv - 1.0) > 1e-9)
    throw std::invalid_argument("integral_form: exponents must satisfy sum 1/p = 1");
  Contraction c;
  c.kind_ = Kind::Integral;
  c.spaces_ = std::move(spaces);
  c.inner_ = std::make_shared<Contraction>(std::move(inner));
  return c;
}

bool Contraction::scalar_product() const {
  if (kind_ != Kind::Product) return false;
  for (const auto& s : spaces_)
    if (s.kind() != SpaceKind::Scalar) return false;
  return true;
}

cx Contraction::eval(std::span<const cxvec> args) const {
  if (args.size() != spaces_.size())
    throw std::invalid_argument("Contraction::eval: arity mismatch");
  for (std::size_t i = 0; i < args.size(); ++i)
    if (static_cast<int>(args[i].size()) != spaces_[i].dim())
      throw std::invalid_argument("Contraction::eval: arg length mismatch");
  switch (kind_) {
    case Kind::Product: {
      cx v{1, 0};
      for (const auto& a : args) v *= a[0];
      return v;
    }
    case Kind::Trace: {
      int side = 1;
      for (const auto& s : spaces_)
        if (s.kind() == SpaceKind::Schatten) side = s.side();
      // product of matrix slots in order, times scalar slots
      std::vector<cx> m(static_cast<std::size_t>(side * side), cx{0, 0});
      for (int i = 0; i < side; ++i) m[static_cast<std::size_t>(i * side + i)] = 1;
      cx scal{1, 0};
      bool any = false;
      for (std::size_t s = 0; s < spaces_.size(); ++s) {
        if (spaces_[s].kind() == SpaceKind::Scalar) {
          scal *= args[s][0];
          continue;
        }
        any = true;
        std::vector<cx> next(static_cast<std::size_t>(side * side), cx{0, 0});
        for (int i = 0; i < side; ++i)
          for (int j = 0; j < side; ++j) {
            cx acc{0, 0};
            for (int k = 0; k < side; ++k)
              acc += m[static_cast<std::size_t>(i * side + k)] *
                     args[s][static_cast<std::size_t>(k * side + j)];
            next[static_cast<std::size_t>(i * side + j)] = acc;
          }
        m = std::move(next);
      }
      cx tr{0, 0};
      for (int i = 0; i < side; ++i) tr += m[static_cast<std::size_t>(i * side + i)];
      return scal * (any ? tr : cx{1, 0});
    }
    case Kind::Integral: {
      const auto& w = spaces_[0].weights();
      cx v{0, 0};
      std::vector<cxvec> slice(spaces_.size());
      for (std::size_t omega = 0; omega < w.size(); ++omega) {
        for (std::size_t s = 0; s < spaces_.size(); ++s) {
          const int id = spaces_[s].inner().dim();
          slice[s].assign(args[s].begin() + static_cast<std::ptrdiff_t>(omega * id),
                          args[s].begin() + static_cast<std::ptrdiff_t>((omega + 1) * id));
        }
        v += w[omega] * inner_->eval(slice);
      }
      return v;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// MultilinearOp

MultilinearOp MultilinearOp::zero(std::vector<Space> ins, Space out) {
  i64 total = out.dim();
  for (const auto& s : ins) total *= s.dim();
  if (total <= kDenseLimit) {
    MultilinearOp t;
    t.ins_ = std::move(ins);
    t.out_ = std::move(out);
    t.total_ = total;
    t.tensor_.assign(static_cast<std::size_t>(total), cx{0, 0});
    return t;
  }
  const int od = out.dim();
  return handle(std::move(ins), std::move(out), [od](std::span<const cxvec>) {
    return cxvec(static_cast<std::size_t>(od), cx{0, 0});
  });
}

MultilinearOp MultilinearOp::dense(std::vector<Space> ins, Space out, cxvec tensor) {
  i64 total = out.dim();
  for (const auto& s : ins) total *= s.dim();
  if (total > kDenseLimit)
    throw std::invalid_argument("MultilinearOp::dense: tensor too large");
  if (static_cast<i64>(tensor.size()) != total)
    throw std::invalid_argument("MultilinearOp::dense: tensor length mismatch");
  MultilinearOp t;
  t.ins_ = std::move(ins);
  t.out_ = std::move(out);
  t.total_ = total;
  t.tensor_ = std::move(tensor);
  return t;
}

MultilinearOp MultilinearOp::handle(std::vector<Space> ins, Space out,
                                    std::function<cxvec(std::span<const cxvec>)> fn) {
  MultilinearOp t;
  i64 total = out.dim();
  for (const auto& s : ins) total *= s.dim();
  t.ins_ = std::move(ins);
  t.out_ = std::move(out);
  t.total_ = total;
  t.fn_ = std::move(fn);
  return t;
}

MultilinearOp MultilinearOp::random(std::vector<Space> ins, Space out, Rng& rng) {
  i64 total = out.dim();
  for (const auto& s : ins) total *= s.dim();
  if (total > kDenseLimit)
    throw std::invalid_argument("MultilinearOp::random: tensor too large");
  cxvec tensor(static_cast<std::size_t>(total));
  for (auto& z : tensor) z = rng.cnormal();
  return dense(std::move(ins), std::move(out), std::move(tensor));
}

cxvec MultilinearOp::apply(std::span<const cxvec> args) const {
  if (args.size() != ins_.size())
    throw std::invalid_argument("MultilinearOp::apply: arity mismatch");
  for (std::size_t m = 0; m < args.size(); ++m)
    if (static_cast<int>(args[m].size()) != ins_[m].dim())
      throw std::invalid_argument("MultilinearOp::apply: arg length mismatch");
  if (!is_dense()) return fn_(args);
  const int n = arity();
  const int od = out_.dim();
  i64 din = 1;
  for (const auto& s : ins_) din *= s.dim();
  cxvec out(static_cast<std::size_t>(od), cx{0, 0});
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (i64 c = 0; c < din; ++c) {
    cx prod{1, 0};
    for (int m = 0; m < n; ++m)
      prod *= args[static_cast<std::size_t>(m)][static_cast<std::size_t>(
          idx[static_cast<std::size_t>(m)])];
    if (prod != cx{0, 0})
      for (int io = 0; io < od; ++io)
        out[static_cast<std::size_t>(io)] +=
            tensor_[static_cast<std::size_t>(io * din + c)] * prod;
    // row-major odometer: last input index fastest
    for (int m = n - 1; m >= 0; --m) {
      auto& v = idx[static_cast<std::size_t>(m)];
      if (++v < ins_[static_cast<std::size_t>(m)].dim()) break;
      v = 0;
    }
  }
  return out;
}

cx MultilinearOp::pair_apply(std::span<const cxvec> args, std::span<const cx> y) const {
  return dual_pair(out_, apply(args), y);
}

MultilinearOp MultilinearOp::transposed(int m) const {
  if (!is_dense())
    throw std::logic_error("MultilinearOp::transposed: dense operators only");
  const int n = arity();
  if (m < 1 || m > n) throw std::invalid_argument("transposed: slot out of range");
  if (out_.kind() == SpaceKind::Bochner ||
      ins_[static_cast<std::size_t>(m - 1)].kind() == SpaceKind::Bochner)
    throw std::logic_error("transposed: weighted slots are not flat-paired");
  std::vector<Space> nins = ins_;
  nins[static_cast<std::size_t>(m - 1)] = out_.dual();
  Space nout = ins_[static_cast<std::size_t>(m - 1)].dual();
  // strides of the old tensor
  std::vector<i64> dim(static_cast<std::size_t>(n + 1));
  dim[0] = out_.dim();
  for (int i = 0; i < n; ++i)
    dim[static_cast<std::size_t>(i + 1)] = ins_[static_cast<std::size_t>(i)].dim();
  std::vector<i64> ndim = dim;
  std::swap(ndim[0], ndim[static_cast<std::size_t>(m)]);
  cxvec nt(tensor_.size());
  std::vector<i64> idx(static_cast<std::size_t>(n + 1), 0);
  for (i64 c = 0; c < total_; ++c) {
    // idx holds the old multi-index (out first); swap slots 0 and m
    i64 nc = 0;
    for (int s = 0; s <= n; ++s) {
      const i64 v = s == 0   ? idx[static_cast<std::size_t>(m)]
                    : s == m ? idx[0]
                             : idx[static_cast<std::size_t>(s)];
      nc = nc * ndim[static_cast<std::size_t>(s)] + v;
    }
    nt[static_cast<std::size_t>(nc)] = tensor_[static_cast<std::size_t>(c)];
    for (int s = n; s >= 0; --s) {
      auto& v = idx[static_cast<std::size_t>(s)];
      if (++v < dim[static_cast<std::size_t>(s)]) break;
      v = 0;
    }
  }
  return dense(std::move(nins), std::move(nout), std::move(nt));
}

MultilinearOp MultilinearOp::scaled(cx a) const {
  if (is_dense()) {
    cxvec t = tensor_;
    for (auto& z : t) z *= a;
    return dense(ins_, out_, std::move(t));
  }
  auto fn = fn_;
  return handle(ins_, out_, [fn, a](std::span<const cxvec> args) {
    cxvec v = fn(args);
    for (auto& z : v) z *= a;
    return v;
  });
}

void MultilinearOp::add_scaled(const MultilinearOp& o, cx a) {
  if (!is_dense() || !o.is_dense())
    throw std::logic_error("MultilinearOp::add_scaled: dense operators only");
  if (o.tensor_.size() != tensor_.size())
    throw std::invalid_argument("MultilinearOp::add_scaled: shape mismatch");
  for (std::size_t i = 0; i < tensor_.size(); ++i) tensor_[i] += a * o.tensor_[i];
}

double MultilinearOp::frob() const {
  if (!is_dense()) throw std::logic_error("MultilinearOp::frob: dense only");
  double s = 0;
  for (const auto& z : tensor_) s += std::norm(z);
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// rm_norm

namespace {

struct RmLayout {
  int slots = 0;
  std::vector<int> free_slots;
};

RmLayout rm_validate(const Contraction& varpi,
                     const std::vector<std::vector<cxvec>>& tuples,
                     const std::vector<int>& J, int v) {
  RmLayout lay;
  lay.slots = varpi.slots();
  if (v < 0 || v >= lay.slots) throw std::invalid_argument("rm_norm: bad v");
  std::vector<bool> used(static_cast<std::size_t>(lay.slots), false);
  used[static_cast<std::size_t>(v)] = true;
  for (std::size_t i = 0; i < J.size(); ++i) {
    const int j = J[i];
    if (j < 0 || j >= lay.slots || used[static_cast<std::size_t>(j)])
      throw std::invalid_argument("rm_norm: bad J");
    if (i > 0 && J[i] <= J[i - 1])
      throw std::invalid_argument("rm_norm: J must be strictly increasing");
    used[static_cast<std::size_t>(j)] = true;
  }
  for (int s = 0; s < lay.slots; ++s)
    if (!used[static_cast<std::size_t>(s)]) lay.free_slots.push_back(s);
  if (lay.free_slots.size() < 2)
    throw std::invalid_argument(
        "rm_norm: needs at least two free slots (the supremum is unbounded otherwise)");
  if (tuples.empty()) throw std::invalid_argument("rm_norm: empty tuple set");
  for (const auto& t : tuples) {
    if (t.size() != J.size())
      throw std::invalid_argument("rm_norm: tuple arity mismatch");
    for (std::size_t i = 0; i < J.size(); ++i)
      if (static_cast<int>(t[i].size()) !=
          varpi.spaces()[static_cast<std::size_t>(J[i])].dim())
        throw std::invalid_argument("rm_norm: tuple entry length mismatch");
  }
  return lay;
}

// maximize |sum_k s_k t_k| over sign vectors; exact for K <= 12, greedy above
double best_signed_abs(std::vector<cx> terms) {
  const int K = static_cast<int>(terms.size());
  if (K <= 12) {
    double best = 0;
    const std::uint64_t total = std::uint64_t{1} << (K > 0 ? K - 1 : 0);
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      cx s{0, 0};
      for (int k = 0; k < K; ++k)
        s += ((mask >> k) & 1) ? -terms[static_cast<std::size_t>(k)]
                               : terms[static_cast<std::size_t>(k)];
      best = std::max(best, std::abs(s));
    }
    return best;
  }
  cx s{0, 0};
  for (const auto& t : terms) s += t;
  for (int pass = 0; pass < 4; ++pass) {
    bool moved = false;
    for (auto& t : terms) {
      const cx alt = s - 2.0 * t;
      if (std::abs(alt) > std::abs(s) + 1e-15) {
        s = alt;
        t = -t;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return std::abs(s);
}

}  // namespace

RmResult rm_norm(const Contraction& varpi,
                 const std::vector<std::vector<cxvec>>& tuples,
                 const std::vector<int>& J, int v, const RmOptions& opt) {
  const RmLayout lay = rm_validate(varpi, tuples, J, v);
  RmResult res;
  if (varpi.scalar_product() && !opt.force_estimate) {
    // With >= 2 free slots the generalized Cauchy-Schwarz bound
    //   sum_k prod_free |e_{j,k}| <= prod_free ||(e_{j,.})||_2 <= 1
    // is tight for one-point test sequences, so the value is the largest
    // tuple product; duplicates and sequence length are immaterial.
    double best = 0;
    for (const auto& t : tuples) {
      double p = 1;
      for (const auto& e : t) p *= std::abs(e[0]);
      best = std::max(best, p);
    }
    res.value = best;
    res.exact = true;
    return res;
  }
  const int max_len = std::min(opt.max_len, 16);
  if (max_len < 1) throw std::invalid_argument("rm_norm: max_len < 1");
  Rng rng(opt.seed);
  double best = 0;
  for (int round = 0; round < opt.rounds; ++round) {
    Rng r = rng.fork(static_cast<std::uint64_t>(round));
    const int K = 1 + r.index(static_cast<std::size_t>(max_len));
    std::vector<std::size_t> pick(static_cast<std::size_t>(K));
    for (auto& a : pick) a = r.below(tuples.size());
    cxvec ev = random_unit(varpi.spaces()[static_cast<std::size_t>(v)], r);
    // free-slot sequences, each normalized exactly in the randomized norm
    std::vector<std::vector<cxvec>> free_seq(lay.free_slots.size());
    bool degenerate = false;
    for (std::size_t f = 0; f < lay.free_slots.size(); ++f) {
      const Space& X = varpi.spaces()[static_cast<std::size_t>(lay.free_slots[f])];
      auto& seq = free_seq[f];
      seq.resize(static_cast<std::size_t>(K));
      for (auto& x : seq) x = random_vector(X, r);
      const double rn = rad_norm(X, seq).value;
      if (!(rn > 1e-9)) {
        degenerate = true;
        break;
      }
      for (auto& x : seq)
        for (auto& z : x) z /= rn;
    }
    if (degenerate) continue;
    std::vector<cx> terms(static_cast<std::size_t>(K));
    std::vector<cxvec> args(static_cast<std::size_t>(lay.slots));
    for (int k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < J.size(); ++i)
        args[static_cast<std::size_t>(J[i])] = tuples[pick[static_cast<std::size_t>(k)]][i];
      args[static_cast<std::size_t>(v)] = ev;
      for (std::size_t f = 0; f < lay.free_slots.size(); ++f)
        args[static_cast<std::size_t>(lay.free_slots[f])] =
            free_seq[f][static_cast<std::size_t>(k)];
      terms[static_cast<std::size_t>(k)] = varpi.eval(args);
    }
    // flipping the sign of one free-slot vector at index k negates term k and
    // leaves every normalization invariant, so optimize signs directly
    best = std::max(best, best_signed_abs(terms));
  }
  res.value = best;
  res.exact = false;
  return res;
}

double rm_lattice_formula(const std::vector<Space>& spaces,
                          const std::vector<std::vector<cxvec>>& tuples,
                          const std::vector<int>& J) {
  if (J.empty()) throw std::invalid_argument("rm_lattice_formula: empty J");
  int dim = 0;
  double ipj = 0;
  for (int j : J) {
    const Space& X = spaces.at(static_cast<std::size_t>(j));
    if (X.kind() != SpaceKind::Scalar && X.kind() != SpaceKind::SeqLp)
      throw std::invalid_argument("rm_lattice_formula: lattice slots only");
    if (dim == 0) dim = X.dim();
    if (X.dim() != dim)
      throw std::invalid_argument("rm_lattice_formula: mixed lattice dimensions");
    ipj += X.p() == std::numeric_limits<double>::infinity() ? 0.0 : 1.0 / X.p();
  }
  const double pj = ipj > 0 ? 1.0 / ipj : std::numeric_limits<double>::infinity();
  std::vector<double> env(static_cast<std::size_t>(dim), 0.0);
  for (const auto& t : tuples) {
    if (t.size() != J.size())
      throw std::invalid_argument("rm_lattice_formula: tuple arity mismatch");
    for (int i = 0; i < dim; ++i) {
      double p = 1;
      for (const auto& e : t) p *= std::abs(e[static_cast<std::size_t>(i)]);
      env[static_cast<std::size_t>(i)] = std::max(env[static_cast<std::size_t>(i)], p);
    }
  }
  return lp_of(env, pj);
}

// ---------------------------------------------------------------------------
// r_bound / rhat_bound

std::vector<TightPartition> tight_partitions(int n) {
  if (n < 2) throw std::invalid_argument("tight_partitions: n < 2");
  std::vector<TightPartition> out;
  const int slots = n + 1;
  for (int fixed = 0; fixed < slots; ++fixed)
    for (int a = 0; a < slots; ++a)
      for (int b = a + 1; b < slots; ++b) {
        if (a == fixed || b == fixed) continue;
        TightPartition p;
        p.fixed_slot = fixed;
        p.rad = {a, b};
        for (int s = 0; s < slots; ++s)
          if (s != fixed && s != a && s != b) p.rm.push_back(s);
        out.push_back(std::move(p));
      }
  return out;
}

namespace {

void check_family(const std::vector<MultilinearOp>& family) {
  if (family.empty()) throw std::invalid_argument("empty operator family");
  const auto& f0 = family.front();
  for (const auto& t : family) {
    if (t.arity() != f0.arity() || !(t.out() == f0.out()))
      throw std::invalid_argument("operator family must share one shape");
    for (int m = 0; m < t.arity(); ++m)
      if (!(t.ins()[static_cast<std::size_t>(m)] == f0.ins()[static_cast<std::size_t>(m)]))
        throw std::invalid_argument("operator family must share one shape");
  }
}

}  // namespace

BoundResult r_bound(const std::vector<MultilinearOp>& family,
                    const Contraction* varpi, const TightPartition& part,
                    const SearchOptions& opt) {
  check_family(family);
  const int n = family.front().arity();
  const int slots = n + 1;
  std::vector<Space> slot_space(static_cast<std::size_t>(slots));
  for (int m = 0; m < n; ++m)
    slot_space[static_cast<std::size_t>(m)] = family.front().ins()[static_cast<std::size_t>(m)];
  slot_space[static_cast<std::size_t>(n)] = family.front().out().dual();
  // validate the partition
  {
    std::vector<bool> used(static_cast<std::size_t>(slots), false);
    auto mark = [&](int s) {
      if (s < 0 || s >= slots || used[static_cast<std::size_t>(s)])
        throw std::invalid_argument("r_bound: invalid partition");
      used[static_cast<std::size_t>(s)] = true;
    };
    mark(part.fixed_slot);
    mark(part.rad[0]);
    mark(part.rad[1]);
    for (int s : part.rm) mark(s);
    for (bool u : used)
      if (!u) throw std::invalid_argument("r_bound: partition misses a slot");
  }
  if (!part.rm.empty()) {
    if (!varpi) throw std::invalid_argument("r_bound: maximal slots need a contraction");
    if (varpi->slots() != slots)
      throw std::invalid_argument("r_bound: contraction arity mismatch");
    for (int s = 0; s < slots; ++s)
      if (!(varpi->spaces()[static_cast<std::size_t>(s)] ==
            slot_space[static_cast<std::size_t>(s)]))
        throw std::invalid_argument("r_bound: contraction space mismatch");
  }
  std::vector<int> rmJ = part.rm;
  std::sort(rmJ.begin(), rmJ.end());
  const int max_len = std::min(opt.max_len, 16);
  Rng rng(opt.seed);
  BoundResult res;
  res.value = 0;
  res.certified = true;
  for (int round = 0; round < opt.rounds; ++round) {
    Rng r = rng.fork(static_cast<std::uint64_t>(round));
    const int K = 1 + r.index(static_cast<std::size_t>(max_len));
    std::vector<std::size_t> which(static_cast<std::size_t>(K));
    const bool mix = r.bit() != 0;
    const std::size_t common = r.below(family.size());
    for (auto& w : which) w = mix ? r.below(family.size()) : common;
    cxvec fixed_vec = random_unit(slot_space[static_cast<std::size_t>(part.fixed_slot)], r);
    std::vector<std::vector<cxvec>> seq(static_cast<std::size_t>(slots));
    for (int s = 0; s < slots; ++s) {
      if (s == part.fixed_slot) continue;
      auto& xs = seq[static_cast<std::size_t>(s)];
      xs.resize(static_cast<std::size_t>(K));
      for (auto& x : xs) x = random_vector(slot_space[static_cast<std::size_t>(s)], r);
    }
    double denom = 1.0;
    bool certified = true, degenerate = false;
    for (int s : {part.rad[0], part.rad[1]}) {
      const auto rn = rad_norm(slot_space[static_cast<std::size_t>(s)],
                               seq[static_cast<std::size_t>(s)]);
      if (!(rn.value > 1e-9)) {
        degenerate = true;
        break;
      }
      denom *= rn.value;
    }
    if (degenerate) continue;
    if (!rmJ.empty()) {
      std::vector<std::vector<cxvec>> used_tuples(static_cast<std::size_t>(K));
      for (int k = 0; k < K; ++k)
        for (int s : rmJ)
          used_tuples[static_cast<std::size_t>(k)].push_back(
              seq[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]);
      RmOptions ro;
      ro.seed = r.u64();
      ro.rounds = 40;
      const RmResult rm = rm_norm(*varpi, used_tuples, rmJ, part.fixed_slot, ro);
      if (!(rm.value > 1e-12)) continue;
      denom *= rm.value;
      certified = rm.exact;
    }
    std::vector<cx> terms(static_cast<std::size_t>(K));
    std::vector<cxvec> args(static_cast<std::size_t>(n));
    for (int k = 0; k < K; ++k) {
      for (int m = 0; m < n; ++m)
        args[static_cast<std::size_t>(m)] =
            m == part.fixed_slot ? fixed_vec
                                 : seq[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)];
      const cxvec& y = part.fixed_slot == n
                           ? fixed_vec
                           : seq[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
      terms[static_cast<std::size_t>(k)] =
          family[which[static_cast<std::size_t>(k)]].pair_apply(args, y);
    }
    // sign flips on a randomized slot negate single terms and leave all
    // denominator factors unchanged, so optimize the signs exactly
    const double num = best_signed_abs(terms);
    const double ratio = num / denom;
    if (ratio > res.value) {
      res.value = ratio;
      res.certified = certified;
    }
  }
  return res;
}

BoundResult r_bound_max(const std::vector<MultilinearOp>& family,
                        const Contraction* varpi, const SearchOptions& opt) {
  check_family(family);
  BoundResult best;
  best.value = 0;
  best.certified = true;
  SearchOptions o = opt;
  for (const auto& part : tight_partitions(family.front().arity())) {
    o.seed = opt.seed ^ (0x9e3779b97f4a7c15ull *
                         (static_cast<std::uint64_t>(part.fixed_slot) * 64 +
                          static_cast<std::uint64_t>(part.rad[0]) * 8 +
                          static_cast<std::uint64_t>(part.rad[1]) + 1));
    const BoundResult r = r_bound(family, varpi, part, o);
    if (r.value > best.value) best = r;
  }
  return best;
}

BoundResult rhat_bound(const std::vector<MultilinearOp>& family,
                       const RhatOptions& opt) {
  check_family(family);
  if (family.front().arity() != 2)
    throw std::invalid_argument("rhat_bound: bilinear families only");
  const Space X1 = family.front().ins()[0];
  const Space X2 = family.front().ins()[1];
  const Space Y = family.front().out().dual();
  Rng rng(opt.seed);
  BoundResult res;
  res.value = 0;
  res.certified = true;
  const int max_n = std::max(1, std::min(opt.max_n, 4));
  for (int round = 0; round < opt.rounds; ++round) {
    Rng r = rng.fork(static_cast<std::uint64_t>(round));
    const int N = 1 + r.index(static_cast<std::size_t>(max_n));
    const std::size_t nn = static_cast<std::size_t>(N) * static_cast<std::size_t>(N);
    std::vector<std::size_t> which(nn * static_cast<std::size_t>(N));
    for (auto& w : which) w = r.below(family.size());
    std::vector<cxvec> e1(nn), e2(nn), e3(nn);
    for (auto& x : e1) x = random_vector(X1, r);
    for (auto& x : e2) x = random_vector(X2, r);
    for (auto& x : e3) x = random_vector(Y, r);
    auto at = [N](int a, int b) {
      return static_cast<std::size_t>(a * N + b);
    };
    auto numerator = [&]() {
      double s = 0;
      std::vector<cxvec> args(2);
      for (int t = 0; t < N; ++t)
        for (int u = 0; u < N; ++u)
          for (int v = 0; v < N; ++v) {
            args[0] = e1[at(t, u)];
            args[1] = e2[at(u, v)];
            const auto& T =
                family[which[(static_cast<std::size_t>(t) * static_cast<std::size_t>(N) +
                              static_cast<std::size_t>(u)) *
                                 static_cast<std::size_t>(N) +
                             static_cast<std::size_t>(v)]];
            s += std::abs(T.pair_apply(args, e3[at(t, v)]));
          }
      return s;
    };
    std::array<std::vector<cxvec>*, 3> arrs{&e1, &e2, &e3};
    std::array<const Space*, 3> arr_space{&X1, &X2, &Y};
    std::array<EstValue, 3> rad{};
    bool degenerate = false;
    for (int a = 0; a < 3; ++a) {
      rad[static_cast<std::size_t>(a)] = rad_norm(*arr_space[static_cast<std::size_t>(a)],
                                                  *arrs[static_cast<std::size_t>(a)]);
      if (!(rad[static_cast<std::size_t>(a)].value > 1e-9)) degenerate = true;
    }
    if (degenerate) continue;
    auto den_of = [&] {
      return rad[0].value * rad[1].value * rad[2].value;
    };
    bool exact = rad[0].exact && rad[1].exact && rad[2].exact;
    double num = numerator();
    double ratio = num / den_of();
    // coordinate resampling ascent; only the touched array's norm changes
    for (int pass = 0; pass < opt.ascent_passes; ++pass) {
      for (int a = 0; a < 3; ++a) {
        auto& arr = *arrs[static_cast<std::size_t>(a)];
        const Space& X = *arr_space[static_cast<std::size_t>(a)];
        for (auto& entry : arr) {
          const cxvec save = entry;
          const EstValue save_rad = rad[static_cast<std::size_t>(a)];
          entry = random_vector(X, r);
          rad[static_cast<std::size_t>(a)] = rad_norm(X, arr);
          if (rad[static_cast<std::size_t>(a)].value > 1e-9) {
            const double n2 = numerator();
            if (n2 / den_of() > ratio) {
              ratio = n2 / den_of();
              num = n2;
              exact = rad[0].exact && rad[1].exact && rad[2].exact;
              continue;
            }
          }
          entry = save;
          rad[static_cast<std::size_t>(a)] = save_rad;
        }
      }
    }
    if (ratio > res.value) {
      res.value = ratio;
      res.certified = exact;
    }
  }
  return res;
}

}  // namespace dycalc
