// Shared scalar types, deterministic RNG helpers, and small utilities.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dycalc {

using cx = std::complex<double>;
using cxvec = std::vector<cx>;

// Deterministic random source.  All sampling in the library goes through the
// helpers below (raw bit extraction from mt19937_64) so that results are
// byte-identical across platforms; distribution adapters from <random> are
// implementation-defined and deliberately avoided.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}

  std::uint64_t u64() { return g_(); }

  // One fair bit.
  int bit() { return static_cast<int>(u64() >> 63); }

  // Uniform double in [0,1) with 53-bit resolution.
  double unit() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [-1,1).
  double sym() { return 2.0 * unit() - 1.0; }

  // Uniform sign +-1.
  double sign() { return bit() ? -1.0 : 1.0; }

  // Uniform integer in [0, n), exact via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n == 0");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = u64();
    while (x >= limit) x = u64();
    return x % n;
  }

  int index(std::size_t n) { return static_cast<int>(below(n)); }

  // Unit-modulus complex number with uniform phase.
  cx unimodular() {
    const double t = 2.0 * M_PI * unit();
    return {std::cos(t), std::sin(t)};
  }

  // Standard normal via Box-Muller (deterministic given the stream).
  double normal() {
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  cx cnormal() { return {normal(), normal()}; }

  // Derive an independent child stream; used to decouple corpus items.
  Rng fork(std::uint64_t salt) {
    return Rng(u64() ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
  }

private:
  std::mt19937_64 g_;
};

inline double sqr(double x) { return x * x; }

// Euclidean norm of a coefficient vector.
inline double l2norm(std::span<const cx> v) {
  double s = 0;
  for (const cx& z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline void axpy(cxvec& y, cx a, std::span<const cx> x) {
  if (y.size() != x.size()) throw std::invalid_argument("axpy: size mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// Worker count used by run_chunks; resolves DYCALC_THREADS unless overridden.
int worker_count();
void set_worker_count(int n);  // n <= 0 resets to the environment default

// Deterministic chunked execution: [0,n) is cut into fixed chunks whose
// boundaries do not depend on the worker count, fn(begin, end, chunk) runs
// once per chunk (possibly on several threads), and callers combine per-chunk
// results in chunk order.  Output is therefore bit-stable for any thread
// count.
void run_chunks(std::size_t n,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                std::size_t* chunk_count_out = nullptr);
std::size_t chunk_count(std::size_t n);

// Chunked bit-stable sum of fn(i) over [0,n).
cx reduce_sum(std::size_t n, const std::function<cx(std::size_t)>& fn);

}  // namespace dycalc
