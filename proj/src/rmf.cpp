#include "dycalc/rmf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace dycalc {

namespace {

bool same_grid(const Grid& g, const Grid& h) {
  return g.dim() == h.dim() && g.window() == h.window() &&
         g.shift() == h.shift() && g.roots() == h.roots();
}

bool is_hilbert(const Space& X) {
  switch (X.kind()) {
    case SpaceKind::Scalar:
      return true;
    case SpaceKind::SeqLp:
    case SpaceKind::Schatten:
      return X.p() == 2.0;
    case SpaceKind::Bochner:
      return X.p() == 2.0 && is_hilbert(X.inner());
  }
  return false;
}

void validate_config(const std::vector<GridFunction>& fs,
                     const RMConfig& cfg) {
  const int slots = cfg.varpi.slots();
  if (cfg.J.empty()) throw std::invalid_argument("rmf: empty slot list");
  std::vector<int> sorted = cfg.J;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("rmf: repeated tuple slot");
  for (int j : cfg.J)
    if (j < 0 || j >= slots)
      throw std::invalid_argument("rmf: tuple slot out of range");
  if (cfg.v < 0 || cfg.v >= slots)
    throw std::invalid_argument("rmf: fixed slot out of range");
  if (std::find(cfg.J.begin(), cfg.J.end(), cfg.v) != cfg.J.end())
    throw std::invalid_argument("rmf: fixed slot overlaps tuple slots");
  if (slots - static_cast<int>(cfg.J.size()) - 1 < 2)
    throw std::invalid_argument("rmf: fewer than two free slots");
  if (fs.size() != cfg.J.size())
    throw std::invalid_argument("rmf: tuple size mismatch");
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (!(fs[i].space() ==
          cfg.varpi.spaces()[static_cast<std::size_t>(cfg.J[i])]))
      throw std::invalid_argument("rmf: tuple space mismatch");
    if (!same_grid(fs[i].grid(), fs[0].grid()))
      throw std::invalid_argument("rmf: mixed grids");
  }
}

// averages of every member over the chain of cubes containing a cell,
// finest first
std::vector<std::vector<cxvec>> cell_chain(const std::vector<GridFunction>& fs,
                                           i64 cell) {
  const Grid& g = fs[0].grid();
  std::vector<std::vector<cxvec>> chain;
  Cube q = g.cell_cube(cell);
  while (true) {
    std::vector<cxvec> tuple;
    tuple.reserve(fs.size());
    for (const auto& f : fs) tuple.push_back(average(f, q));
    chain.push_back(std::move(tuple));
    if (q.scale == g.window().lmax) break;
    q = g.parent(q);
  }
  return chain;
}

}  // namespace

MaximalResult rm_maximal(const std::vector<GridFunction>& fs,
                         const RMConfig& cfg) {
  validate_config(fs, cfg);
  const Grid& g = fs[0].grid();
  MaximalResult res{GridFunction(g, Space::scalar()), true};

  if (cfg.varpi.scalar_product() && !cfg.options.force_estimate) {
    // running maximum of average products, swept from the top scale down
    std::map<Cube, double> best;
    for (int l = g.window().lmax; l >= g.window().lmin; --l) {
      for (const Cube& q : g.cubes(l)) {
        double p = 1;
        for (const auto& f : fs) p *= std::abs(average(f, q)[0]);
        const double b =
            (l == g.window().lmax) ? p : std::max(p, best.at(g.parent(q)));
        best.emplace(q, b);
        if (l == g.window().lmin)
          g.for_each_cell(q, [&](i64 c) { res.values.at(c)[0] = b; });
      }
    }
    return res;
  }

  Rng master(cfg.options.seed);
  for (i64 c = 0; c < g.cell_count(); ++c) {
    RmOptions opt = cfg.options;
    opt.seed = master.fork(static_cast<std::uint64_t>(c)).u64();
    const RmResult r = rm_norm(cfg.varpi, cell_chain(fs, c), cfg.J, cfg.v, opt);
    res.values.at(c)[0] = r.value;
    res.exact = res.exact && r.exact;
  }
  return res;
}

MaximalResult classic_mr(const GridFunction& f, int power, int rounds,
                         std::uint64_t seed) {
  if (power != 1 && power != 2)
    throw std::invalid_argument("classic_mr: power must be 1 or 2");
  if (rounds < 1) throw std::invalid_argument("classic_mr: rounds < 1");
  const Grid& g = f.grid();
  const Space& X = f.space();
  MaximalResult res{GridFunction(g, Space::scalar()), true};

  if (is_hilbert(X)) {
    // both powers collapse to the sup of average norms along the chain:
    // one-point scalings attain the mean-square upper bound
    for (i64 c = 0; c < g.cell_count(); ++c) {
      double best = 0;
      Cube q = g.cell_cube(c);
      while (true) {
        best = std::max(best, X.norm(average(f, q)));
        if (q.scale == g.window().lmax) break;
        q = g.parent(q);
      }
      res.values.at(c)[0] = best;
    }
    return res;
  }

  res.exact = false;
  Rng master(seed);
  for (i64 c = 0; c < g.cell_count(); ++c) {
    std::vector<cxvec> xs;
    Cube q = g.cell_cube(c);
    while (true) {
      xs.push_back(average(f, q));
      if (q.scale == g.window().lmax) break;
      q = g.parent(q);
    }
    const std::size_t K = xs.size();
    Rng rng = master.fork(static_cast<std::uint64_t>(c));
    double best = 0;
    // one-point scalings first: exact and often optimal
    for (const auto& x : xs) {
      RadOptions opt;
      opt.exponent = power;
      opt.seed = rng.u64();
      best = std::max(best, rad_norm(X, {x}, opt).value);
    }
    for (int round = 0; round < rounds; ++round) {
      cxvec lam(K);
      double s = 0;
      for (auto& z : lam) {
        z = rng.cnormal();
        s += std::norm(z);
      }
      if (!(s > 0)) continue;
      s = std::sqrt(s);
      std::vector<cxvec> scaled(K);
      for (std::size_t k = 0; k < K; ++k) {
        scaled[k] = xs[k];
        for (auto& z : scaled[k]) z *= lam[k] / s;
      }
      RadOptions opt;
      opt.exponent = power;
      opt.seed = rng.u64();
      best = std::max(best, rad_norm(X, scaled, opt).value);
    }
    res.values.at(c)[0] = best;
  }
  return res;
}

LpEstimate rmf_lp_estimate(const Grid& g, const RMConfig& cfg, int trials,
                           std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("rmf_lp_estimate: trials < 1");
  if (cfg.exponents.size() != cfg.J.size())
    throw std::invalid_argument("rmf_lp_estimate: one exponent per slot");
  double ipj = 0;
  for (double p : cfg.exponents) {
    if (!(p > 1.0))
      throw std::invalid_argument("rmf_lp_estimate: exponents must exceed 1");
    if (p != std::numeric_limits<double>::infinity()) ipj += 1.0 / p;
  }
  if (!(ipj > 0))
    throw std::invalid_argument("rmf_lp_estimate: all exponents infinite");

  std::vector<Space> slot_spaces;
  for (int j : cfg.J) {
    if (j < 0 || j >= cfg.varpi.slots())
      throw std::invalid_argument("rmf_lp_estimate: tuple slot out of range");
    slot_spaces.push_back(cfg.varpi.spaces()[static_cast<std::size_t>(j)]);
  }

  LpEstimate est;
  est.p_out = 1.0 / ipj;
  const std::vector<Cube> all = g.all_cubes();
  Rng master(seed);
  for (int trial = 0; trial < trials; ++trial) {
    Rng r = master.fork(static_cast<std::uint64_t>(trial));
    std::vector<GridFunction> fs;
    for (std::size_t i = 0; i < slot_spaces.size(); ++i) {
      const Space& V = slot_spaces[i];
      if (trial == 0) {
        cxvec e0(static_cast<std::size_t>(V.dim()), cx{0, 0});
        e0[0] = 1.0;
        fs.push_back(GridFunction::constant(g, V, e0));
      } else if (trial % 2 == 0) {
        // a single bump: random vector spread over one random cube
        const Cube& q = all[static_cast<std::size_t>(r.index(all.size()))];
        cxvec v(static_cast<std::size_t>(V.dim()));
        for (auto& z : v) z = r.cnormal();
        GridFunction f(g, V);
        g.for_each_cell(q, [&](i64 c) {
          std::copy(v.begin(), v.end(), f.at(c).begin());
        });
        fs.push_back(std::move(f));
      } else {
        fs.push_back(GridFunction::random(g, V, r));
      }
    }
    const MaximalResult rm = rm_maximal(fs, cfg);
    est.exact_path = est.exact_path && rm.exact;
    double den = 1;
    for (std::size_t i = 0; i < fs.size(); ++i)
      den *= fs[i].lp_norm(cfg.exponents[i]);
    if (!(den > 0) || !std::isfinite(den)) continue;
    const double ratio = rm.values.lp_norm(est.p_out) / den;
    if (std::isfinite(ratio) && ratio > est.value) {
      est.value = ratio;
      est.witness_trial = trial;
    }
  }
  return est;
}

}  // namespace dycalc
