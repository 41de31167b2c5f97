#pragma once

#include "pvflow/path.hpp"
#include "pvflow/pvariation.hpp"
#include "pvflow/quadrature.hpp"
#include "pvflow/rng.hpp"

#include <Eigen/Cholesky>

namespace pvflow {

// ---------------------------------------------------------------------------
// Fractional Brownian motion

/// Var(X_1) = 1/(2H) + int_0^inf ((1+s)^(H-1/2) - s^(H-1/2))^2 ds.
/// The improper integral is split at s = 1 and the tail substituted s = 1/w,
/// leaving two finite integrals with integrable endpoint singularities that
/// tanh-sinh quadrature handles to ~1e-12.
inline double fbm_var1(double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0))
    throw std::invalid_argument("fbm_var1: hurst must lie in (0, 1)");
  const double e = hurst - 0.5;
  const double head = tanh_sinh(
      [e](double s) {
        const double d = std::pow(1.0 + s, e) - std::pow(s, e);
        return d * d;
      },
      0.0, 1.0, 1e-13);
  const double tail = tanh_sinh(
      [e, hurst](double w) {
        const double d = std::pow(1.0 + w, e) - 1.0;
        return std::pow(w, -1.0 - 2.0 * hurst) * d * d;
      },
      0.0, 1.0, 1e-13);
  return 1.0 / (2.0 * hurst) + head + tail;
}

/// Covariance Gamma^H(s,t) = (t^2H + s^2H - |t-s|^2H)/2 * Var(X_1).
inline double fbm_covariance(double hurst, double s, double t, double var1) {
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(t, h2) + std::pow(s, h2) - std::pow(std::abs(t - s), h2)) * var1;
}

struct FBMSpec {
  double hurst = 0.7;       // H in (1/2, 1)
  int grid_points = 1025;   // samples including t = 0
  double horizon = 1.0;
  std::uint64_t seed = 1;
};

/// Exact Gaussian sampling of fBm on a uniform grid by Cholesky factorization
/// of the covariance.  O(n^3) once per grid; the factor is reused across
/// seeds, which is what ensemble probes need.
class FbmSampler {
 public:
  FbmSampler(double hurst, int grid_points, double horizon)
      : hurst_(hurst), grid_points_(grid_points), horizon_(horizon) {
    if (!(hurst > 0.5 && hurst < 1.0))
      throw std::invalid_argument("FbmSampler: hurst must lie in (1/2, 1)");
    if (grid_points < 2) throw std::invalid_argument("FbmSampler: grid too small");
    var1_ = fbm_var1(hurst);
    const int n = grid_points - 1;  // random coordinates (t=0 is pinned at 0)
    Matrix cov(n, n);
    for (int i = 0; i < n; ++i) {
      const double ti = horizon * (i + 1) / n;
      for (int j = 0; j <= i; ++j) {
        const double tj = horizon * (j + 1) / n;
        cov(i, j) = cov(j, i) = fbm_covariance(hurst, ti, tj, var1_);
      }
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error(
          "fbm covariance factorization failed (grid numerically non-PSD; shrink grid)");
    chol_ = llt.matrixL();
  }

  double var1() const { return var1_; }
  double hurst() const { return hurst_; }

  SampledPath sample(std::uint64_t seed) const {
    const int n = grid_points_ - 1;
    Philox rng(seed);
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    const Vector x = chol_ * z;
    SampledPath path;
    path.kind = PathKind::ContinuousLinear;
    path.variation_exponent = 1.0 / hurst_;  // finite p-variation a.s. for p > 1/H
    path.times.resize(grid_points_);
    path.values.resize(grid_points_);
    for (int i = 0; i < grid_points_; ++i) {
      path.times[i] = horizon_ * i / n;
      Vector v(1);
      v << (i == 0 ? 0.0 : x[i - 1]);
      path.values[i] = v;
    }
    return path;
  }

 private:
  double hurst_, horizon_, var1_;
  int grid_points_;
  Matrix chol_;
};

inline SampledPath sample_fbm(const FBMSpec& spec) {
  return FbmSampler(spec.hurst, spec.grid_points, spec.horizon).sample(spec.seed);
}

// ---------------------------------------------------------------------------
// Pure-jump Levy drivers

/// Symmetric stable jump intensity: density scale * |x|^(-1-alpha) dx.
struct StableMeasure {
  double alpha = 1.3;  // in (0, 2)
  double scale = 1.0;

  /// nu(|x| > r) = 2 scale r^-alpha / alpha.
  double tail_mass(double r) const {
    return 2.0 * scale * std::pow(r, -alpha) / alpha;
  }
};

struct CompoundPoissonAtom {
  double size = 1.0;
  double rate = 1.0;
};

/// A pure-jump Levy driver: an optional symmetric stable component plus a
/// finite compound-Poisson component, truncated below at |x| <= eps.  Small
/// jumps in (eps, 1] may be compensated by the drift -t int x nu(dx).
struct LevySpec {
  std::optional<StableMeasure> stable;
  std::vector<CompoundPoissonAtom> atoms;
  double truncation = 1e-3;  // eps > 0
  bool compensate = true;
  std::uint64_t seed = 1;
};

/// Blumenthal-Getoor index: inf of exponents a with int_{|y|<=1} |y|^a nu(dy)
/// finite.  Closed form: the stable component contributes its alpha, a finite
/// measure contributes 0.
inline double bg_index(const LevySpec& spec) {
  return spec.stable ? spec.stable->alpha : 0.0;
}

/// Finite p-variation criterion for p < 2: true iff the process has no
/// Gaussian part (by construction here) and int_{|x|<=1} |x|^p nu(dx) < inf.
/// For the stable family the integral int_0^1 r^{p-1-alpha} dr is finite iff
/// p > alpha; a finite measure always satisfies it.
inline bool bretagnolle_check(const LevySpec& spec, double p) {
  if (!(p < 2.0))
    throw std::invalid_argument("bretagnolle_check: criterion applies for p < 2");
  if (spec.stable && !(p > spec.stable->alpha)) return false;
  return true;
}

namespace detail {

struct JumpEvent {
  double time;
  double size;
};

/// Marked Poisson sample of the stable measure restricted to lo < |x| <= hi
/// (hi = +inf allowed), on [0, horizon].
inline std::vector<JumpEvent> stable_annulus_jumps(const StableMeasure& m, double lo,
                                                   double hi, double horizon,
                                                   Philox& rng) {
  const double hi_term = std::isinf(hi) ? 0.0 : std::pow(hi, -m.alpha);
  const double lo_term = std::pow(lo, -m.alpha);
  const double intensity = 2.0 * m.scale * (lo_term - hi_term) / m.alpha;
  const std::uint64_t count = rng.poisson(intensity * horizon);
  std::vector<JumpEvent> events;
  events.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const double t = rng.uniform() * horizon;
    // inverse transform on the annulus tail mass
    const double u = rng.uniform();
    const double mag = std::pow(lo_term - u * (lo_term - hi_term), -1.0 / m.alpha);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    events.push_back({t, sign * mag});
  }
  return events;
}

/// Assemble a cadlag path from jump events plus linear drift.
inline SampledPath jumps_to_path(std::vector<JumpEvent> events, double drift,
                                 double horizon) {
  std::sort(events.begin(), events.end(),
            [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  // merge (measure-zero) coincident times so sample times stay strictly increasing
  std::vector<JumpEvent> merged;
  for (const auto& e : events) {
    if (e.time <= 0.0 || e.time >= horizon || e.size == 0.0) continue;
    if (!merged.empty() && merged.back().time == e.time)
      merged.back().size += e.size;
    else
      merged.push_back(e);
  }
  SampledPath path;
  path.kind = PathKind::Cadlag;
  auto push = [&path](double t, double x) {
    path.times.push_back(t);
    Vector v(1);
    v << x;
    path.values.push_back(v);
  };
  push(0.0, 0.0);
  double level = 0.0;
  for (const auto& e : merged) {
    const double left = level + drift * e.time;
    level += e.size;
    Vector lv(1);
    lv << left;
    path.jumps.emplace(path.times.size(), lv);
    push(e.time, left + e.size);
  }
  push(horizon, level + drift * horizon);
  return path;
}

}  // namespace detail

/// Sample a truncated pure-jump Levy path on [0, horizon]: jumps of size > eps
/// drawn as a marked Poisson process, jumps in (eps, 1] compensated by drift
/// when enabled.  The jump list is stored explicitly for the cadlag machinery.
inline SampledPath sample_levy(const LevySpec& spec, double horizon) {
  if (!(spec.truncation > 0.0))
    throw std::invalid_argument(
        "sample_levy: truncation eps must be > 0 (eps = 0 has infinite expected jump count)");
  Philox rng(spec.seed);
  std::vector<detail::JumpEvent> events;
  double drift = 0.0;
  if (spec.stable) {
    auto stable_events = detail::stable_annulus_jumps(
        *spec.stable, spec.truncation, std::numeric_limits<double>::infinity(), horizon,
        rng);
    events.insert(events.end(), stable_events.begin(), stable_events.end());
    // symmetric measure: the compensator over eps < |x| <= 1 vanishes
  }
  for (std::size_t a = 0; a < spec.atoms.size(); ++a) {
    const auto& atom = spec.atoms[a];
    if (std::abs(atom.size) <= spec.truncation) continue;
    Philox stream = rng.split(2 + a);  // one counter stream per atom
    const std::uint64_t count = stream.poisson(atom.rate * horizon);
    for (std::uint64_t k = 0; k < count; ++k)
      events.push_back({stream.uniform() * horizon, atom.size});
    if (spec.compensate && std::abs(atom.size) <= 1.0) drift -= atom.rate * atom.size;
  }
  SampledPath path = detail::jumps_to_path(std::move(events), drift, horizon);
  if (spec.stable) path.variation_exponent = std::min(2.0, spec.stable->alpha + 0.1);
  return path;
}

// ---------------------------------------------------------------------------
// Variation probes

/// Trend of exact p-variation across a refinement or truncation sweep.
struct ProbeReport {
  std::vector<double> levels;  // grid sizes or eps values
  std::vector<double> values;  // p-variation per level

  std::vector<double> ratios() const {
    std::vector<double> r;
    for (std::size_t i = 1; i < values.size(); ++i)
      r.push_back(values[i] / std::max(values[i - 1], 1e-300));
    return r;
  }

  /// All refinement ratios from the k-th on stay within rel_tol of 1.
  bool plateau_from(int k, double rel_tol) const {
    const auto r = ratios();
    if (static_cast<int>(r.size()) < k) return false;
    for (std::size_t i = static_cast<std::size_t>(k) - 1; i < r.size(); ++i)
      if (std::abs(r[i] - 1.0) > rel_tol) return false;
    return true;
  }

  bool final_ratio_within(double rel_tol) const {
    const auto r = ratios();
    return !r.empty() && std::abs(r.back() - 1.0) <= rel_tol;
  }

  double growth() const {
    return values.empty() ? 0.0 : values.back() / std::max(values.front(), 1e-300);
  }
};

/// Exact p-variation across nested dyadic subsamples of one path realization.
/// For fBm, expected: a plateauing trend for p > 1/H, a divergent trend for
/// p < 1/H.
inline ProbeReport dyadic_variation_probe(const SampledPath& sample, double p,
                                          int refinements) {
  if (!(p >= 1.0)) throw std::invalid_argument("dyadic_variation_probe: p must be >= 1");
  const std::size_t n = sample.size() - 1;
  ProbeReport report;
  for (int level = refinements; level >= 0; --level) {
    const std::size_t step = static_cast<std::size_t>(1) << level;
    if (step > n / 2) continue;
    SampledPath sub;
    sub.kind = PathKind::ContinuousLinear;
    for (std::size_t i = 0; i <= n; i += step) {
      sub.times.push_back(sample.times[i]);
      sub.values.push_back(sample.values[i]);
    }
    report.levels.push_back(static_cast<double>(n / step));
    report.values.push_back(p_variation_exact(sub, p).value);
  }
  return report;
}

inline ProbeReport fbm_variation_probe(const FBMSpec& spec, double p, int refinements) {
  FbmSampler sampler(spec.hurst, spec.grid_points, spec.horizon);
  return dyadic_variation_probe(sampler.sample(spec.seed), p, refinements);
}

/// Exact p-variation of coupled samples across a decreasing truncation sweep.
/// Levels are coupled through annulus superposition: level k adds the jumps
/// with magnitude in (eps_k, eps_{k-1}] to the previous realization, each
/// annulus drawn from its own counter stream.  Expected: convergent trend as
/// eps -> 0 iff the p-variation criterion holds.
inline ProbeReport levy_variation_probe(const LevySpec& spec, double p,
                                        const std::vector<double>& eps_levels,
                                        double horizon) {
  if (!(p < 2.0)) throw std::invalid_argument("levy_variation_probe: p must be < 2");
  for (std::size_t i = 1; i < eps_levels.size(); ++i)
    if (!(eps_levels[i] < eps_levels[i - 1]))
      throw std::invalid_argument("levy_variation_probe: eps levels must decrease");
  ProbeReport report;
  Philox base(spec.seed);
  std::vector<detail::JumpEvent> events;
  if (spec.stable) {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < eps_levels.size(); ++k) {
      Philox stream = base.split(100 + k);
      auto annulus = detail::stable_annulus_jumps(*spec.stable, eps_levels[k], prev,
                                                  horizon, stream);
      events.insert(events.end(), annulus.begin(), annulus.end());
      prev = eps_levels[k];
      const SampledPath path = detail::jumps_to_path(events, 0.0, horizon);
      report.levels.push_back(eps_levels[k]);
      report.values.push_back(p_variation_exact(path, p).value);
    }
    return report;
  }
  // compound Poisson: sample once, then filter by truncation level
  LevySpec full = spec;
  full.truncation = std::min(eps_levels.back(), spec.truncation);
  const SampledPath all = sample_levy(full, horizon);
  for (double eps : eps_levels) {
    std::vector<detail::JumpEvent> kept;
    for (const auto& [i, left] : all.jumps) {
      const double size = (all.values[i] - left)[0];
      if (std::abs(size) > eps) kept.push_back({all.times[i], size});
    }
    const SampledPath path = detail::jumps_to_path(std::move(kept), 0.0, horizon);
    report.levels.push_back(eps);
    report.values.push_back(p_variation_exact(path, p).value);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic smooth drivers

/// x(t) = amplitude * sin(2 pi cycles t / horizon), sampled uniformly.
inline SampledPath sine_path(double amplitude, double cycles, int samples,
                             double horizon = 1.0) {
  if (samples < 2) throw std::invalid_argument("sine_path: need >= 2 samples");
  SampledPath path;
  path.kind = PathKind::ContinuousLinear;
  path.variation_exponent = 1.0;
  const double w = 2.0 * 3.141592653589793238462643383279 * cycles / horizon;
  for (int i = 0; i < samples; ++i) {
    const double t = horizon * i / (samples - 1);
    path.times.push_back(t);
    Vector v(1);
    v << amplitude * std::sin(w * t);
    path.values.push_back(v);
  }
  return path;
}

}  // namespace pvflow
