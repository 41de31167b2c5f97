#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pvflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class PathKind { ContinuousLinear, Cadlag };

/// A finite time-ordered sequence of samples with an interpolation rule.
///
/// Continuous paths interpolate linearly between samples.  Cadlag paths are
/// right-continuous: `values[i]` is X(t_i) and, at indices listed in `jumps`,
/// the pre-jump left limit X(t_i-) is stored separately.  Between samples a
/// cadlag path drifts linearly towards the next left limit.
template <class V>
struct BasicPath {
  std::vector<double> times;   // strictly increasing
  std::vector<V> values;       // value at times[i] (right value for cadlag)
  PathKind kind = PathKind::ContinuousLinear;
  std::map<std::size_t, V> jumps;  // index -> left limit, left limit != value

  // Optional a-priori variation exponent (known a.s. exponent of a
  // stochastic driver); consumers may use it instead of computing one.
  std::optional<double> variation_exponent;

  std::size_t size() const { return times.size(); }
  double start_time() const { return times.front(); }
  double end_time() const { return times.back(); }

  bool has_jump(std::size_t i) const { return jumps.count(i) != 0; }

  const V& left_limit(std::size_t i) const {
    auto it = jumps.find(i);
    return it == jumps.end() ? values[i] : it->second;
  }

  /// Index of the last sample with times[i] <= t.
  std::size_t segment_index(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) throw std::invalid_argument("time before path start");
    return static_cast<std::size_t>(it - times.begin()) - 1;
  }

  V value_at(double t) const {
    if (t < times.front() || t > times.back())
      throw std::invalid_argument("time outside path domain");
    std::size_t i = segment_index(t);
    if (i + 1 == times.size() || t == times[i]) return values[i];
    const double w = (t - times[i]) / (times[i + 1] - times[i]);
    const V& next =
        kind == PathKind::Cadlag ? left_limit(i + 1) : values[i + 1];
    return values[i] + w * (next - values[i]);
  }

  void validate() const {
    if (times.empty()) throw std::invalid_argument("empty path");
    if (times.size() != values.size())
      throw std::invalid_argument("times/values length mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1]))
        throw std::invalid_argument("times not strictly increasing");
    if (kind == PathKind::ContinuousLinear && !jumps.empty())
      throw std::invalid_argument("continuous path cannot carry jumps");
    for (const auto& [i, left] : jumps) {
      if (i == 0 || i >= values.size())
        throw std::invalid_argument("jump index out of range");
      if ((values[i] - left).norm() == 0.0)
        throw std::invalid_argument("zero-magnitude declared jump");
    }
  }
};

using SampledPath = BasicPath<Vector>;
using MatrixPath = BasicPath<Matrix>;

inline int dim(const SampledPath& p) { return static_cast<int>(p.values.front().size()); }

/// Restriction to [s, t], interpolating the endpoints when they fall between
/// samples.  A jump exactly at s is dropped (its increment precedes the
/// interval); a jump exactly at t is kept.
template <class V>
BasicPath<V> restrict(const BasicPath<V>& path, double s, double t) {
  if (s > t) throw std::invalid_argument("empty interval");
  if (s < path.start_time() || t > path.end_time())
    throw std::invalid_argument("interval outside path domain");
  BasicPath<V> out;
  out.kind = path.kind;
  out.variation_exponent = path.variation_exponent;
  out.times.push_back(s);
  out.values.push_back(path.value_at(s));
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path.times[i] <= s || path.times[i] > t) continue;
    if (path.has_jump(i)) out.jumps.emplace(out.times.size(), path.left_limit(i));
    out.times.push_back(path.times[i]);
    out.values.push_back(path.values[i]);
  }
  if (out.times.back() < t) {
    out.times.push_back(t);
    out.values.push_back(path.value_at(t));
  }
  return out;
}

/// Partition candidates over [s, t]: endpoint values, interior sample values,
/// and at each jump both the left limit and the value.  The supremum defining
/// the p-variation of a piecewise-linear (or cadlag) path is attained on
/// subsets of these points.
template <class V>
std::vector<V> partition_candidates(const BasicPath<V>& path, double s, double t) {
  BasicPath<V> r = restrict(path, s, t);
  std::vector<V> verts;
  verts.reserve(r.size() + r.jumps.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r.has_jump(i)) verts.push_back(r.left_limit(i));
    verts.push_back(r.values[i]);
  }
  return verts;
}

template <class V>
std::vector<V> partition_candidates(const BasicPath<V>& path) {
  return partition_candidates(path, path.start_time(), path.end_time());
}

/// Concatenation in time.  Endpoint values must match exactly unless a jump
/// at the junction is declared, in which case the result is cadlag.
template <class V>
BasicPath<V> concat(const BasicPath<V>& a, const BasicPath<V>& b,
                    bool jump_at_junction = false) {
  if (a.end_time() != b.start_time())
    throw std::invalid_argument("concat: time ranges do not abut");
  const bool matches = (a.values.back() - b.values.front()).norm() == 0.0;
  if (!matches && !jump_at_junction)
    throw std::invalid_argument("concat: endpoint value mismatch without declared jump");
  BasicPath<V> out;
  out.kind = (a.kind == PathKind::Cadlag || b.kind == PathKind::Cadlag ||
              (!matches && jump_at_junction))
                 ? PathKind::Cadlag
                 : PathKind::ContinuousLinear;
  out.times = a.times;
  out.values = a.values;
  out.jumps = a.jumps;
  if (!matches) {
    // junction sample takes b's initial value; a's final value is the left limit
    out.jumps.emplace(out.times.size() - 1, a.values.back());
    out.values.back() = b.values.front();
  }
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (b.has_jump(i)) out.jumps.emplace(out.times.size(), b.left_limit(i));
    out.times.push_back(b.times[i]);
    out.values.push_back(b.values[i]);
  }
  return out;
}

/// Time reversal (X_{T-u})_u for continuous paths, on the same time range.
/// Cadlag reversal is not supported: reversing right-continuity is outside
/// the scope of this library.
template <class V>
BasicPath<V> time_reverse(const BasicPath<V>& path) {
  if (path.kind == PathKind::Cadlag)
    throw std::invalid_argument("time_reverse: cadlag paths not supported");
  BasicPath<V> out;
  out.kind = path.kind;
  out.variation_exponent = path.variation_exponent;
  const double a = path.start_time(), b = path.end_time();
  const std::size_t n = path.size();
  out.times.resize(n);
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.times[i] = a + b - path.times[n - 1 - i];
    out.values[i] = path.values[n - 1 - i];
  }
  return out;
}

/// Pointwise sum/difference of paths sampled on the same grid.
template <class V>
BasicPath<V> path_combine(const BasicPath<V>& a, const BasicPath<V>& b, double ca,
                          double cb) {
  if (a.times != b.times || a.kind != b.kind)
    throw std::invalid_argument("path_combine: incompatible grids");
  BasicPath<V> out;
  out.kind = a.kind;
  out.times = a.times;
  out.values.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.values.push_back(ca * a.values[i] + cb * b.values[i]);
  for (const auto& [i, left] : a.jumps) {
    if (!b.has_jump(i) && (out.values[i] - (ca * left + cb * b.values[i])).norm() == 0.0)
      continue;
    out.jumps.emplace(i, ca * left + cb * b.left_limit(i));
  }
  return out;
}

template <class V>
BasicPath<V> path_sum(const BasicPath<V>& a, const BasicPath<V>& b) {
  return path_combine(a, b, 1.0, 1.0);
}

template <class V>
BasicPath<V> path_difference(const BasicPath<V>& a, const BasicPath<V>& b) {
  return path_combine(a, b, 1.0, -1.0);
}

/// Convenience constructor for scalar continuous paths.
inline SampledPath make_scalar_path(std::vector<double> times, const std::vector<double>& xs) {
  SampledPath p;
  p.times = std::move(times);
  p.values.reserve(xs.size());
  for (double x : xs) {
    Vector v(1);
    v << x;
    p.values.push_back(v);
  }
  p.validate();
  return p;
}

}  // namespace pvflow
