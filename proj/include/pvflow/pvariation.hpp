#pragma once

#include "pvflow/path.hpp"

namespace pvflow {

/// p-variation of a path over an interval:
///   sup over finite partitions of (sum |X(t_k) - X(t_{k-1})|^p)^(1/p).
struct VariationNorm {
  double p = 1.0;
  double value = 0.0;
  double s = 0.0, t = 0.0;
};

/// Exact p-variation by dynamic programming over partition candidates.
///
/// For p >= 1 and piecewise-linear interpolation the supremum over all
/// partitions is attained on subsets of the sample vertices (moving a
/// partition point along a linear segment varies each |increment|^p term
/// convexly, so it is pushed to a segment endpoint).  For cadlag paths the
/// left limit and the value at each jump both enter as candidates.
/// O(n^2) in the number of candidates; sums accumulate in long double.
template <class V>
VariationNorm p_variation_exact(const BasicPath<V>& path, double p, double s, double t) {
  if (p < 1.0) throw std::invalid_argument("p_variation_exact: p must be >= 1");
  const std::vector<V> verts = partition_candidates(path, s, t);
  const std::size_t n = verts.size();
  VariationNorm out{p, 0.0, s, t};
  if (n < 2) return out;
  std::vector<long double> best(n, 0.0L);
  for (std::size_t j = 1; j < n; ++j) {
    long double b = 0.0L;
    for (std::size_t i = 0; i < j; ++i) {
      const long double cand =
          best[i] + static_cast<long double>(std::pow((verts[j] - verts[i]).norm(), p));
      if (cand > b) b = cand;
    }
    best[j] = b;
  }
  out.value = static_cast<double>(std::pow(best[n - 1], static_cast<long double>(1.0 / p)));
  return out;
}

template <class V>
VariationNorm p_variation_exact(const BasicPath<V>& path, double p) {
  return p_variation_exact(path, p, path.start_time(), path.end_time());
}

/// Partition sum (sum |dX|^p)^(1/p) over a given increasing list of sample
/// indices; always a lower bound for the exact p-variation.
template <class V>
double p_variation_lower_bound(const BasicPath<V>& path, double p,
                               const std::vector<std::size_t>& partition) {
  if (p < 1.0) throw std::invalid_argument("p_variation_lower_bound: p must be >= 1");
  if (partition.size() < 2)
    throw std::invalid_argument("p_variation_lower_bound: need at least two indices");
  long double acc = 0.0L;
  for (std::size_t k = 1; k < partition.size(); ++k) {
    const std::size_t i = partition[k - 1], j = partition[k];
    if (j <= i || j >= path.size())
      throw std::invalid_argument("p_variation_lower_bound: invalid index list");
    acc += static_cast<long double>(std::pow((path.values[j] - path.values[i]).norm(), p));
  }
  return static_cast<double>(std::pow(acc, static_cast<long double>(1.0 / p)));
}

}  // namespace pvflow
