#pragma once

// Brute-force reference implementations used only by tests. Each one
// follows the textbook definition directly and shares no code with the
// library.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline double ecdf(const std::vector<double> &sample, double x) {
  std::size_t c = 0;
  for (double v : sample)
    if (v <= x)
      ++c;
  return static_cast<double>(c) / static_cast<double>(sample.size());
}

/// Enumerates every pooled point and every left limit (value at the next
/// smaller pooled point, or below everything).
inline double ks_statistic(const std::vector<double> &a, const std::vector<double> &b) {
  std::set<double> pool(a.begin(), a.end());
  pool.insert(b.begin(), b.end());
  double best = 0.0;
  double prev_fa = 0.0, prev_fb = 0.0; // left limits
  for (double x : pool) {
    const double fa = ecdf(a, x), fb = ecdf(b, x);
    best = std::max(best, std::abs(fa - fb));
    best = std::max(best, std::abs(prev_fa - prev_fb));
    prev_fa = fa;
    prev_fb = fb;
  }
  return best;
}

/// Kolmogorov series summed to k = 10000 in extended precision.
inline long double ks_series(long double d) {
  long double sum = 0.0L;
  for (int k = 1; k <= 10000; ++k) {
    const long double term = std::exp(-2.0L * k * k * d * d);
    sum += (k % 2 == 1) ? term : -term;
  }
  return 2.0L * sum;
}

inline double auc_pairwise(const std::vector<double> &pos, const std::vector<double> &neg) {
  std::uint64_t twice = 0;
  for (double p : pos)
    for (double n : neg)
      twice += p > n ? 2 : (p == n ? 1 : 0);
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline bool is_subsequence(const std::vector<std::string> &sub,
                           const std::vector<std::string> &seq) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < seq.size() && j < sub.size(); ++i)
    if (seq[i] == sub[j])
      ++j;
  return j == sub.size();
}

/// LCS length by enumerating every subsequence of `a` (|a| <= ~16).
inline std::size_t lcs_exhaustive(const std::vector<std::string> &a,
                                  const std::vector<std::string> &b) {
  std::size_t best = 0;
  const std::uint32_t subsets = 1u << a.size();
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
    if (bits <= best)
      continue;
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i))
        sub.push_back(a[i]);
    if (is_subsequence(sub, b))
      best = bits;
  }
  return best;
}

inline double rouge_from_lcs(std::size_t lcs, std::size_t cand, std::size_t ref, bool f1) {
  const double r = static_cast<double>(lcs) / static_cast<double>(ref);
  if (!f1)
    return r;
  const double p = cand == 0 ? 0.0 : static_cast<double>(lcs) / static_cast<double>(cand);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double> &x, const std::vector<double> &y) {
  auto ranks = [](const std::vector<double> &v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

} // namespace oracle
