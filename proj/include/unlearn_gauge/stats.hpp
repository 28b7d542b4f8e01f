#pragma once

// Numerical kernel: empirical CDFs, the two-sample Kolmogorov-Smirnov test,
// ROC AUC and the LCS-based Rouge-L score.

#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ugauge {

/// Result of a two-sample KS test.
struct KSResult {
  double statistic = 0.0; // sup |F_a - F_b|
  double adjusted = 0.0;  // statistic * sqrt(n m / (n + m))
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// Series stops at the first term with magnitude below this...
inline constexpr double kKsTermTolerance = 1e-12;
/// ...or after this many terms.
inline constexpr int kKsMaxTerms = 100;

//==============================================================================

/// Fraction of the sample that is <= x.
inline double ecdf_eval(std::span<const double> sample, double x) {
  if (sample.empty())
    throw DomainError("ecdf_eval: empty sample");
  const auto count = std::count_if(sample.begin(), sample.end(),
                                   [x](double v) { return v <= x; });
  return static_cast<double>(count) / static_cast<double>(sample.size());
}

/// Two-sample KS statistic, max |F_a(x) - F_b(x)| over pooled sample points.
///
/// Both ECDFs are right-continuous steps that only jump at pooled points, so
/// the left limit at any pooled point equals the value at the preceding
/// pooled point (or 0). Evaluating at every pooled point therefore gives the
/// full sup-norm.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw DomainError("ks_statistic: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  const auto n = static_cast<double>(sa.size());
  const auto m = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j]))
      x = sa[i];
    else
      x = sb[j];
    while (i < sa.size() && sa[i] <= x)
      ++i;
    while (j < sb.size() && sb[j] <= x)
      ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return best;
}

/// Below this argument ks_pvalue switches to the complementary series.
inline constexpr double kKsSmallArgument = 1.0;

/// Asymptotic Kolmogorov p-value, p = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 d^2).
///
/// Stops once a term drops below kKsTermTolerance, or returns 1 when the
/// series has not converged within kKsMaxTerms. For d < kKsSmallArgument the
/// alternating terms sit close to 1 and cancel, leaving rounding noise near
/// 1e-13 that breaks monotonicity. There the equivalent form
///   p = 1 - sqrt(2 pi) / d * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 d^2))
/// is used, whose terms fall off quickly at small d.
inline double ks_pvalue(double adjusted) {
  if (!(adjusted >= 0.0))
    throw DomainError("ks_pvalue: adjusted statistic must be >= 0");
  const double d2 = adjusted * adjusted;
  if (adjusted < kKsSmallArgument) {
    if (adjusted == 0.0)
      return 1.0;
    constexpr double pi = 3.14159265358979323846;
    double sum = 0.0;
    for (int k = 1; k <= kKsMaxTerms; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi * pi / (8.0 * d2));
      sum += term;
      if (term < kKsTermTolerance * 1e-4)
        break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / adjusted * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= kKsMaxTerms; ++k) {
    const double term = std::exp(-2.0 * k * k * d2);
    sum += (k % 2 == 1) ? term : -term;
    if (term < kKsTermTolerance)
      return std::clamp(2.0 * sum, 0.0, 1.0);
  }
  return 1.0;
}

inline double ks_size_adjust(double statistic, std::size_t n, std::size_t m) {
  const auto nd = static_cast<double>(n);
  const auto md = static_cast<double>(m);
  return statistic * std::sqrt(nd * md / (nd + md));
}

inline KSResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  KSResult r;
  r.statistic = ks_statistic(a, b);
  r.n = a.size();
  r.m = b.size();
  r.adjusted = ks_size_adjust(r.statistic, r.n, r.m);
  r.p_value = ks_pvalue(r.adjusted);
  return r;
}

//==============================================================================

/// P(member > non-member) over all pairs, ties counted as one half.
inline double auc_roc(std::span<const double> members, std::span<const double> nonmembers) {
  if (members.empty() || nonmembers.empty())
    throw DomainError("auc_roc: both score sets must be non-empty");
  std::vector<double> neg(nonmembers.begin(), nonmembers.end());
  std::sort(neg.begin(), neg.end());
  // Twice the Mann-Whitney U, kept integral so the quotient is exact.
  std::uint64_t twice_u = 0;
  for (double s : members) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(lo, neg.end(), s);
    twice_u += 2 * static_cast<std::uint64_t>(lo - neg.begin()) +
               static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = 2.0 * static_cast<double>(members.size()) *
                       static_cast<double>(nonmembers.size());
  return static_cast<double>(twice_u) / pairs;
}

//==============================================================================
// Rouge-L

enum class RougeMode { recall, f1 };

/// Longest common subsequence length, O(|a| |b|) time and O(|b|) memory.
template <class T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <class T>
double rouge_l(std::span<const T> candidate, std::span<const T> reference, RougeMode mode) {
  if (reference.empty())
    throw DomainError("rouge_l: empty reference");
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  const double recall = lcs / static_cast<double>(reference.size());
  if (mode == RougeMode::recall)
    return recall;
  const double precision =
      candidate.empty() ? 0.0 : lcs / static_cast<double>(candidate.size());
  if (precision + recall == 0.0)
    return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

/// Lowercased whitespace tokenization used for every Rouge comparison.
inline std::vector<std::string> rouge_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(tok));
  }
  return out;
}

inline double rouge_l(std::string_view candidate, std::string_view reference, RougeMode mode) {
  const auto c = rouge_tokens(candidate);
  const auto r = rouge_tokens(reference);
  return rouge_l(std::span<const std::string>(c), std::span<const std::string>(r), mode);
}

} // namespace ugauge
