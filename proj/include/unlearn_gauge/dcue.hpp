#pragma once

// Distribution-corrected unlearning evaluation.
//
// The KS gap between the original model M_o and the unlearned model M_u on
// the forget set mixes two effects: knowledge of the forget set that
// survived unlearning, and the systematic drift every fine-tuned model shows
// relative to M_o. The drift is estimated on a validation set that neither
// model was trained on and subtracted before the final KS test.

#include "error.hpp"
#include "score_log.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

namespace ugauge {

/// How the corrected statistic is turned into a p-value.
enum class SizeConvention {
  /// Treat it as a two-sample statistic with n = m = n_eff: S * sqrt(n_eff / 2).
  two_sample,
  /// Treat it as a one-sample statistic: S * sqrt(n_eff).
  one_sample,
};

inline constexpr SizeConvention kDcueSizeConvention = SizeConvention::two_sample;

struct DcueResult {
  double s_ouf = 0.0;   // KS(M_o, M_u) on the forget set
  double s_ouv = 0.0;   // KS(M_o, M_u) on the validation set
  double delta_s = 0.0; // estimated fine-tuning drift
  double s_corr = 0.0;  // s_ouf - delta_s
  std::size_t n_eff = 0;
  std::optional<double> r_dcue;
};

inline double delta_s(double s_ouv, double s_ouf) {
  if (!(s_ouv >= 0.0 && s_ouv <= 1.0) || !(s_ouf >= 0.0 && s_ouf <= 1.0))
    throw DomainError("delta_s: KS statistics must lie in [0, 1]");
  return std::min(s_ouv, s_ouf);
}

/// Computes both KS gaps and the drift correction. r_dcue is left empty.
inline DcueResult correct_statistic(const CtcsSample &u_f, const CtcsSample &o_f,
                                    const CtcsSample &u_v, const CtcsSample &o_v) {
  if (u_f.values.empty() || o_f.values.empty() || u_v.values.empty() || o_v.values.empty())
    throw DomainError("correct_statistic: empty CTCS sample");
  if (u_f.dataset_id != o_f.dataset_id)
    throw Error("correct_statistic: forget-set samples come from different datasets ('" +
                u_f.dataset_id + "' vs '" + o_f.dataset_id + "')");
  if (u_v.dataset_id != o_v.dataset_id)
    throw Error("correct_statistic: validation-set samples come from different datasets ('" +
                u_v.dataset_id + "' vs '" + o_v.dataset_id + "')");

  DcueResult r;
  r.s_ouf = ks_statistic(o_f.values, u_f.values);
  r.s_ouv = ks_statistic(o_v.values, u_v.values);
  r.delta_s = delta_s(r.s_ouv, r.s_ouf);
  r.s_corr = r.s_ouf - r.delta_s;
  r.n_eff = u_f.n();
  return r;
}

inline double dcue_adjusted(double s_corr, std::size_t n_eff,
                            SizeConvention convention = kDcueSizeConvention) {
  const auto n = static_cast<double>(n_eff);
  return convention == SizeConvention::two_sample ? s_corr * std::sqrt(n / 2.0)
                                                  : s_corr * std::sqrt(n);
}

inline DcueResult dcue_score(DcueResult r, SizeConvention convention = kDcueSizeConvention) {
  if (!(r.s_corr >= 0.0 && r.s_corr <= 1.0))
    throw DomainError("dcue_score: s_corr must lie in [0, 1]");
  if (r.n_eff < 1)
    throw DomainError("dcue_score: n_eff must be >= 1");
  r.r_dcue = ks_pvalue(dcue_adjusted(r.s_corr, r.n_eff, convention));
  return r;
}

inline DcueResult evaluate_dcue(const CtcsSample &u_f, const CtcsSample &o_f,
                                const CtcsSample &u_v, const CtcsSample &o_v) {
  return dcue_score(correct_statistic(u_f, o_f, u_v, o_v));
}

/// Full pipeline over four score logs.
///
/// Logs are checked pairwise: both forget-set logs and both validation-set
/// logs must name the same dataset, and each model must be the same across
/// the two datasets. Obviously swapped arguments (an M_o log in the M_u slot
/// while the M_o slot holds another role, or D_v/D_f exchanged) are rejected.
inline DcueResult evaluate_dcue(const TokenScoreLog &log_u_f, const TokenScoreLog &log_o_f,
                                const TokenScoreLog &log_u_v, const TokenScoreLog &log_o_v) {
  const auto &uf = log_u_f.header, &of = log_o_f.header;
  const auto &uv = log_u_v.header, &ov = log_o_v.header;
  if (uf.model_id != uv.model_id)
    throw Error("evaluate_dcue: role mismatch, unlearned-model logs name different models ('" +
                uf.model_id + "' vs '" + uv.model_id + "')");
  if (of.model_id != ov.model_id)
    throw Error("evaluate_dcue: role mismatch, original-model logs name different models ('" +
                of.model_id + "' vs '" + ov.model_id + "')");
  if (uf.model_role == ModelRole::original && of.model_role != ModelRole::original)
    throw Error("evaluate_dcue: role mismatch, M_o log passed as the unlearned model");
  if (uf.dataset_role == DatasetRole::validation && uv.dataset_role == DatasetRole::forget)
    throw Error("evaluate_dcue: role mismatch, forget and validation logs are swapped");
  return evaluate_dcue(extract_ctcs(log_u_f), extract_ctcs(log_o_f), extract_ctcs(log_u_v),
                       extract_ctcs(log_o_v));
}

} // namespace ugauge
