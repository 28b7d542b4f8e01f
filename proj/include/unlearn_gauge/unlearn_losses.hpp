#pragma once

// Per-example objectives of common unlearning algorithms, evaluated from
// supplied negative log-likelihoods. Expectations over a dataset are the
// caller's mean over bundles.
//
// Likelihood ratios are read as r = exp(-nll_theta) / exp(-nll_ref), i.e.
// log r = nll_ref - nll_theta.

#include "error.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace ugauge {

struct LikelihoodBundle {
  double nll_theta = 0.0; // current model on the forget answer y
  std::optional<double> nll_ref;      // reference (target) model on y
  std::optional<double> nll_retain;   // current model on a retain example
  std::optional<double> nll_idk;      // current model on the refusal answer
  std::optional<double> nll_ref_idk;  // reference model on the refusal answer
  int answer_len = 1;
  double beta = 1.0;
  double gamma = 0.0;
};

namespace detail {

inline double need(const std::optional<double> &v, const char *field, const char *loss) {
  if (!v)
    throw DomainError(std::string(loss) + ": missing " + field);
  if (!std::isfinite(*v))
    throw DomainError(std::string(loss) + ": non-finite " + field);
  return *v;
}

inline void check_common(const LikelihoodBundle &b, const char *loss) {
  if (!std::isfinite(b.nll_theta))
    throw DomainError(std::string(loss) + ": non-finite nll_theta");
  if (!(b.beta > 0.0) || !std::isfinite(b.beta))
    throw DomainError(std::string(loss) + ": beta must be > 0");
  if (b.answer_len < 1)
    throw DomainError(std::string(loss) + ": answer_len must be >= 1");
}

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double finite(double v, const char *loss) {
  if (!std::isfinite(v))
    throw DomainError(std::string(loss) + ": non-finite result");
  return v;
}

} // namespace detail

/// Gradient ascent: the forget loss itself, to be maximized.
inline double ga_loss(const LikelihoodBundle &b) {
  detail::check_common(b, "ga");
  return b.nll_theta;
}

inline double gd_loss(const LikelihoodBundle &b) {
  detail::check_common(b, "gd");
  return -b.nll_theta + detail::need(b.nll_retain, "nll_retain", "gd");
}

inline double idk_loss(const LikelihoodBundle &b) {
  detail::check_common(b, "idk");
  return detail::need(b.nll_idk, "nll_idk", "idk");
}

/// -(1/beta) log sigmoid(beta (log r_y - log r_idk)).
inline double dpo_loss(const LikelihoodBundle &b) {
  detail::check_common(b, "dpo");
  const double log_r_y = detail::need(b.nll_ref, "nll_ref", "dpo") - b.nll_theta;
  const double log_r_idk = detail::need(b.nll_ref_idk, "nll_ref_idk", "dpo") -
                           detail::need(b.nll_idk, "nll_idk", "dpo");
  return detail::finite(-detail::log_sigmoid(b.beta * (log_r_y - log_r_idk)) / b.beta, "dpo");
}

/// -(2/beta) log sigmoid(-beta log r_y).
inline double npo_loss(const LikelihoodBundle &b) {
  detail::check_common(b, "npo");
  const double log_r_y = detail::need(b.nll_ref, "nll_ref", "npo") - b.nll_theta;
  return detail::finite(-2.0 / b.beta * detail::log_sigmoid(-b.beta * log_r_y), "npo");
}

/// -(2/beta) log sigmoid(-(beta/|y|) log r_y - gamma).
inline double simnpo_loss(const LikelihoodBundle &b) {
  detail::check_common(b, "simnpo");
  if (!std::isfinite(b.gamma))
    throw DomainError("simnpo: non-finite gamma");
  const double log_r_y = detail::need(b.nll_ref, "nll_ref", "simnpo") - b.nll_theta;
  const double x = -(b.beta / b.answer_len) * log_r_y - b.gamma;
  return detail::finite(-2.0 / b.beta * detail::log_sigmoid(x), "simnpo");
}

} // namespace ugauge
