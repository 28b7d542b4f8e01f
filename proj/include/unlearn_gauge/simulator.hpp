#pragma once

// Synthetic replication of the approximation check for the drift
// correction: compare the p-value obtained with direct access to the
// retrained model M_r against the DCUE p-value, over repeated resamples of
// the validation set.
//
// Score model. Each example i of a dataset carries a latent difficulty
// z_i ~ N(0, 1) shared by every model, and each model adds its own noise:
//   x_i = c z_i + sqrt(1 - c^2) e_i,   value_i = Q(x_i)
// where c is the coupling and Q maps a standard-normal latent to (0, 1]
// through a named family. The forget set is drawn once per seed; each trial
// draws a fresh validation set.

#include "dcue.hpp"
#include "error.hpp"
#include "meta_eval.hpp"
#include "parallel.hpp"
#include "score_log.hpp"
#include "stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ugauge::sim {

enum class Role { original = 0, target = 1, retrained = 2, unlearned = 3 };
enum class Dataset { forget = 0, validation = 1 };

inline const char *role_name(Role r) {
  constexpr const char *names[] = {"M_o", "M_t", "M_r", "M_u"};
  return names[static_cast<int>(r)];
}

/// Maps a standard-normal latent onto (0, 1].
struct ScoreFamily {
  enum class Kind { logit_normal, kumaraswamy };
  Kind kind = Kind::logit_normal;
  double p1 = 0.0; // logit_normal: location; kumaraswamy: a
  double p2 = 1.0; // logit_normal: scale;    kumaraswamy: b

  double operator()(double latent) const {
    double v;
    if (kind == Kind::logit_normal) {
      v = 1.0 / (1.0 + std::exp(-(p1 + p2 * latent)));
    } else {
      const double u = 0.5 * std::erfc(-latent / std::sqrt(2.0));
      v = std::pow(1.0 - std::pow(1.0 - u, 1.0 / p2), 1.0 / p1);
    }
    return std::clamp(v, std::numeric_limits<double>::min(), 1.0);
  }

  void validate() const {
    if (!std::isfinite(p1) || !std::isfinite(p2))
      throw DomainError("score family parameters must be finite");
    if (kind == Kind::logit_normal && !(p2 > 0.0))
      throw DomainError("logit_normal scale must be > 0");
    if (kind == Kind::kumaraswamy && !(p1 > 0.0 && p2 > 0.0))
      throw DomainError("kumaraswamy shapes must be > 0");
  }
};

/// Monotone map sigmoid(scale * logit(p) + offset), used to model
/// post-processing that touches no forget-set data.
struct LogitMap {
  double scale = 1.0;
  double offset = 0.0;

  double operator()(double p) const {
    if (p >= 1.0)
      return 1.0;
    const double x = scale * std::log(p / (1.0 - p)) + offset;
    return std::clamp(1.0 / (1.0 + std::exp(-x)), std::numeric_limits<double>::min(), 1.0);
  }

  /// this applied after `first`.
  LogitMap after(const LogitMap &first) const {
    return {scale * first.scale, scale * first.offset + offset};
  }
};

enum class UMode { as_retrained, as_target, interpolated };

struct SimScenario {
  std::uint64_t seed = 7;
  std::size_t n_f = 400;
  std::size_t n_v = 400;
  std::size_t n_trials = 100;
  double coupling = 0.98;
  /// Indexed [role][dataset] for M_o, M_t, M_r. M_u follows u_mode.
  std::array<std::array<ScoreFamily, 2>, 3> families{{
      {{{ScoreFamily::Kind::logit_normal, 0.0, 1.5}, {ScoreFamily::Kind::logit_normal, 0.0, 1.5}}},
      {{{ScoreFamily::Kind::logit_normal, 4.0, 1.0}, {ScoreFamily::Kind::logit_normal, 0.2, 1.5}}},
      {{{ScoreFamily::Kind::logit_normal, 0.2, 1.5}, {ScoreFamily::Kind::logit_normal, 0.2, 1.5}}},
  }};
  UMode u_mode = UMode::as_retrained;
  /// Forgetting degree for UMode::interpolated: 0 behaves like M_t, 1 like M_r.
  double forget_degree = 1.0;
  LogitMap post_ul{1.0, -0.25};
  LogitMap post_ft{1.0, 0.35};
  std::optional<LogitMap> post_mix; // defaults to ft after ul
  double significance = 0.05;
  double agreement_gap = 0.1;

  ScoreFamily &family(Role r, Dataset d) {
    return families.at(static_cast<int>(r)).at(static_cast<int>(d));
  }
  const ScoreFamily &family(Role r, Dataset d) const {
    return families.at(static_cast<int>(r)).at(static_cast<int>(d));
  }
  LogitMap mix_map() const { return post_mix.value_or(post_ft.after(post_ul)); }

  void validate() const {
    if (n_f < 2 || n_v < 2)
      throw DomainError("scenario: sample sizes must be >= 2");
    if (!(coupling >= 0.0 && coupling <= 1.0))
      throw DomainError("scenario: coupling must lie in [0, 1]");
    if (!(forget_degree >= 0.0 && forget_degree <= 1.0))
      throw DomainError("scenario: forget_degree must lie in [0, 1]");
    if (!(significance > 0.0 && significance < 1.0))
      throw DomainError("scenario: significance must lie in (0, 1)");
    for (const auto &row : families)
      for (const auto &f : row)
        f.validate();
    for (const auto &m : {post_ul, post_ft, mix_map()})
      if (!(m.scale > 0.0) || !std::isfinite(m.offset))
        throw DomainError("scenario: post-processing maps need scale > 0");
  }
};

//==============================================================================

namespace detail {

enum : std::uint32_t { kExampleStream = 1, kModelStream = 2 };

inline std::vector<double> normals(std::uint64_t seed, std::uint32_t stream,
                                   std::uint32_t role, std::uint32_t dataset,
                                   std::uint64_t trial, std::size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream, role, dataset, static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(trial >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> dist;
  std::vector<double> out(n);
  for (auto &v : out)
    v = dist(rng);
  return out;
}

/// Latent x_i for one model on one dataset draw.
inline std::vector<double> latents(const SimScenario &s, Role role, Dataset d,
                                   std::uint64_t trial) {
  const std::size_t n = d == Dataset::forget ? s.n_f : s.n_v;
  const auto z = normals(s.seed, kExampleStream, 0, static_cast<std::uint32_t>(d), trial, n);
  const auto e = normals(s.seed, kModelStream, static_cast<std::uint32_t>(role),
                         static_cast<std::uint32_t>(d), trial, n);
  const double c = s.coupling;
  const double r = std::sqrt(std::max(0.0, 1.0 - c * c));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = c * z[i] + r * e[i];
  return x;
}

} // namespace detail

inline std::string sim_dataset_id(Dataset d, std::uint64_t trial) {
  return d == Dataset::forget ? "sim-D_f" : "sim-D_v-" + std::to_string(trial);
}

/// CTCS of one role on one dataset. Deterministic in (seed, role, dataset,
/// trial_index); the forget set ignores trial_index.
inline CtcsSample gen_synthetic_ctcs(const SimScenario &s, Role role, Dataset d,
                                     std::uint64_t trial_index) {
  s.validate();
  const std::uint64_t trial = d == Dataset::forget ? 0 : trial_index;
  if (role == Role::unlearned) {
    if (s.u_mode == UMode::as_retrained)
      role = Role::retrained;
    else if (s.u_mode == UMode::as_target)
      role = Role::target;
  }
  CtcsSample out;
  out.model_id = std::string("sim-") + role_name(role);
  out.dataset_id = sim_dataset_id(d, trial);
  const auto x = detail::latents(s, role, d, trial);
  out.values.resize(x.size());
  if (role == Role::unlearned) {
    const auto &ft = s.family(Role::target, d);
    const auto &fr = s.family(Role::retrained, d);
    const double a = s.forget_degree;
    for (std::size_t i = 0; i < x.size(); ++i)
      out.values[i] = std::max((1.0 - a) * ft(x[i]) + a * fr(x[i]),
                               std::numeric_limits<double>::min());
  } else {
    const auto &f = s.family(role, d);
    for (std::size_t i = 0; i < x.size(); ++i)
      out.values[i] = f(x[i]);
  }
  return out;
}

inline CtcsSample apply_map(CtcsSample sample, const LogitMap &map) {
  for (auto &v : sample.values)
    v = map(v);
  return sample;
}

//==============================================================================

struct TrialComparison {
  std::uint64_t trial = 0;
  double p_direct = 1.0; // KS(M_r, M_u) on the forget set
  double p_approx = 1.0; // DCUE from M_o and the validation set
  DcueResult dcue;
};

inline bool agrees(double p_direct, double p_approx, double significance, double gap) {
  return ((p_direct < significance) == (p_approx < significance)) ||
         std::abs(p_direct - p_approx) < gap;
}

inline TrialComparison compare_direct_vs_approx(const SimScenario &s, std::uint64_t trial) {
  const auto u_f = gen_synthetic_ctcs(s, Role::unlearned, Dataset::forget, trial);
  const auto r_f = gen_synthetic_ctcs(s, Role::retrained, Dataset::forget, trial);
  const auto o_f = gen_synthetic_ctcs(s, Role::original, Dataset::forget, trial);
  const auto u_v = gen_synthetic_ctcs(s, Role::unlearned, Dataset::validation, trial);
  const auto o_v = gen_synthetic_ctcs(s, Role::original, Dataset::validation, trial);
  TrialComparison c;
  c.trial = trial;
  c.p_direct = ks_two_sample(r_f.values, u_f.values).p_value;
  c.dcue = evaluate_dcue(u_f, o_f, u_v, o_v);
  c.p_approx = *c.dcue.r_dcue;
  return c;
}

struct ValidationRun {
  std::size_t agreement_count = 0;
  std::size_t trials = 0;
  std::vector<TrialComparison> pairs;
};

inline ValidationRun run_validation(const SimScenario &s) {
  s.validate();
  ValidationRun run;
  run.trials = s.n_trials;
  run.pairs.resize(s.n_trials);
  parallel_for(s.n_trials, [&](std::size_t t) { run.pairs[t] = compare_direct_vs_approx(s, t); });
  for (const auto &p : run.pairs)
    if (agrees(p.p_direct, p.p_approx, s.significance, s.agreement_gap))
      ++run.agreement_count;
  return run;
}

//==============================================================================

/// DCUE values on the variants needed for its own meta-evaluation, computed
/// on one validation draw. The retrained model plays M_u for robustness.
struct DcueVariants {
  double retrained = 0.0;
  double target = 0.0;
  double post_ul = 0.0;
  double post_ft = 0.0;
  double post_mix = 0.0;
};

inline DcueVariants dcue_variants(const SimScenario &s, std::uint64_t trial = 0) {
  const auto o_f = gen_synthetic_ctcs(s, Role::original, Dataset::forget, trial);
  const auto o_v = gen_synthetic_ctcs(s, Role::original, Dataset::validation, trial);
  const auto r_f = gen_synthetic_ctcs(s, Role::retrained, Dataset::forget, trial);
  const auto r_v = gen_synthetic_ctcs(s, Role::retrained, Dataset::validation, trial);
  const auto t_f = gen_synthetic_ctcs(s, Role::target, Dataset::forget, trial);
  const auto t_v = gen_synthetic_ctcs(s, Role::target, Dataset::validation, trial);
  auto score = [&](const CtcsSample &u_f, const CtcsSample &u_v) {
    return *evaluate_dcue(u_f, o_f, u_v, o_v).r_dcue;
  };
  auto post = [&](const LogitMap &m) { return score(apply_map(r_f, m), apply_map(r_v, m)); };
  return {score(r_f, r_v), score(t_f, t_v), post(s.post_ul), post(s.post_ft),
          post(s.mix_map())};
}

inline MetaReport dcue_meta_report(const SimScenario &s, std::uint64_t trial = 0) {
  const auto v = dcue_variants(s, trial);
  FeValues fe{v.retrained, v.target, v.retrained, v.post_ul, v.post_ft, v.post_mix};
  return build_report(*metric_spec("dcue"), fe);
}

/// Wraps a synthetic sample as a score log: one single-token entry per
/// value, each token marked core.
inline TokenScoreLog to_score_log(const CtcsSample &sample, ModelRole model_role,
                                  DatasetRole dataset_role) {
  TokenScoreLog log;
  log.header.model_id = sample.model_id;
  log.header.model_role = model_role;
  log.header.dataset_id = sample.dataset_id;
  log.header.dataset_role = dataset_role;
  log.header.tokenizer_id = "synthetic";
  log.entries.reserve(sample.values.size());
  for (std::size_t i = 0; i < sample.values.size(); ++i)
    log.entries.push_back({"r" + std::to_string(i), {"tok"}, {sample.values[i]}, {0}});
  return log;
}

//==============================================================================
// Scenario files
//
// Plain text, one `key = value` per line, `#` starts a comment:
//   seed = 7
//   n_f = 400            n_v = 400            n_trials = 100
//   coupling = 0.98
//   u_mode = as_retrained | as_target | interpolated <degree>
//   family.<o|t|r>.<f|v> = logit_normal <location> <scale>
//                        | kumaraswamy <a> <b>
//   post.<ul|ft|mix> = <scale> <offset>
//   significance = 0.05  agreement_gap = 0.1

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Role parse_role_letter(const std::string &s) {
  if (s == "o") return Role::original;
  if (s == "t") return Role::target;
  if (s == "r") return Role::retrained;
  throw Error("scenario: unknown role '" + s + "' (expected o, t or r)");
}

inline const char *family_kind_name(ScoreFamily::Kind k) {
  return k == ScoreFamily::Kind::logit_normal ? "logit_normal" : "kumaraswamy";
}

} // namespace detail

inline SimScenario parse_scenario(std::istream &in, const std::string &source) {
  SimScenario s;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos)
      raw.erase(hash);
    const auto text = detail::trim(raw);
    if (text.empty())
      continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ParseError(source, line, "expected 'key = value'");
    const auto key = detail::trim(text.substr(0, eq));
    std::istringstream val(detail::trim(text.substr(eq + 1)));
    auto fail = [&](const std::string &what) { throw ParseError(source, line, key + ": " + what); };
    auto read_number = [&](auto &out) {
      if (!(val >> out))
        fail("expected a number");
    };
    try {
      if (key == "seed") read_number(s.seed);
      else if (key == "n_f") read_number(s.n_f);
      else if (key == "n_v") read_number(s.n_v);
      else if (key == "n_trials") read_number(s.n_trials);
      else if (key == "coupling") read_number(s.coupling);
      else if (key == "significance") read_number(s.significance);
      else if (key == "agreement_gap") read_number(s.agreement_gap);
      else if (key == "u_mode") {
        std::string mode;
        val >> mode;
        if (mode == "as_retrained") s.u_mode = UMode::as_retrained;
        else if (mode == "as_target") s.u_mode = UMode::as_target;
        else if (mode == "interpolated") {
          s.u_mode = UMode::interpolated;
          read_number(s.forget_degree);
        } else
          fail("unknown mode '" + mode + "'");
      } else if (key.starts_with("family.")) {
        const auto rest = key.substr(7);
        const auto dot = rest.find('.');
        if (dot == std::string::npos)
          fail("expected family.<role>.<dataset>");
        const auto role = detail::parse_role_letter(rest.substr(0, dot));
        const auto ds = rest.substr(dot + 1);
        if (ds != "f" && ds != "v")
          fail("dataset must be f or v");
        ScoreFamily f;
        std::string kind;
        val >> kind;
        if (kind == "logit_normal") f.kind = ScoreFamily::Kind::logit_normal;
        else if (kind == "kumaraswamy") f.kind = ScoreFamily::Kind::kumaraswamy;
        else fail("unknown family '" + kind + "'");
        read_number(f.p1);
        read_number(f.p2);
        s.family(role, ds == "f" ? Dataset::forget : Dataset::validation) = f;
      } else if (key.starts_with("post.")) {
        LogitMap m;
        read_number(m.scale);
        read_number(m.offset);
        const auto which = key.substr(5);
        if (which == "ul") s.post_ul = m;
        else if (which == "ft") s.post_ft = m;
        else if (which == "mix") s.post_mix = m;
        else fail("unknown post-processing '" + which + "'");
      } else {
        fail("unknown key");
      }
    } catch (const ParseError &) {
      throw;
    } catch (const Error &ex) {
      throw ParseError(source, line, ex.what());
    }
    std::string extra;
    if (val >> extra)
      throw ParseError(source, line, key + ": unexpected trailing '" + extra + "'");
  }
  try {
    s.validate();
  } catch (const Error &ex) {
    throw ParseError(source, line, ex.what());
  }
  return s;
}

inline SimScenario load_scenario(const std::string &path) {
  auto in = ugauge::detail::open_input(path);
  return parse_scenario(in, path);
}

inline void write_scenario(std::ostream &out, const SimScenario &s) {
  out << "seed = " << s.seed << '\n'
      << "n_f = " << s.n_f << '\n'
      << "n_v = " << s.n_v << '\n'
      << "n_trials = " << s.n_trials << '\n'
      << "coupling = " << format_number(s.coupling) << '\n';
  switch (s.u_mode) {
  case UMode::as_retrained: out << "u_mode = as_retrained\n"; break;
  case UMode::as_target: out << "u_mode = as_target\n"; break;
  case UMode::interpolated:
    out << "u_mode = interpolated " << format_number(s.forget_degree) << '\n';
    break;
  }
  const char *roles[] = {"o", "t", "r"};
  const char *sets[] = {"f", "v"};
  for (int r = 0; r < 3; ++r)
    for (int d = 0; d < 2; ++d) {
      const auto &f = s.families[r][d];
      out << "family." << roles[r] << '.' << sets[d] << " = " << detail::family_kind_name(f.kind)
          << ' ' << format_number(f.p1) << ' ' << format_number(f.p2) << '\n';
    }
  out << "post.ul = " << format_number(s.post_ul.scale) << ' ' << format_number(s.post_ul.offset)
      << '\n'
      << "post.ft = " << format_number(s.post_ft.scale) << ' ' << format_number(s.post_ft.offset)
      << '\n';
  if (s.post_mix)
    out << "post.mix = " << format_number(s.post_mix->scale) << ' '
        << format_number(s.post_mix->offset) << '\n';
  out << "significance = " << format_number(s.significance) << '\n'
      << "agreement_gap = " << format_number(s.agreement_gap) << '\n';
}

} // namespace ugauge::sim
