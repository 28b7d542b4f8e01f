#pragma once

// Existing unlearning metrics: text similarity (QA, FB, AA, VerbMem,
// KnowMem), multiple-choice accuracy (QA Eval, Prob Eval), truth-ratio KS
// (TR Eval) and Min-K% membership-inference leakage (PrivLeak).

#include "error.hpp"
#include "score_log.hpp"
#include "stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ugauge {

enum class PromptKind { qa, fill_blank, adversarial, prefix_continuation, multiple_choice };

inline std::string_view to_string(PromptKind k) {
  switch (k) {
  case PromptKind::qa: return "qa";
  case PromptKind::fill_blank: return "fill_blank";
  case PromptKind::adversarial: return "adversarial";
  case PromptKind::prefix_continuation: return "prefix_continuation";
  case PromptKind::multiple_choice: return "multiple_choice";
  }
  return "qa";
}

inline std::optional<PromptKind> parse_prompt_kind(std::string_view s) {
  for (auto k : {PromptKind::qa, PromptKind::fill_blank, PromptKind::adversarial,
                 PromptKind::prefix_continuation, PromptKind::multiple_choice})
    if (to_string(k) == s)
      return k;
  return std::nullopt;
}

struct GenerationEntry {
  std::string record_id;
  PromptKind kind = PromptKind::qa;
  std::string generated_text;
  std::string reference_text;
  int chosen_option = 0; // 0 = no valid choice
  int correct_option = 0;
  bool heldout = false;
};

struct GenerationLog {
  LogHeader header;
  /// Set when the generations come from M_u after the external fine-tune
  /// on half of the forget set.
  bool post_finetune = false;
  std::vector<GenerationEntry> entries;
};

struct TruthRatioLog {
  LogHeader header;
  std::vector<double> values;
};

struct Scale {
  double lo = 0.0;
  double hi = 1.0;
  double range() const { return hi - lo; }
};

/// Declared scale and anchors of a metric.
struct MetricSpec {
  std::string name;
  Scale scale;
  double ideal = 0.0; // value expected from the retrained model
  double worst = 1.0; // value expected from the un-unlearned target model
  bool requires_retrained = false;
};

struct MetricScore {
  std::string metric_name;
  double value = 0.0;
  Scale scale;
  double ideal = 0.0;
  double worst = 1.0;
  std::size_t count = 0;
  std::optional<std::string> diagnostic;
};

/// Default anchors. Multiple-choice metrics treat chance (1 of 4) as ideal.
inline std::optional<MetricSpec> metric_spec(std::string_view name) {
  static const std::vector<MetricSpec> specs = {
      {"qa", {0, 1}, 0.0, 1.0, false},
      {"fb", {0, 1}, 0.0, 1.0, false},
      {"aa", {0, 1}, 0.0, 1.0, false},
      {"verbmem", {0, 1}, 0.0, 1.0, false},
      {"knowmem", {0, 1}, 0.0, 1.0, false},
      {"qa_eval", {0, 1}, 0.25, 1.0, false},
      {"prob_eval", {0, 1}, 0.25, 1.0, false},
      {"tr_eval", {0, 1}, 1.0, 0.0, true},
      {"privleak", {-1, 1}, 0.0, 1.0, true},
      {"dcue", {0, 1}, 1.0, 0.0, false},
  };
  for (const auto &s : specs)
    if (s.name == name)
      return s;
  return std::nullopt;
}

namespace detail {

inline MetricScore make_score(std::string_view name, double value, std::size_t count) {
  const auto spec = *metric_spec(name);
  return {spec.name, value, spec.scale, spec.ideal, spec.worst, count, std::nullopt};
}

template <class Pred, class Fn>
std::pair<double, std::size_t> mean_over(const GenerationLog &gen, Pred &&keep, Fn &&value) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto &e : gen.entries) {
    if (!keep(e))
      continue;
    sum += value(e);
    ++count;
  }
  return {count == 0 ? 0.0 : sum / static_cast<double>(count), count};
}

} // namespace detail

//==============================================================================
// Text similarity

enum class TextSimKind { qa, fb, aa };

/// Mean Rouge-L recall of generations against the original answers.
inline MetricScore text_sim_metric(const GenerationLog &gen, TextSimKind kind) {
  const PromptKind pk = kind == TextSimKind::qa   ? PromptKind::qa
                        : kind == TextSimKind::fb ? PromptKind::fill_blank
                                                  : PromptKind::adversarial;
  const char *name = kind == TextSimKind::qa ? "qa" : kind == TextSimKind::fb ? "fb" : "aa";
  auto [mean, count] = detail::mean_over(
      gen, [pk](const GenerationEntry &e) { return e.kind == pk; },
      [](const GenerationEntry &e) {
        return rouge_l(e.generated_text, e.reference_text, RougeMode::recall);
      });
  if (count == 0)
    throw Error(std::string(name) + ": no '" + std::string(to_string(pk)) + "' entries");
  return detail::make_score(name, mean, count);
}

/// Mean Rouge-L F1 of continuations after a prefix.
inline MetricScore verb_mem(const GenerationLog &gen) {
  auto [mean, count] = detail::mean_over(
      gen, [](const GenerationEntry &e) { return e.kind == PromptKind::prefix_continuation; },
      [](const GenerationEntry &e) {
        return rouge_l(e.generated_text, e.reference_text, RougeMode::f1);
      });
  if (count == 0)
    throw Error("verbmem: no 'prefix_continuation' entries");
  return detail::make_score("verbmem", mean, count);
}

inline MetricScore know_mem(const GenerationLog &gen) {
  auto [mean, count] = detail::mean_over(
      gen, [](const GenerationEntry &e) { return e.kind == PromptKind::qa; },
      [](const GenerationEntry &e) {
        return rouge_l(e.generated_text, e.reference_text, RougeMode::f1);
      });
  if (count == 0)
    throw Error("knowmem: no 'qa' entries");
  return detail::make_score("knowmem", mean, count);
}

//==============================================================================
// Multiple-choice accuracy

inline MetricScore qa_eval_accuracy(const GenerationLog &gen) {
  auto [acc, count] = detail::mean_over(
      gen, [](const GenerationEntry &e) { return e.kind == PromptKind::multiple_choice; },
      [](const GenerationEntry &e) { return e.chosen_option == e.correct_option ? 1.0 : 0.0; });
  if (count == 0)
    throw Error("qa_eval: no 'multiple_choice' entries");
  return detail::make_score("qa_eval", acc, count);
}

/// Accuracy on the held-out half after M_u was fine-tuned on the other half.
inline MetricScore prob_eval_accuracy(const GenerationLog &gen_after_finetune) {
  if (!gen_after_finetune.post_finetune)
    throw Error("prob_eval: generation log is not labeled post_finetune");
  auto [acc, count] = detail::mean_over(
      gen_after_finetune,
      [](const GenerationEntry &e) {
        return e.kind == PromptKind::multiple_choice && e.heldout;
      },
      [](const GenerationEntry &e) { return e.chosen_option == e.correct_option ? 1.0 : 0.0; });
  if (count == 0)
    throw Error("prob_eval: no held-out 'multiple_choice' entries");
  return detail::make_score("prob_eval", acc, count);
}

//==============================================================================
// Retrained-model metrics

/// KS p-value between truth-ratio distributions of M_r and M_u.
inline MetricScore tr_eval(const TruthRatioLog *tr_r, const TruthRatioLog &tr_u) {
  if (tr_r == nullptr || tr_r->header.model_role != ModelRole::retrained)
    throw RequiresRetrainedError("tr_eval");
  if (tr_r->values.empty() || tr_u.values.empty())
    throw Error("tr_eval: empty truth-ratio log");
  const auto ks = ks_two_sample(tr_r->values, tr_u.values);
  return detail::make_score("tr_eval", ks.p_value, tr_u.values.size());
}

inline MetricScore tr_eval(const TruthRatioLog &tr_r, const TruthRatioLog &tr_u) {
  return tr_eval(&tr_r, tr_u);
}

/// Mean log-probability of the ceil(k% * count) least likely tokens.
inline double min_k_prob(std::span<const double> token_probs, double k_percent) {
  if (token_probs.empty())
    throw DomainError("min_k_prob: empty token list");
  if (!(k_percent > 0.0 && k_percent <= 100.0))
    throw DomainError("min_k_prob: k_percent must lie in (0, 100]");
  std::vector<double> logs;
  logs.reserve(token_probs.size());
  for (double p : token_probs) {
    if (!(p > 0.0 && p <= 1.0))
      throw DomainError("min_k_prob: probabilities must lie in (0, 1]");
    logs.push_back(std::log(p));
  }
  std::sort(logs.begin(), logs.end());
  auto k = static_cast<std::size_t>(
      std::ceil(k_percent / 100.0 * static_cast<double>(logs.size())));
  k = std::clamp<std::size_t>(k, 1, logs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    sum += logs[i];
  return sum / static_cast<double>(k);
}

/// AUC of the Min-K% membership score separating member from non-member
/// entries of one model. All answer tokens of an entry are scored.
inline double min_k_auc(const TokenScoreLog &members, const TokenScoreLog &nonmembers,
                        double k_percent) {
  auto scores = [k_percent](const TokenScoreLog &log) {
    std::vector<double> s;
    for (const auto &e : log.entries)
      if (!e.token_probs.empty())
        s.push_back(min_k_prob(e.token_probs, k_percent));
    return s;
  };
  return auc_roc(scores(members), scores(nonmembers));
}

/// Relative AUC gap (auc_u - auc_r) / auc_r, clamped to the declared
/// [-1, 1] scale with a diagnostic.
inline MetricScore privleak(double auc_u, double auc_r) {
  if (!(auc_r > 0.0))
    throw DomainError("privleak: retrained-model AUC must be > 0");
  auto score = detail::make_score("privleak", (auc_u - auc_r) / auc_r, 0);
  if (score.value < score.scale.lo || score.value > score.scale.hi) {
    score.diagnostic = "privleak " + std::to_string(score.value) +
                       " outside declared scale [-1, 1]; clamped";
    score.value = std::clamp(score.value, score.scale.lo, score.scale.hi);
  }
  return score;
}

//==============================================================================
// Log files

/// Generation log: score-log style header (tokenizer_id optional, plus an
/// optional boolean "post_finetune"), then one entry per line with
/// "record_id", "prompt_kind" and either "generated_text"/"reference_text"
/// or "chosen_option"/"correct_option" (plus optional "split": "heldout").
inline GenerationLog parse_generation_log(std::istream &in, const std::string &source) {
  GenerationLog log;
  std::set<std::pair<std::string, PromptKind>> seen;
  detail::read_jsonl(
      in, source,
      [&](const nlohmann::json &j, std::size_t line) {
        log.header = detail::parse_header(j, source, line, false);
        if (j.contains("post_finetune"))
          log.post_finetune = detail::required<bool>(j, "post_finetune", source, line);
      },
      [&](const nlohmann::json &j, std::size_t line) {
        GenerationEntry e;
        e.record_id = detail::required<std::string>(j, "record_id", source, line);
        const auto kind = detail::required<std::string>(j, "prompt_kind", source, line);
        auto pk = parse_prompt_kind(kind);
        if (!pk)
          throw ParseError(source, line, "unknown prompt_kind '" + kind + "'");
        e.kind = *pk;
        if (e.kind == PromptKind::multiple_choice) {
          if (j.contains("generated_text"))
            throw ParseError(source, line, "multiple_choice entry carries generated_text");
          e.chosen_option = detail::required<int>(j, "chosen_option", source, line);
          e.correct_option = detail::required<int>(j, "correct_option", source, line);
          if (e.correct_option < 1 || e.correct_option > 4)
            throw ParseError(source, line, "correct_option must be in 1..4");
          if (e.chosen_option < 0 || e.chosen_option > 4)
            throw ParseError(source, line, "chosen_option must be in 0..4");
          if (j.contains("split"))
            e.heldout = detail::required<std::string>(j, "split", source, line) == "heldout";
        } else {
          if (j.contains("chosen_option"))
            throw ParseError(source, line, "text entry carries chosen_option");
          e.generated_text = detail::required<std::string>(j, "generated_text", source, line);
          e.reference_text = detail::required<std::string>(j, "reference_text", source, line);
          if (rouge_tokens(e.reference_text).empty())
            throw ParseError(source, line, "empty reference_text");
        }
        if (!seen.emplace(e.record_id, e.kind).second)
          throw ParseError(source, line,
                           "duplicate (record_id, prompt_kind) for '" + e.record_id + "'");
        log.entries.push_back(std::move(e));
      });
  return log;
}

inline GenerationLog load_generation_log(const std::string &path) {
  auto in = detail::open_input(path);
  return parse_generation_log(in, path);
}

/// Truth-ratio log: header, then {"record_id", "truth_ratio"} per line.
inline TruthRatioLog parse_truth_ratio_log(std::istream &in, const std::string &source) {
  TruthRatioLog log;
  detail::read_jsonl(
      in, source,
      [&](const nlohmann::json &j, std::size_t line) {
        log.header = detail::parse_header(j, source, line, false);
      },
      [&](const nlohmann::json &j, std::size_t line) {
        detail::required<std::string>(j, "record_id", source, line);
        const double v = detail::required<double>(j, "truth_ratio", source, line);
        if (!std::isfinite(v))
          throw ParseError(source, line, "truth_ratio must be finite");
        log.values.push_back(v);
      });
  if (log.values.empty())
    throw ParseError(source, 1, "truth-ratio log has no entries");
  return log;
}

inline TruthRatioLog load_truth_ratio_log(const std::string &path) {
  auto in = detail::open_input(path);
  return parse_truth_ratio_log(in, path);
}

} // namespace ugauge
