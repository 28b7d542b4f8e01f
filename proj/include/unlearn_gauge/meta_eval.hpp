#pragma once

// Meta-evaluation of unlearning metrics: practicality, exactness against
// the retrained/target anchors, and robustness under post-processing.

#include "baseline_metrics.hpp"
#include "error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ugauge {

/// A [0, 1] property score. `diagnostic` is set when the raw value fell
/// outside [0, 1] and was clamped, which means a mis-declared scale.
struct PropertyScore {
  double value = 0.0;
  std::optional<std::string> diagnostic;
};

namespace detail {

inline PropertyScore closeness(double a, double b, const Scale &scale, const char *what) {
  if (!(scale.hi > scale.lo))
    throw DomainError(std::string(what) + ": degenerate scale");
  const double raw = 1.0 - std::abs(a - b) / scale.range();
  PropertyScore s{std::clamp(raw, 0.0, 1.0), std::nullopt};
  if (raw < 0.0 || raw > 1.0)
    s.diagnostic = std::string(what) + ": raw value " + std::to_string(raw) +
                   " outside [0, 1]; clamped";
  for (double v : {a, b})
    if (v < scale.lo || v > scale.hi) {
      s.diagnostic = std::string(what) + ": value " + std::to_string(v) +
                     " outside declared scale";
      break;
    }
  return s;
}

} // namespace detail

/// 1 - |observed - anchor| / range.
inline PropertyScore exactness(double observed, double anchor, const Scale &scale) {
  return detail::closeness(observed, anchor, scale, "exactness");
}

/// 1 - |post - base| / range.
inline PropertyScore robustness(double value_post, double value_base, const Scale &scale) {
  return detail::closeness(value_post, value_base, scale, "robustness");
}

/// Metric values f_e(model, D_f) for each model variant; absent when not run.
struct FeValues {
  std::optional<double> retrained;
  std::optional<double> target;
  std::optional<double> unlearned;
  std::optional<double> post_ul;
  std::optional<double> post_ft;
  std::optional<double> post_mix;
};

struct MetaReport {
  std::string metric_name;
  bool requires_retrained = false;
  std::optional<double> exactness_plus;
  std::optional<double> exactness_minus;
  std::optional<double> robustness_ul;
  std::optional<double> robustness_ft;
  std::optional<double> robustness_mix;
  std::vector<std::string> diagnostics;
};

inline MetaReport build_report(const MetricSpec &spec, const FeValues &fe) {
  MetaReport r;
  r.metric_name = spec.name;
  r.requires_retrained = spec.requires_retrained;

  auto take = [&r](const PropertyScore &s) {
    if (s.diagnostic)
      r.diagnostics.push_back(*s.diagnostic);
    return s.value;
  };
  if (fe.retrained)
    r.exactness_plus = take(exactness(*fe.retrained, spec.ideal, spec.scale));
  else
    r.diagnostics.push_back("exactness+ unavailable: no retrained-model value");
  if (fe.target)
    r.exactness_minus = take(exactness(*fe.target, spec.worst, spec.scale));
  if (fe.unlearned) {
    if (fe.post_ul)
      r.robustness_ul = take(robustness(*fe.post_ul, *fe.unlearned, spec.scale));
    if (fe.post_ft)
      r.robustness_ft = take(robustness(*fe.post_ft, *fe.unlearned, spec.scale));
    if (fe.post_mix)
      r.robustness_mix = take(robustness(*fe.post_mix, *fe.unlearned, spec.scale));
  }
  return r;
}

inline MetaReport build_report(std::string_view metric_name, const FeValues &fe) {
  auto spec = metric_spec(metric_name);
  if (!spec)
    throw Error("unknown metric '" + std::string(metric_name) + "'");
  return build_report(*spec, fe);
}

//==============================================================================
// Output

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr const char *kMetaColumns[] = {
    "metric",          "practicality",  "exactness_plus", "exactness_minus",
    "robustness_ul",   "robustness_ft", "robustness_mix"};

/// Tab-separated table, one row per metric. Missing values print as NA.
inline void write_meta_table(std::ostream &out, const std::vector<MetaReport> &rows) {
  for (std::size_t i = 0; i < std::size(kMetaColumns); ++i)
    out << (i ? "\t" : "") << kMetaColumns[i];
  out << '\n';
  auto cell = [](const std::optional<double> &v) {
    return v ? format_number(*v) : std::string("NA");
  };
  for (const auto &r : rows) {
    out << r.metric_name << '\t' << (r.requires_retrained ? "no" : "yes") << '\t'
        << cell(r.exactness_plus) << '\t' << cell(r.exactness_minus) << '\t'
        << cell(r.robustness_ul) << '\t' << cell(r.robustness_ft) << '\t'
        << cell(r.robustness_mix) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const MetaReport &r) {
  nlohmann::ordered_json j;
  j["record"] = "meta_report";
  j["metric"] = r.metric_name;
  j["requires_retrained"] = r.requires_retrained;
  auto put = [&j](const char *key, const std::optional<double> &v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;
  };
  put("exactness_plus", r.exactness_plus);
  put("exactness_minus", r.exactness_minus);
  put("robustness_ul", r.robustness_ul);
  put("robustness_ft", r.robustness_ft);
  put("robustness_mix", r.robustness_mix);
  j["diagnostics"] = r.diagnostics;
  return j;
}

inline void write_meta_jsonl(std::ostream &out, const std::vector<MetaReport> &rows) {
  for (const auto &r : rows)
    out << to_json(r).dump() << '\n';
}

/// Reads the meta configuration:
///   {"metrics": [{"name": "fb", "values": {"M_r": .., "M_t": .., "M_u": ..,
///     "ul": .., "ft": .., "mix": ..}, "scale": [lo, hi], "ideal": .., "worst": ..}]}
/// Scale and anchors are optional and default to the metric's declared spec.
inline std::vector<MetaReport> meta_reports_from_json(const nlohmann::json &config) {
  if (!config.contains("metrics") || !config["metrics"].is_array())
    throw Error("meta config: expected a 'metrics' array");
  std::vector<MetaReport> rows;
  for (const auto &m : config["metrics"]) {
    const auto name = m.at("name").get<std::string>();
    auto spec = metric_spec(name).value_or(MetricSpec{name, {0, 1}, 0.0, 1.0, false});
    if (m.contains("scale")) {
      const auto sc = m["scale"].get<std::vector<double>>();
      if (sc.size() != 2)
        throw Error("meta config: scale of '" + name + "' must have two numbers");
      spec.scale = {sc[0], sc[1]};
    }
    if (m.contains("ideal"))
      spec.ideal = m["ideal"].get<double>();
    if (m.contains("worst"))
      spec.worst = m["worst"].get<double>();
    if (m.contains("requires_retrained"))
      spec.requires_retrained = m["requires_retrained"].get<bool>();

    FeValues fe;
    const auto &v = m.contains("values") ? m["values"] : nlohmann::json::object();
    auto get = [&v](const char *key) -> std::optional<double> {
      if (v.contains(key) && !v[key].is_null())
        return v[key].get<double>();
      return std::nullopt;
    };
    fe.retrained = get("M_r");
    fe.target = get("M_t");
    fe.unlearned = get("M_u");
    fe.post_ul = get("ul");
    fe.post_ft = get("ft");
    fe.post_mix = get("mix");
    rows.push_back(build_report(spec, fe));
  }
  return rows;
}

} // namespace ugauge
