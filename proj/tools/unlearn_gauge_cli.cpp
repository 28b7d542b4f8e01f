// unlearn-gauge: command-line front end for the evaluation library.
//
//   unlearn-gauge validate <files...> [--kind score|generation|truth_ratio|dataset]
//   unlearn-gauge dcue <u_f> <o_f> <u_v> <o_v>
//   unlearn-gauge baseline <metric> [--gen F] [--tr-r F --tr-u F]
//                 [--members F --nonmembers F --members-r F --nonmembers-r F]
//   unlearn-gauge meta <config.json>
//   unlearn-gauge simulate [scenario] [--mode M] [--meta] [--print-scenario]
//   unlearn-gauge losses [--bundles F | --nll-theta X ...]
//   unlearn-gauge report <jsonl files...>
//
// Global flags: --alpha, --k-percent, --seed, --out, --format {table,jsonl}.

#include "unlearn_gauge/unlearn_gauge.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using ugauge::format_number;
using ojson = nlohmann::ordered_json;

struct GlobalOptions {
  double alpha = 0.05;
  double k_percent = 20.0;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string format = "table";

  bool jsonl() const { return format == "jsonl"; }
};

/// Writes to --out when given, stdout otherwise.
class Output {
public:
  explicit Output(const std::string &path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_)
        throw ugauge::Error("cannot write " + path);
    }
  }
  std::ostream &stream() { return file_ ? *file_ : std::cout; }

private:
  std::unique_ptr<std::ofstream> file_;
};

//==============================================================================
// validate

int cmd_validate(const GlobalOptions &, const std::vector<std::string> &paths,
                 const std::string &kind) {
  bool ok = true;
  for (const auto &p : paths) {
    try {
      std::size_t n = 0;
      if (kind == "score") {
        const auto log = ugauge::load_score_log(p);
        n = log.entries.size();
        std::size_t no_core = 0;
        for (const auto &e : log.entries)
          no_core += e.core_token_indices.empty();
        std::cout << "OK\t" << p << "\tentries=" << n << "\tno_core_tokens=" << no_core << '\n';
        continue;
      }
      if (kind == "generation")
        n = ugauge::load_generation_log(p).entries.size();
      else if (kind == "truth_ratio")
        n = ugauge::load_truth_ratio_log(p).values.size();
      else if (kind == "dataset")
        n = ugauge::load_dataset(p).size();
      else
        throw ugauge::Error("unknown kind '" + kind + "'");
      std::cout << "OK\t" << p << "\tentries=" << n << '\n';
    } catch (const ugauge::Error &ex) {
      ok = false;
      std::cout << "ERROR\t" << p << "\t" << ex.what() << '\n';
    }
  }
  return ok ? 0 : 1;
}

//==============================================================================
// dcue

const char *verdict(double r_dcue, double alpha) {
  return r_dcue >= alpha ? "consistent_with_unlearning" : "not_unlearned";
}

int cmd_dcue(const GlobalOptions &g, const std::vector<std::string> &paths) {
  const auto u_f = ugauge::load_score_log(paths.at(0));
  const auto o_f = ugauge::load_score_log(paths.at(1));
  const auto u_v = ugauge::load_score_log(paths.at(2));
  const auto o_v = ugauge::load_score_log(paths.at(3));
  for (const auto *log : {&u_f, &o_f, &u_v, &o_v}) {
    std::size_t skipped = 0;
    for (const auto &e : log->entries)
      skipped += e.core_token_indices.empty();
    if (skipped)
      std::cerr << "note: " << log->header.model_id << " on " << log->header.dataset_id
                << ": " << skipped << " entries without core tokens skipped\n";
  }
  const auto r = ugauge::evaluate_dcue(u_f, o_f, u_v, o_v);
  Output out(g.out_path);
  auto &os = out.stream();
  if (g.jsonl()) {
    ojson j;
    j["record"] = "dcue";
    j["s_ouf"] = r.s_ouf;
    j["s_ouv"] = r.s_ouv;
    j["delta_s"] = r.delta_s;
    j["s_corr"] = r.s_corr;
    j["n_eff"] = r.n_eff;
    j["r_dcue"] = *r.r_dcue;
    j["verdict"] = verdict(*r.r_dcue, g.alpha);
    os << j.dump() << '\n';
  } else {
    os << "s_ouf\ts_ouv\tdelta_s\ts_corr\tn_eff\tr_dcue\tverdict\n"
       << format_number(r.s_ouf) << '\t' << format_number(r.s_ouv) << '\t'
       << format_number(r.delta_s) << '\t' << format_number(r.s_corr) << '\t' << r.n_eff << '\t'
       << format_number(*r.r_dcue) << '\t' << verdict(*r.r_dcue, g.alpha) << '\n';
  }
  return 0;
}

//==============================================================================
// baseline

struct BaselineInputs {
  std::string gen;
  std::string tr_r, tr_u;
  std::string members, nonmembers, members_r, nonmembers_r;
};

ojson metric_json(const ugauge::MetricScore &s) {
  ojson j;
  j["record"] = "metric";
  j["metric"] = s.metric_name;
  j["value"] = s.value;
  j["scale"] = {s.scale.lo, s.scale.hi};
  j["ideal"] = s.ideal;
  j["worst"] = s.worst;
  j["count"] = s.count;
  if (s.diagnostic)
    j["diagnostic"] = *s.diagnostic;
  return j;
}

void write_metric(std::ostream &os, const GlobalOptions &g, const ugauge::MetricScore &s) {
  if (g.jsonl()) {
    os << metric_json(s).dump() << '\n';
    return;
  }
  os << "metric\tvalue\tscale_lo\tscale_hi\tideal\tworst\tcount\n"
     << s.metric_name << '\t' << format_number(s.value) << '\t' << format_number(s.scale.lo)
     << '\t' << format_number(s.scale.hi) << '\t' << format_number(s.ideal) << '\t'
     << format_number(s.worst) << '\t' << s.count << '\n';
  if (s.diagnostic)
    std::cerr << "note: " << *s.diagnostic << '\n';
}

int cmd_baseline(const GlobalOptions &g, const std::string &metric, const BaselineInputs &in) {
  auto need = [&](const std::string &path, const char *flag) {
    if (path.empty())
      throw ugauge::Error(metric + ": missing " + flag);
    return path;
  };
  ugauge::MetricScore score;
  if (metric == "qa" || metric == "fb" || metric == "aa") {
    const auto gen = ugauge::load_generation_log(need(in.gen, "--gen"));
    const auto kind = metric == "qa"   ? ugauge::TextSimKind::qa
                      : metric == "fb" ? ugauge::TextSimKind::fb
                                       : ugauge::TextSimKind::aa;
    score = ugauge::text_sim_metric(gen, kind);
  } else if (metric == "verbmem") {
    score = ugauge::verb_mem(ugauge::load_generation_log(need(in.gen, "--gen")));
  } else if (metric == "knowmem") {
    score = ugauge::know_mem(ugauge::load_generation_log(need(in.gen, "--gen")));
  } else if (metric == "qa_eval") {
    score = ugauge::qa_eval_accuracy(ugauge::load_generation_log(need(in.gen, "--gen")));
  } else if (metric == "prob_eval") {
    score = ugauge::prob_eval_accuracy(ugauge::load_generation_log(need(in.gen, "--gen")));
  } else if (metric == "tr_eval") {
    const auto tr_u = ugauge::load_truth_ratio_log(need(in.tr_u, "--tr-u"));
    if (in.tr_r.empty())
      throw ugauge::RequiresRetrainedError("tr_eval");
    const auto tr_r = ugauge::load_truth_ratio_log(in.tr_r);
    score = ugauge::tr_eval(tr_r, tr_u);
  } else if (metric == "privleak") {
    const auto mem = ugauge::load_score_log(need(in.members, "--members"));
    const auto non = ugauge::load_score_log(need(in.nonmembers, "--nonmembers"));
    if (in.members_r.empty() || in.nonmembers_r.empty())
      throw ugauge::RequiresRetrainedError("privleak");
    const auto mem_r = ugauge::load_score_log(in.members_r);
    const auto non_r = ugauge::load_score_log(in.nonmembers_r);
    if (mem_r.header.model_role != ugauge::ModelRole::retrained)
      throw ugauge::RequiresRetrainedError("privleak");
    score = ugauge::privleak(ugauge::min_k_auc(mem, non, g.k_percent),
                             ugauge::min_k_auc(mem_r, non_r, g.k_percent));
  } else {
    throw ugauge::Error("unknown metric '" + metric + "'");
  }
  Output out(g.out_path);
  write_metric(out.stream(), g, score);
  return 0;
}

//==============================================================================
// meta

void write_reports(const GlobalOptions &g, const std::vector<ugauge::MetaReport> &rows) {
  Output out(g.out_path);
  if (g.jsonl())
    ugauge::write_meta_jsonl(out.stream(), rows);
  else
    ugauge::write_meta_table(out.stream(), rows);
  for (const auto &r : rows)
    for (const auto &d : r.diagnostics)
      std::cerr << "note: " << r.metric_name << ": " << d << '\n';
}

int cmd_meta(const GlobalOptions &g, const std::string &config_path) {
  std::ifstream in(config_path);
  if (!in)
    throw ugauge::Error("cannot open " + config_path);
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &ex) {
    throw ugauge::Error(config_path + ": " + ex.what());
  }
  write_reports(g, ugauge::meta_reports_from_json(config));
  return 0;
}

//==============================================================================
// simulate

int cmd_simulate(const GlobalOptions &g, const std::string &scenario_path,
                 const std::string &mode, bool meta, bool print_scenario) {
  namespace sim = ugauge::sim;
  auto s = scenario_path.empty() ? sim::SimScenario{} : sim::load_scenario(scenario_path);
  if (g.seed)
    s.seed = *g.seed;
  if (!mode.empty()) {
    std::istringstream line("u_mode = " + mode);
    const auto parsed = sim::parse_scenario(line, "--mode");
    s.u_mode = parsed.u_mode;
    s.forget_degree = parsed.forget_degree;
  }
  s.significance = g.alpha;
  s.validate();

  Output out(g.out_path);
  auto &os = out.stream();
  if (print_scenario) {
    sim::write_scenario(os, s);
    return 0;
  }
  if (meta) {
    const std::vector rows{sim::dcue_meta_report(s)};
    if (g.jsonl())
      ugauge::write_meta_jsonl(os, rows);
    else
      ugauge::write_meta_table(os, rows);
    return 0;
  }

  const auto run = sim::run_validation(s);
  if (g.jsonl()) {
    for (const auto &p : run.pairs) {
      ojson j;
      j["record"] = "trial";
      j["trial_index"] = p.trial;
      j["p_direct"] = p.p_direct;
      j["p_approx"] = p.p_approx;
      j["agree"] = sim::agrees(p.p_direct, p.p_approx, s.significance, s.agreement_gap);
      os << j.dump() << '\n';
    }
    ojson j;
    j["record"] = "agreement";
    j["agreement_count"] = run.agreement_count;
    j["trials"] = run.trials;
    j["seed"] = s.seed;
    os << j.dump() << '\n';
  } else {
    os << "trial_index\tp_direct\tp_approx\tagree\n";
    for (const auto &p : run.pairs)
      os << p.trial << '\t' << format_number(p.p_direct) << '\t' << format_number(p.p_approx)
         << '\t' << (sim::agrees(p.p_direct, p.p_approx, s.significance, s.agreement_gap) ? 1 : 0)
         << '\n';
    os << "# agreement " << run.agreement_count << "/" << run.trials << " seed=" << s.seed
       << '\n';
  }
  return 0;
}

//==============================================================================
// losses

struct LossFlags {
  std::string bundles;
  ugauge::LikelihoodBundle single;
  std::optional<double> nll_ref, nll_retain, nll_idk, nll_ref_idk;
};

ugauge::LikelihoodBundle bundle_from_json(const nlohmann::json &j) {
  ugauge::LikelihoodBundle b;
  b.nll_theta = j.at("nll_theta").get<double>();
  auto opt = [&j](const char *key) -> std::optional<double> {
    if (j.contains(key) && !j[key].is_null())
      return j[key].get<double>();
    return std::nullopt;
  };
  b.nll_ref = opt("nll_ref");
  b.nll_retain = opt("nll_retain");
  b.nll_idk = opt("nll_idk");
  b.nll_ref_idk = opt("nll_ref_idk");
  b.answer_len = j.value("answer_len", 1);
  b.beta = j.value("beta", 1.0);
  b.gamma = j.value("gamma", 0.0);
  return b;
}

int cmd_losses(const GlobalOptions &g, LossFlags flags) {
  std::vector<ugauge::LikelihoodBundle> bundles;
  if (!flags.bundles.empty()) {
    std::ifstream in(flags.bundles);
    if (!in)
      throw ugauge::Error("cannot open " + flags.bundles);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      try {
        bundles.push_back(bundle_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception &ex) {
        throw ugauge::ParseError(flags.bundles, n, ex.what());
      }
    }
    if (bundles.empty())
      throw ugauge::Error(flags.bundles + ": no bundles");
  } else {
    flags.single.nll_ref = flags.nll_ref;
    flags.single.nll_retain = flags.nll_retain;
    flags.single.nll_idk = flags.nll_idk;
    flags.single.nll_ref_idk = flags.nll_ref_idk;
    bundles.push_back(flags.single);
  }

  using LossFn = double (*)(const ugauge::LikelihoodBundle &);
  const std::pair<const char *, LossFn> losses[] = {
      {"ga", ugauge::ga_loss},   {"gd", ugauge::gd_loss},   {"idk", ugauge::idk_loss},
      {"dpo", ugauge::dpo_loss}, {"npo", ugauge::npo_loss}, {"simnpo", ugauge::simnpo_loss}};

  Output out(g.out_path);
  auto &os = out.stream();
  if (!g.jsonl())
    os << "loss\tmean\tcount\tstatus\n";
  for (const auto &[name, fn] : losses) {
    double sum = 0.0;
    std::optional<std::string> problem;
    for (const auto &b : bundles) {
      try {
        sum += fn(b);
      } catch (const ugauge::DomainError &ex) {
        problem = ex.what();
        break;
      }
    }
    const double mean = sum / static_cast<double>(bundles.size());
    if (g.jsonl()) {
      ojson j;
      j["record"] = "loss";
      j["loss"] = name;
      if (problem)
        j["mean"] = nullptr;
      else
        j["mean"] = mean;
      j["count"] = bundles.size();
      j["status"] = problem ? *problem : "ok";
      os << j.dump() << '\n';
    } else {
      os << name << '\t' << (problem ? "NA" : format_number(mean)) << '\t' << bundles.size()
         << '\t' << (problem ? *problem : "ok") << '\n';
    }
  }
  return 0;
}

//==============================================================================
// report

/// Renders records written by the other subcommands with --format jsonl.
int cmd_report(const GlobalOptions &g, const std::vector<std::string> &paths) {
  std::vector<ojson> dcue, metrics, meta, other;
  for (const auto &p : paths) {
    std::ifstream in(p);
    if (!in)
      throw ugauge::Error("cannot open " + p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      ojson j;
      try {
        j = ojson::parse(line);
      } catch (const nlohmann::json::exception &ex) {
        throw ugauge::ParseError(p, n, ex.what());
      }
      const auto kind = j.value("record", std::string());
      if (kind == "dcue")
        dcue.push_back(std::move(j));
      else if (kind == "metric")
        metrics.push_back(std::move(j));
      else if (kind == "meta_report")
        meta.push_back(std::move(j));
      else
        other.push_back(std::move(j));
    }
  }
  Output out(g.out_path);
  auto &os = out.stream();
  if (g.jsonl()) {
    for (const auto *group : {&dcue, &metrics, &meta, &other})
      for (const auto &j : *group)
        os << j.dump() << '\n';
    return 0;
  }
  auto num = [](const ojson &v) {
    return v.is_number() ? format_number(v.get<double>()) : std::string("NA");
  };
  if (!dcue.empty()) {
    os << "# dcue\ns_ouf\ts_ouv\tdelta_s\ts_corr\tn_eff\tr_dcue\n";
    for (const auto &j : dcue)
      os << num(j["s_ouf"]) << '\t' << num(j["s_ouv"]) << '\t' << num(j["delta_s"]) << '\t'
         << num(j["s_corr"]) << '\t' << j.value("n_eff", 0) << '\t' << num(j["r_dcue"]) << '\n';
  }
  if (!metrics.empty()) {
    os << "# metrics\nmetric\tvalue\tideal\tworst\tcount\n";
    for (const auto &j : metrics)
      os << j.value("metric", std::string("?")) << '\t' << num(j["value"]) << '\t'
         << num(j["ideal"]) << '\t' << num(j["worst"]) << '\t' << j.value("count", 0) << '\n';
  }
  if (!meta.empty()) {
    os << "# meta\n";
    for (std::size_t i = 0; i < std::size(ugauge::kMetaColumns); ++i)
      os << (i ? "\t" : "") << ugauge::kMetaColumns[i];
    os << '\n';
    for (const auto &j : meta)
      os << j.value("metric", std::string("?")) << '\t'
         << (j.value("requires_retrained", false) ? "no" : "yes") << '\t'
         << num(j["exactness_plus"]) << '\t' << num(j["exactness_minus"]) << '\t'
         << num(j["robustness_ul"]) << '\t' << num(j["robustness_ft"]) << '\t'
         << num(j["robustness_mix"]) << '\n';
  }
  if (!other.empty())
    os << "# skipped " << other.size() << " unrecognized records\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Statistical evaluation of machine-unlearning claims", "unlearn-gauge"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--alpha", g.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  app.add_option("--k-percent", g.k_percent, "Min-K% Prob percentage")
      ->check(CLI::Range(0.0, 100.0));
  app.add_option("--seed", g.seed, "Simulator seed (overrides the scenario file)");
  app.add_option("--out", g.out_path, "Output file (default stdout)");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"table", "jsonl"}));

  std::function<int()> run;

  auto *validate = app.add_subcommand("validate", "Validate log or dataset files");
  std::vector<std::string> validate_paths;
  std::string validate_kind = "score";
  validate->add_option("files", validate_paths)->required()->check(CLI::ExistingFile);
  validate->add_option("--kind", validate_kind, "File kind")
      ->check(CLI::IsMember({"score", "generation", "truth_ratio", "dataset"}));
  validate->callback([&] { run = [&] { return cmd_validate(g, validate_paths, validate_kind); }; });

  auto *dcue = app.add_subcommand("dcue", "Score M_u with DCUE from four score logs");
  std::vector<std::string> dcue_paths;
  dcue->add_option("logs", dcue_paths, "u_f o_f u_v o_v")
      ->required()
      ->expected(4)
      ->check(CLI::ExistingFile);
  dcue->callback([&] { run = [&] { return cmd_dcue(g, dcue_paths); }; });

  auto *baseline = app.add_subcommand("baseline", "Compute a baseline metric");
  std::string metric;
  BaselineInputs binputs;
  baseline->add_option("metric", metric)
      ->required()
      ->check(CLI::IsMember({"qa", "fb", "aa", "verbmem", "knowmem", "qa_eval", "prob_eval",
                             "tr_eval", "privleak"}));
  baseline->add_option("--gen", binputs.gen, "Generation log")->check(CLI::ExistingFile);
  baseline->add_option("--tr-r", binputs.tr_r, "Truth ratios of M_r")->check(CLI::ExistingFile);
  baseline->add_option("--tr-u", binputs.tr_u, "Truth ratios of M_u")->check(CLI::ExistingFile);
  baseline->add_option("--members", binputs.members, "M_u score log on forget data")
      ->check(CLI::ExistingFile);
  baseline->add_option("--nonmembers", binputs.nonmembers, "M_u score log on holdout data")
      ->check(CLI::ExistingFile);
  baseline->add_option("--members-r", binputs.members_r, "M_r score log on forget data")
      ->check(CLI::ExistingFile);
  baseline->add_option("--nonmembers-r", binputs.nonmembers_r, "M_r score log on holdout data")
      ->check(CLI::ExistingFile);
  baseline->callback([&] { run = [&] { return cmd_baseline(g, metric, binputs); }; });

  auto *meta = app.add_subcommand("meta", "Exactness/robustness table from metric values");
  std::string meta_config;
  meta->add_option("config", meta_config)->required()->check(CLI::ExistingFile);
  meta->callback([&] { run = [&] { return cmd_meta(g, meta_config); }; });

  auto *simulate = app.add_subcommand("simulate", "Direct-vs-approximate validation run");
  std::string scenario_path, mode;
  bool sim_meta = false, print_scenario = false;
  simulate->add_option("scenario", scenario_path)->check(CLI::ExistingFile);
  simulate->add_option("--mode", mode, "as_retrained | as_target | 'interpolated <degree>'");
  simulate->add_flag("--meta", sim_meta, "Print DCUE's own exactness/robustness row");
  simulate->add_flag("--print-scenario", print_scenario, "Print the effective scenario");
  simulate->callback(
      [&] { run = [&] { return cmd_simulate(g, scenario_path, mode, sim_meta, print_scenario); }; });

  auto *losses = app.add_subcommand("losses", "Evaluate unlearning objectives");
  LossFlags lflags;
  losses->add_option("--bundles", lflags.bundles, "JSONL file of likelihood bundles")
      ->check(CLI::ExistingFile);
  losses->add_option("--nll-theta", lflags.single.nll_theta);
  losses->add_option("--nll-ref", lflags.nll_ref);
  losses->add_option("--nll-retain", lflags.nll_retain);
  losses->add_option("--nll-idk", lflags.nll_idk);
  losses->add_option("--nll-ref-idk", lflags.nll_ref_idk);
  losses->add_option("--answer-len", lflags.single.answer_len);
  losses->add_option("--beta", lflags.single.beta);
  losses->add_option("--gamma", lflags.single.gamma);
  losses->callback([&] { run = [&] { return cmd_losses(g, lflags); }; });

  auto *report = app.add_subcommand("report", "Render JSONL records as tables");
  std::vector<std::string> report_paths;
  report->add_option("files", report_paths)->required()->check(CLI::ExistingFile);
  report->callback([&] { run = [&] { return cmd_report(g, report_paths); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return run ? run() : 1;
  } catch (const std::exception &ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
}
