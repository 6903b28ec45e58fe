#include "detforge/experiment/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "detforge/core/dataset_io.hpp"

namespace detforge::experiment {

using ojson = nlohmann::ordered_json;

const Table& AnalysisReport::table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("report " + rq_id + " has no table " + name);
}

namespace {

ojson cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> ojson {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else {
          return v;
        }
      },
      c);
}

std::string cell_csv(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "";
        } else if constexpr (std::is_same_v<T, double>) {
          return core::format_real(v);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else {
          return core::csv_field(v);
        }
      },
      c);
}

Cell opt(std::optional<double> v) { return v ? Cell{*v} : Cell{}; }
Cell integer(std::size_t v) { return Cell{static_cast<std::int64_t>(v)}; }

ojson config_json(const core::Configuration& c) {
  ojson j;
  j["model_id"] = c.model_id;
  j["temperature"] = c.temperature;
  j["n_shot"] = c.n_shot;
  j["rag_enabled"] = c.rag_enabled;
  j["label"] = c.label();
  return j;
}

ojson test_json(const NamedTest& t) {
  ojson j;
  j["label"] = t.label;
  j["test"] = t.result.name;
  j["statistic"] = t.result.statistic;
  j["p"] = t.result.p;
  j["exact"] = t.result.exact;
  j["n"] = t.result.n;
  return j;
}

void require_runs(const TaskScores& s) {
  if (s.runs.empty()) throw InvalidArgument("task " + s.task_id + " has no scored function runs");
}

void require_dataset_runs(const TaskScores& s) {
  if (s.dataset_configs.empty()) {
    throw InvalidArgument("task " + s.task_id + " has no scored synthetic dataset runs");
  }
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ojson base_parameters(const TaskScores& s) {
  ojson p;
  p["task"] = s.task_id;
  p["metric"] = std::string(eval::to_string(s.kind));
  return p;
}

void add_common_flags(const TaskScores& s, AnalysisReport& r) {
  if (!s.failed_codegen.empty()) {
    r.flags.push_back(std::to_string(s.failed_codegen.size()) +
                      " function configuration(s) excluded as failed");
  }
  if (!s.failed_datagen.empty()) {
    r.flags.push_back(std::to_string(s.failed_datagen.size()) +
                      " dataset configuration(s) excluded as failed");
  }
  if (s.degenerate_cells > 0) {
    r.flags.push_back(std::to_string(s.degenerate_cells) +
                      " score cell(s) hit a zero precision or recall denominator");
  }
}

std::string level_of(const core::Configuration& c, Factor f) {
  switch (f) {
    case Factor::model: return c.model_id;
    case Factor::temperature: return core::format_real(c.temperature);
    case Factor::n_shot: return std::to_string(c.n_shot);
    case Factor::rag: return c.rag_enabled ? "true" : "false";
  }
  return {};
}

}  // namespace

std::string AnalysisReport::to_json() const {
  ojson j;
  j["rq_id"] = rq_id;
  j["parameters"] = parameters;
  j["summary"] = summary;
  auto& ts = j["tables"] = ojson::array();
  for (const auto& t : tables) {
    ojson tj;
    tj["name"] = t.name;
    tj["columns"] = t.columns;
    auto& rows = tj["rows"] = ojson::array();
    for (const auto& row : t.rows) {
      auto rj = ojson::array();
      for (const auto& c : row) rj.push_back(cell_json(c));
      rows.push_back(std::move(rj));
    }
    ts.push_back(std::move(tj));
  }
  auto& tests_json = j["test_results"] = ojson::array();
  for (const auto& t : tests) tests_json.push_back(test_json(t));
  j["narrative_flags"] = flags;
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

std::string AnalysisReport::to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += core::csv_field(table.columns[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += cell_csv(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string_view to_string(Factor factor) {
  switch (factor) {
    case Factor::model: return "model";
    case Factor::temperature: return "temperature";
    case Factor::n_shot: return "n_shot";
    case Factor::rag: return "rag";
  }
  return "model";
}

Factor parse_factor(std::string_view text) {
  if (text == "model") return Factor::model;
  if (text == "temperature") return Factor::temperature;
  if (text == "n_shot") return Factor::n_shot;
  if (text == "rag") return Factor::rag;
  throw InvalidArgument("unknown factor '" + std::string(text) +
                        "' (expected model, temperature, n_shot, rag)");
}

double run_mean(const RunScores& run) { return eval::mean(run.test); }

AnalysisReport ntd_summary(const TaskScores& scores, std::optional<Factor> factor,
                           bool per_function) {
  require_runs(scores);
  AnalysisReport r;
  r.rq_id = "ntd";
  r.parameters = base_parameters(scores);
  r.parameters["weighting"] = per_function ? "function" : "run";
  r.parameters["factor"] = factor ? ojson(std::string(to_string(*factor))) : ojson(nullptr);

  std::vector<double> means;
  std::vector<double> all;
  Table runs{"runs", {"run", "model", "temperature", "n_shot", "rag", "mean_val", "mean_test"}, {}};
  for (const auto& run : scores.runs) {
    means.push_back(run_mean(run));
    all.insert(all.end(), run.test.begin(), run.test.end());
    runs.rows.push_back({run.config.label(), run.config.model_id, run.config.temperature,
                         static_cast<std::int64_t>(run.config.n_shot),
                         std::string(run.config.rag_enabled ? "true" : "false"),
                         eval::mean(run.val), means.back()});
  }
  r.summary["runs"] = scores.runs.size();
  r.summary["functions"] = all.size();
  r.summary["grand_mean"] = per_function ? eval::mean(all) : eval::mean(means);
  r.summary["min_run_mean"] = *std::min_element(means.begin(), means.end());
  r.summary["max_run_mean"] = *std::max_element(means.begin(), means.end());
  r.tables.push_back(std::move(runs));

  if (factor) {
    std::vector<std::string> levels;
    std::map<std::string, std::vector<double>> run_means, function_scores;
    for (std::size_t i = 0; i < scores.runs.size(); ++i) {
      const auto level = level_of(scores.runs[i].config, *factor);
      if (!run_means.count(level)) levels.push_back(level);
      run_means[level].push_back(means[i]);
      auto& fs = function_scores[level];
      fs.insert(fs.end(), scores.runs[i].test.begin(), scores.runs[i].test.end());
    }
    Table groups{"by_" + std::string(to_string(*factor)), {"level", "runs", "functions", "mean"}, {}};
    for (const auto& level : levels) {
      const auto& rm = run_means[level];
      const auto& fs = function_scores[level];
      groups.rows.push_back({level, integer(rm.size()), integer(fs.size()),
                             per_function ? eval::mean(fs) : eval::mean(rm)});
    }
    r.tables.push_back(std::move(groups));
  }
  add_common_flags(scores, r);
  return r;
}

std::size_t tda_best_run(const TaskScores& scores) {
  require_runs(scores);
  std::size_t best = 0;
  double best_mean = eval::mean(scores.runs[0].val);
  for (std::size_t i = 1; i < scores.runs.size(); ++i) {
    const double m = eval::mean(scores.runs[i].val);
    if (m > best_mean) {
      best = i;
      best_mean = m;
    }
  }
  return best;
}

double run_performance_difference(const TaskScores& scores, std::size_t u, std::size_t s,
                                  std::size_t k, std::uint64_t seed) {
  const auto& run = scores.runs.at(u);
  return eval::performance_difference(run.val, run.synthetic.at(s), k, seed);
}

std::size_t best_dataset_run(const TaskScores& scores, std::size_t u, std::size_t k,
                             std::uint64_t seed) {
  require_dataset_runs(scores);
  std::size_t best = 0;
  double best_diff = run_performance_difference(scores, u, 0, k, seed);
  for (std::size_t s = 1; s < scores.dataset_configs.size(); ++s) {
    const double d = run_performance_difference(scores, u, s, k, seed);
    if (d < best_diff) {
      best = s;
      best_diff = d;
    }
  }
  return best;
}

double top_k_test(const TaskScores& scores, std::size_t u, std::size_t s, std::size_t k,
                  std::uint64_t seed) {
  const auto& run = scores.runs.at(u);
  const auto picked = eval::top_k_select(run.synthetic.at(s), k, seed);
  return eval::mean_at(run.test, picked);
}

std::string_view to_string(Rq1Factor factor) {
  switch (factor) {
    case Rq1Factor::rag: return "rag";
    case Rq1Factor::few_shot_given_rag: return "few_shot_given_rag";
    case Rq1Factor::few_shot_given_no_rag: return "few_shot_given_no_rag";
  }
  return "rag";
}

Rq1Factor parse_rq1_factor(std::string_view text) {
  if (text == "rag") return Rq1Factor::rag;
  if (text == "few_shot_given_rag") return Rq1Factor::few_shot_given_rag;
  if (text == "few_shot_given_no_rag") return Rq1Factor::few_shot_given_no_rag;
  throw InvalidArgument("unknown RQ1 factor '" + std::string(text) +
                        "' (expected rag, few_shot_given_rag, few_shot_given_no_rag)");
}

AnalysisReport rq1_effect(const TaskScores& scores, Rq1Factor factor) {
  require_runs(scores);
  // nullopt: run outside the comparison; otherwise whether the factor is on.
  auto level = [factor](const core::Configuration& c) -> std::optional<bool> {
    switch (factor) {
      case Rq1Factor::rag: return c.rag_enabled;
      case Rq1Factor::few_shot_given_rag:
        return c.rag_enabled ? std::optional<bool>(c.n_shot > 0) : std::nullopt;
      case Rq1Factor::few_shot_given_no_rag:
        return !c.rag_enabled ? std::optional<bool>(c.n_shot > 0) : std::nullopt;
    }
    return std::nullopt;
  };

  struct Group {
    std::string model;
    double temperature;
    std::vector<double> on, off;
  };
  std::vector<Group> groups;
  std::vector<double> on_scores, off_scores;
  std::size_t on_runs = 0, off_runs = 0;
  for (const auto& run : scores.runs) {
    const auto l = level(run.config);
    if (!l) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.model == run.config.model_id && g.temperature == run.config.temperature;
    });
    if (it == groups.end()) {
      groups.push_back({run.config.model_id, run.config.temperature, {}, {}});
      it = std::prev(groups.end());
    }
    (*l ? it->on : it->off).push_back(run_mean(run));
    auto& pop = *l ? on_scores : off_scores;
    pop.insert(pop.end(), run.test.begin(), run.test.end());
    ++(*l ? on_runs : off_runs);
  }
  if (on_runs == 0 || off_runs == 0) {
    throw MissingFactorLevel("RQ1 factor " + std::string(to_string(factor)) + " needs runs with " +
                             (on_runs == 0 ? "the factor on" : "the factor off"));
  }

  AnalysisReport r;
  r.rq_id = "rq1";
  r.parameters = base_parameters(scores);
  r.parameters["factor"] = std::string(to_string(factor));
  r.parameters["test"] = "mann_whitney_u, two-sided";
  r.parameters["exact_limit"] = eval::kMannWhitneyExactLimit;

  Table t{"groups", {"model", "temperature", "runs_on", "runs_off", "mean_on", "mean_off", "diff"}, {}};
  for (const auto& g : groups) {
    std::optional<double> on, off, diff;
    if (!g.on.empty()) on = eval::mean(g.on);
    if (!g.off.empty()) off = eval::mean(g.off);
    if (on && off) {
      diff = *on - *off;
    } else {
      r.flags.push_back("group (" + g.model + ", " + core::format_real(g.temperature) +
                        ") lacks one factor level");
    }
    t.rows.push_back({g.model, g.temperature, integer(g.on.size()), integer(g.off.size()),
                      opt(on), opt(off), opt(diff)});
  }
  r.tables.push_back(std::move(t));

  const auto test = eval::mann_whitney_u(on_scores, off_scores);
  r.tests.push_back({"on_vs_off", test});
  r.summary["runs_on"] = on_runs;
  r.summary["runs_off"] = off_runs;
  r.summary["functions_on"] = on_scores.size();
  r.summary["functions_off"] = off_scores.size();
  r.summary["mean_on"] = eval::mean(on_scores);
  r.summary["mean_off"] = eval::mean(off_scores);
  r.summary["diff"] = eval::mean(on_scores) - eval::mean(off_scores);

  const auto best = tda_best_run(scores);
  const auto best_level = level(scores.runs[best].config);
  r.summary["u_best"] = config_json(scores.runs[best].config);
  r.summary["u_best_factor_on"] = best_level ? ojson(*best_level) : ojson(nullptr);
  add_common_flags(scores, r);
  return r;
}

AnalysisReport rq2_effect(const TaskScores& scores, const std::vector<std::size_t>& ks,
                          std::uint64_t seed) {
  require_runs(scores);
  require_dataset_runs(scores);
  AnalysisReport r;
  r.rq_id = "rq2";
  r.parameters = base_parameters(scores);
  r.parameters["ks"] = ks;
  r.parameters["seed"] = seed;
  r.parameters["test"] = "wilcoxon_signed_rank, two-sided";
  r.parameters["exact_max_n"] = eval::kWilcoxonExactMaxN;

  Table pairs{"pairs", {"k", "run", "dataset_run", "top_k_test", "run_mean", "improvement"}, {}};
  Table by_k{"by_k",
             {"k", "pairs", "mean", "q1", "median", "q3", "min", "max", "fraction_improved"},
             {}};
  for (const auto k : ks) {
    std::vector<double> improvements, top, base;
    for (std::size_t u = 0; u < scores.runs.size(); ++u) {
      const double m = run_mean(scores.runs[u]);
      for (std::size_t s = 0; s < scores.dataset_configs.size(); ++s) {
        const double t = top_k_test(scores, u, s, k, seed);
        top.push_back(t);
        base.push_back(m);
        improvements.push_back(t - m);
        pairs.rows.push_back({integer(k), scores.runs[u].config.label(),
                              scores.dataset_configs[s].label(), t, m, t - m});
      }
    }
    const auto improved = std::count_if(improvements.begin(), improvements.end(),
                                        [](double d) { return d > 0.0; });
    by_k.rows.push_back({integer(k), integer(improvements.size()), eval::mean(improvements),
                         quantile(improvements, 0.25), quantile(improvements, 0.5),
                         quantile(improvements, 0.75),
                         *std::min_element(improvements.begin(), improvements.end()),
                         *std::max_element(improvements.begin(), improvements.end()),
                         static_cast<double>(improved) / static_cast<double>(improvements.size())});
    r.tests.push_back({"k=" + std::to_string(k), eval::wilcoxon_signed_rank(top, base)});
  }
  r.tables.push_back(std::move(by_k));

  const auto u = tda_best_run(scores);
  const auto& best = scores.runs[u];
  Table tda{"tda",
            {"k", "s_best", "performance_difference", "top_k_test_s_best", "top_k_test_val",
             "u_best_mean", "improvement"},
            {}};
  for (const auto k : ks) {
    const auto s = best_dataset_run(scores, u, k, seed);
    const double via_s = top_k_test(scores, u, s, k, seed);
    const double via_val = eval::mean_at(best.test, eval::top_k_select(best.val, k, seed));
    tda.rows.push_back({integer(k), scores.dataset_configs[s].label(),
                        run_performance_difference(scores, u, s, k, seed), via_s, via_val,
                        run_mean(best), via_s - run_mean(best)});
  }
  r.tables.push_back(std::move(tda));
  r.tables.push_back(std::move(pairs));
  r.summary["runs"] = scores.runs.size();
  r.summary["dataset_runs"] = scores.dataset_configs.size();
  r.summary["u_best"] = config_json(best.config);
  add_common_flags(scores, r);
  return r;
}

const std::map<std::string, double>& baseline_scores() {
  static const std::map<std::string, double> scores{
      {"CNN", 0.998}, {"MLP", 0.995}, {"SOFIA", 0.993}};
  return scores;
}

std::vector<std::string> default_baselines(const std::string& task_id) {
  if (task_id == "xss") return {"CNN", "MLP"};
  if (task_id == "sqli") return {"SOFIA"};
  return {};
}

AnalysisReport rq3_compare(const TaskScores& scores, const std::vector<std::string>& baselines,
                           const std::vector<std::size_t>& ks, std::uint64_t seed) {
  require_runs(scores);
  AnalysisReport r;
  r.rq_id = "rq3";
  r.parameters = base_parameters(scores);
  r.parameters["ks"] = ks;
  r.parameters["seed"] = seed;
  r.parameters["baselines"] = baselines;

  Table t{"comparison", {"method", "k", "value", "configuration"}, {}};
  for (const auto& name : baselines) {
    const auto it = baseline_scores().find(name);
    if (it == baseline_scores().end()) {
      r.flags.push_back("baseline " + name + " has no reference score; row omitted");
      continue;
    }
    t.rows.push_back({name, Cell{}, it->second, std::string("reference constant")});
  }

  const auto u = tda_best_run(scores);
  const auto& best = scores.runs[u];
  for (const auto k : ks) {
    const double via_val = eval::mean_at(best.test, eval::top_k_select(best.val, k, seed));
    t.rows.push_back({std::string("Ours"), integer(k), via_val, best.config.label()});
  }
  if (!scores.dataset_configs.empty()) {
    for (const auto k : ks) {
      const auto s = best_dataset_run(scores, u, k, seed);
      t.rows.push_back({std::string("Ours (Self-Ranking)"), integer(k),
                        top_k_test(scores, u, s, k, seed),
                        best.config.label() + " / " + scores.dataset_configs[s].label()});
    }
  } else {
    r.flags.push_back("no synthetic dataset runs; Self-Ranking rows omitted");
  }

  auto prompt_baseline = [&](const std::string& name, auto member) {
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < scores.runs.size(); ++i) {
      const auto& c = scores.runs[i].config;
      if (!member(c)) continue;
      if (!pick || eval::mean(scores.runs[i].val) > eval::mean(scores.runs[*pick].val)) pick = i;
    }
    if (!pick) {
      r.flags.push_back(name + ": no run with that prompt");
      t.rows.push_back({name, Cell{}, Cell{}, Cell{}});
      return;
    }
    t.rows.push_back(
        {name, Cell{}, run_mean(scores.runs[*pick]), scores.runs[*pick].config.label()});
  };
  prompt_baseline("Baseline (Few-shot)",
                  [](const core::Configuration& c) { return !c.rag_enabled && c.n_shot > 0; });
  prompt_baseline("Baseline (Basic Prompt)",
                  [](const core::Configuration& c) { return !c.rag_enabled && c.n_shot == 0; });
  r.tables.push_back(std::move(t));
  r.summary["u_best"] = config_json(best.config);
  add_common_flags(scores, r);
  return r;
}

namespace {

TransferDirection transfer_direction(const TaskScores& source, const TaskScores& target,
                                     const std::vector<std::size_t>& ks, std::uint64_t seed,
                                     bool strict, std::vector<std::string>& flags) {
  require_runs(source);
  require_runs(target);
  require_dataset_runs(source);
  require_dataset_runs(target);
  TransferDirection dir{source.task_id, target.task_id, {}};
  const auto u_src = tda_best_run(source);
  const auto u_tgt = tda_best_run(target);
  for (const auto k : ks) {
    TransferRow row;
    row.k = k;
    const auto s_tgt = best_dataset_run(target, u_tgt, k, seed);
    row.u_best = target.runs[u_tgt].config;
    row.s_best = target.dataset_configs[s_tgt];
    row.best = top_k_test(target, u_tgt, s_tgt, k, seed);

    double sum = 0.0;
    for (std::size_t u = 0; u < target.runs.size(); ++u) {
      for (std::size_t s = 0; s < target.dataset_configs.size(); ++s) {
        sum += top_k_test(target, u, s, k, seed);
      }
    }
    row.average = sum / static_cast<double>(target.runs.size() * target.dataset_configs.size());

    const auto s_src = best_dataset_run(source, u_src, k, seed);
    row.u_transf = source.runs[u_src].config;
    row.s_transf = source.dataset_configs[s_src];
    const auto u_on_target = target.find_run(row.u_transf);
    const auto s_on_target = target.find_dataset_run(row.s_transf);
    if (u_on_target && s_on_target) {
      row.transferred = top_k_test(target, *u_on_target, *s_on_target, k, seed);
    } else {
      const auto missing = !u_on_target ? row.u_transf.label() : row.s_transf.label();
      const auto msg = "k=" + std::to_string(k) + ": configuration " + missing + " from " +
                       source.task_id + " is unavailable on " + target.task_id;
      if (strict) throw TransferredConfigUnavailable(msg);
      flags.push_back(msg);
    }
    dir.rows.push_back(std::move(row));
  }
  return dir;
}

}  // namespace

TransferabilityReport rq4_transfer(const TaskScores& first, const TaskScores& second,
                                   const std::vector<std::size_t>& ks, std::uint64_t seed,
                                   bool strict) {
  if (first.kind != second.kind) throw InvalidArgument("rq4: tasks scored with different metrics");
  TransferabilityReport out;
  out.kind = first.kind;
  out.seed = seed;
  out.directions.push_back(transfer_direction(second, first, ks, seed, strict, out.flags));
  out.directions.push_back(transfer_direction(first, second, ks, seed, strict, out.flags));
  return out;
}

AnalysisReport TransferabilityReport::to_report() const {
  AnalysisReport r;
  r.rq_id = "rq4";
  for (const auto& d : directions) {
    Table t{"task_" + d.target_task,
            {"k", "best", "average", "transferred", "u_best", "s_best", "u_transf", "s_transf"},
            {}};
    for (const auto& row : d.rows) {
      t.rows.push_back({integer(row.k), row.best, row.average, opt(row.transferred),
                        row.u_best.label(), row.s_best.label(), row.u_transf.label(),
                        row.s_transf.label()});
    }
    r.tables.push_back(std::move(t));
  }
  if (!directions.empty()) {
    r.parameters["tasks"] = {directions[0].target_task, directions[0].source_task};
    std::vector<std::size_t> ks;
    for (const auto& row : directions[0].rows) ks.push_back(row.k);
    r.parameters["ks"] = ks;
  }
  r.parameters["metric"] = std::string(eval::to_string(kind));
  r.parameters["seed"] = seed;
  r.flags = flags;
  return r;
}

}  // namespace detforge::experiment
