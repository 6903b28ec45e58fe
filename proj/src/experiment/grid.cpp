#include "detforge/experiment/grid.hpp"

#include "detforge/core/error.hpp"
#include "json.hpp"

namespace detforge::experiment {

using ojson = nlohmann::ordered_json;

namespace {

ojson counts_json(const std::vector<eval::ConfusionCounts>& counts) {
  auto out = ojson::array();
  for (const auto& c : counts) out.push_back({c.tp, c.fp, c.tn, c.fn});
  return out;
}

std::vector<eval::ConfusionCounts> counts_from(const nlohmann::json& j) {
  std::vector<eval::ConfusionCounts> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 4) throw InvalidArgument("confusion cell must be [tp,fp,tn,fn]");
    out.push_back({e[0].get<std::uint64_t>(), e[1].get<std::uint64_t>(), e[2].get<std::uint64_t>(),
                   e[3].get<std::uint64_t>()});
  }
  return out;
}

ojson configs_json(const std::vector<core::Configuration>& cfgs) {
  auto out = ojson::array();
  for (const auto& c : cfgs) out.push_back(ojson(nlohmann::json(c)));
  return out;
}

}  // namespace

void EvaluationGrid::validate() const {
  for (const auto& r : runs) {
    const auto n = r.size();
    if (n == 0) throw InvalidArgument("grid run " + r.config.slug() + " has no functions");
    if (r.val.size() != n || r.test.size() != n) {
      throw InvalidArgument("grid run " + r.config.slug() + ": val/test length mismatch");
    }
    if (r.synthetic.size() != dataset_configs.size()) {
      throw InvalidArgument("grid run " + r.config.slug() + ": wrong number of dataset runs");
    }
    for (const auto& s : r.synthetic) {
      if (s.empty()) throw InvalidArgument("grid run " + r.config.slug() + ": empty dataset run");
      for (const auto& d : s) {
        if (d.size() != n) {
          throw InvalidArgument("grid run " + r.config.slug() + ": synthetic length mismatch");
        }
      }
    }
  }
}

std::string EvaluationGrid::to_json() const {
  ojson j;
  j["task_id"] = task_id;
  j["dataset_configs"] = configs_json(dataset_configs);
  j["failed_codegen"] = configs_json(failed_codegen);
  j["failed_datagen"] = configs_json(failed_datagen);
  auto& rs = j["runs"] = ojson::array();
  for (const auto& r : runs) {
    ojson e;
    e["config"] = ojson(nlohmann::json(r.config));
    e["broken"] = r.broken;
    e["val"] = counts_json(r.val);
    e["test"] = counts_json(r.test);
    auto& syn = e["synthetic"] = ojson::array();
    for (const auto& s : r.synthetic) {
      auto run = ojson::array();
      for (const auto& d : s) run.push_back(counts_json(d));
      syn.push_back(std::move(run));
    }
    rs.push_back(std::move(e));
  }
  return j.dump(1) + "\n";
}

EvaluationGrid EvaluationGrid::from_json(std::string_view text) {
  EvaluationGrid g;
  try {
    const auto j = nlohmann::json::parse(text);
    g.task_id = j.at("task_id").get<std::string>();
    g.dataset_configs = j.at("dataset_configs").get<std::vector<core::Configuration>>();
    g.failed_codegen = j.at("failed_codegen").get<std::vector<core::Configuration>>();
    g.failed_datagen = j.at("failed_datagen").get<std::vector<core::Configuration>>();
    for (const auto& e : j.at("runs")) {
      FunctionRunCounts r;
      r.config = e.at("config").get<core::Configuration>();
      r.broken = e.at("broken").get<std::vector<bool>>();
      r.val = counts_from(e.at("val"));
      r.test = counts_from(e.at("test"));
      for (const auto& s : e.at("synthetic")) {
        std::vector<std::vector<eval::ConfusionCounts>> run;
        for (const auto& d : s) run.push_back(counts_from(d));
        r.synthetic.push_back(std::move(run));
      }
      g.runs.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed evaluation grid: ") + e.what());
  }
  g.validate();
  return g;
}

std::optional<std::size_t> TaskScores::find_run(const core::Configuration& cfg) const {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].config == cfg) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> TaskScores::find_dataset_run(const core::Configuration& cfg) const {
  for (std::size_t i = 0; i < dataset_configs.size(); ++i) {
    if (dataset_configs[i] == cfg) return i;
  }
  return std::nullopt;
}

TaskScores to_scores(const EvaluationGrid& grid, eval::MetricKind kind) {
  grid.validate();
  TaskScores out;
  out.task_id = grid.task_id;
  out.kind = kind;
  out.dataset_configs = grid.dataset_configs;
  out.failed_codegen = grid.failed_codegen;
  out.failed_datagen = grid.failed_datagen;

  auto score = [&](const std::vector<eval::ConfusionCounts>& counts,
                   const std::vector<bool>& broken) {
    std::vector<double> s(counts.size(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (broken[i]) continue;
      s[i] = eval::metric(counts[i], kind);
      if (eval::degenerate(counts[i])) ++out.degenerate_cells;
    }
    return s;
  };

  for (const auto& r : grid.runs) {
    RunScores rs{r.config, score(r.val, r.broken), score(r.test, r.broken), {}};
    for (const auto& s : r.synthetic) {
      std::vector<std::vector<double>> per_dataset;
      for (const auto& d : s) per_dataset.push_back(score(d, r.broken));
      rs.synthetic.push_back(eval::mean_scores(per_dataset));
    }
    out.runs.push_back(std::move(rs));
  }
  return out;
}

}  // namespace detforge::experiment
