#include "detforge/datagen/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "detforge/core/dataset_io.hpp"
#include "detforge/prompt/prompt.hpp"
#include "json.hpp"

namespace detforge::datagen {

namespace {

std::string lower_trimmed(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '\'') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

struct Table {
  std::string_view body;
  bool label_first = false;
};

std::optional<Table> find_table(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto header = lower_trimmed(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (header != "payload,label" && header != "label,payload") continue;

    auto body = pos < text.size() ? text.substr(pos) : std::string_view{};
    // A closing fence at the start of a line ends the table.
    for (std::size_t at = 0; at < body.size();) {
      auto line_end = body.find('\n', at);
      if (line_end == std::string_view::npos) line_end = body.size();
      const auto line = body.substr(at, line_end - at);
      if (line.find_first_not_of(" \t") != std::string_view::npos &&
          line.substr(line.find_first_not_of(" \t")).starts_with("```")) {
        body = body.substr(0, at);
        break;
      }
      at = line_end + 1;
    }
    return Table{body, header == "label,payload"};
  }
  return std::nullopt;
}

std::string join(const std::vector<std::string>& fields, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out += ',';
    out += fields[i];
  }
  return out;
}

}  // namespace

std::optional<core::Label> parse_label(std::string_view text) {
  const auto t = lower_trimmed(text);
  if (t == "1" || t == "true" || t == "malicious") return core::Label::malicious;
  if (t == "0" || t == "false" || t == "benign") return core::Label::benign;
  return std::nullopt;
}

ParsedRows parse_synthetic_rows(std::string_view text) {
  const auto table = find_table(text);
  if (!table) throw NoTabularContent("no payload,label table in the response");
  ParsedRows out;
  for (const auto& row : core::parse_csv(table->body, /*lenient=*/true)) {
    if (row.size() < 2) {
      if (!(row.size() == 1 && blank(row[0]))) ++out.dropped;
      continue;
    }
    // Unquoted commas split a payload; the extra fields are rejoined.
    const auto label = parse_label(table->label_first ? row.front() : row.back());
    auto payload = table->label_first ? join(row, 1, row.size()) : join(row, 0, row.size() - 1);
    if (!label || blank(payload)) {
      ++out.dropped;
      continue;
    }
    out.examples.push_back({std::move(payload), *label, 0});
  }
  return out;
}

core::ClassCounts SyntheticDataset::counts() const {
  core::ClassCounts c;
  for (const auto& e : examples) (e.label == core::Label::malicious ? c.malicious : c.benign) += 1;
  return c;
}

core::Dataset SyntheticDataset::to_dataset(std::string name) const {
  std::vector<core::LabeledExample> ex;
  ex.reserve(examples.size());
  for (const auto& e : examples) ex.push_back({e.payload, e.label});
  return core::Dataset(std::move(name), std::move(ex));
}

Clock steady_clock() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

std::string csv_request(std::size_t rows) {
  return "Generate " + std::to_string(rows) +
         " distinct examples, half malicious and half benign. Return only a CSV file in "
         "Markdown format with the header payload,label where label is 1 for malicious and 0 "
         "for benign.";
}

namespace {

prompt::Prompt dataset_prompt(const core::TaskSpec& task, const core::Configuration& cfg,
                              const codegen::RetrievalContext& retrieval,
                              const core::Dataset& train, const DatasetOptions& options) {
  const auto tpl = prompt::Template::dataset_generation();
  const auto shots = prompt::select_few_shot(train, cfg.n_shot, options.seed);
  auto p = prompt::build_prompt(tpl, task, shots, {});
  if (cfg.rag_enabled) {
    if (!retrieval.index || !retrieval.embedder) {
      throw InvalidArgument("configuration " + cfg.label() + " needs a RAG index");
    }
    const auto chunks = retrieval.index->retrieve(*retrieval.embedder, p.user_part, retrieval.k);
    p = prompt::build_prompt(tpl, task, shots, chunks);
  }
  p.user_part += "\n" + csv_request(options.rows_per_batch);
  return p;
}

void check(const core::Configuration& cfg, const DatasetOptions& options) {
  cfg.validate();
  if (cfg.purpose != core::Purpose::datagen) {
    throw InvalidArgument("dataset generation needs a datagen configuration");
  }
  if (options.target < 1) throw InvalidArgument("dataset target must be at least 1");
  if (options.max_batches < 1) throw InvalidArgument("max_batches must be at least 1");
}

SyntheticDataset generate_with_prompt(const prompt::Prompt& p, const core::Configuration& cfg,
                                      int dataset_index, llm::Provider& provider,
                                      llm::ResponseCache* cache, const DatasetOptions& options,
                                      SyntheticDataset* partial) {
  constexpr int kIndexStride = 100000;
  const auto clock = options.clock ? options.clock : steady_clock();
  const double start = clock();

  SyntheticDataset ds;
  ds.dataset_index = dataset_index;
  std::set<std::string> seen;
  while (ds.examples.size() < options.target) {
    const double elapsed = clock() - start;
    if (elapsed > options.timeout_seconds || ds.batches >= options.max_batches) {
      ds.generation_seconds = elapsed;
      ds.timed_out = true;
      if (partial) *partial = ds;
      throw DatasetTimeout(dataset_index, elapsed, ds.examples.size());
    }
    auto sampling = options.sampling;
    sampling.sample_offset = dataset_index * kIndexStride + ds.batches;
    const auto batch = ds.batches++;
    const auto resp = llm::sample_n(provider, cache, p, cfg, 1, sampling).front();
    ParsedRows rows;
    try {
      rows = parse_synthetic_rows(resp.text);
    } catch (const NoTabularContent&) {
      continue;
    }
    ds.dropped_rows += rows.dropped;
    for (auto& e : rows.examples) {
      if (!seen.insert(e.payload).second) {
        ++ds.duplicate_rows;
        continue;
      }
      e.batch_index = batch;
      ds.examples.push_back(std::move(e));
    }
  }
  ds.examples.resize(options.target);
  ds.generation_seconds = clock() - start;
  if (ds.generation_seconds > options.timeout_seconds) {
    ds.timed_out = true;
    if (partial) *partial = ds;
    throw DatasetTimeout(dataset_index, ds.generation_seconds, ds.examples.size());
  }
  return ds;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const core::TaskSpec& task,
                                            const core::Configuration& cfg, int dataset_index,
                                            llm::Provider& provider, llm::ResponseCache* cache,
                                            const codegen::RetrievalContext& retrieval,
                                            const core::Dataset& train,
                                            const DatasetOptions& options,
                                            SyntheticDataset* partial) {
  check(cfg, options);
  const auto p = dataset_prompt(task, cfg, retrieval, train, options);
  return generate_with_prompt(p, cfg, dataset_index, provider, cache, options, partial);
}

SyntheticDatasetRun generate_dataset_run(const core::TaskSpec& task,
                                         const core::Configuration& cfg, int m,
                                         llm::Provider& provider, llm::ResponseCache* cache,
                                         const codegen::RetrievalContext& retrieval,
                                         const core::Dataset& train,
                                         const DatasetOptions& options) {
  check(cfg, options);
  if (m < 1) throw InvalidArgument("generate_dataset_run: m must be at least 1");
  const auto p = dataset_prompt(task, cfg, retrieval, train, options);
  SyntheticDatasetRun run{task.id, cfg, {}, false, p.digest()};
  for (int j = 0; j < m; ++j) {
    SyntheticDataset partial;
    try {
      run.datasets.push_back(generate_with_prompt(p, cfg, j, provider, cache, options, &partial));
    } catch (const DatasetTimeout&) {
      run.datasets.push_back(std::move(partial));
      run.failed = true;
      break;
    }
  }
  return run;
}

namespace {

std::string dataset_file(const SyntheticDataset& ds) {
  return "dataset_" + std::to_string(ds.dataset_index) + (ds.timed_out ? ".partial.csv" : ".csv");
}

std::string examples_csv(const SyntheticDataset& ds) {
  std::string out = "payload,label\n";
  for (const auto& e : ds.examples) {
    out += core::csv_field(e.payload);
    out += e.label == core::Label::malicious ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace

std::string dataset_run_json(const SyntheticDatasetRun& run) {
  nlohmann::ordered_json j;
  j["task_id"] = run.task_id;
  j["config"] = nlohmann::ordered_json(nlohmann::json(run.config));
  j["failed"] = run.failed;
  j["prompt_digest"] = run.prompt_digest;
  auto& ds = j["datasets"] = nlohmann::ordered_json::array();
  for (const auto& d : run.datasets) {
    const auto c = d.counts();
    nlohmann::ordered_json e;
    e["dataset_index"] = d.dataset_index;
    e["file"] = dataset_file(d);
    e["size"] = d.examples.size();
    e["malicious"] = c.malicious;
    e["benign"] = c.benign;
    e["batches"] = d.batches;
    e["dropped_rows"] = d.dropped_rows;
    e["duplicate_rows"] = d.duplicate_rows;
    e["generation_seconds"] = d.generation_seconds;
    e["timed_out"] = d.timed_out;
    auto& bi = e["batch_index"] = nlohmann::ordered_json::array();
    for (const auto& x : d.examples) bi.push_back(x.batch_index);
    ds.push_back(std::move(e));
  }
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

void save_dataset_run(const SyntheticDatasetRun& run, const std::filesystem::path& dir) {
  for (const auto& d : run.datasets) core::write_file_atomic(dir / dataset_file(d), examples_csv(d));
  core::write_file_atomic(dir / "run.json", dataset_run_json(run));
}

SyntheticDatasetRun load_dataset_run(const std::filesystem::path& dir) {
  const auto manifest = dir / "run.json";
  if (!std::filesystem::exists(manifest)) throw MissingArtifact(manifest.string());
  try {
    const auto j = nlohmann::json::parse(core::read_file(manifest));
    SyntheticDatasetRun run;
    run.task_id = j.at("task_id").get<std::string>();
    run.config = j.at("config").get<core::Configuration>();
    run.failed = j.at("failed").get<bool>();
    run.prompt_digest = j.at("prompt_digest").get<std::string>();
    for (const auto& e : j.at("datasets")) {
      SyntheticDataset d;
      d.dataset_index = e.at("dataset_index").get<int>();
      d.batches = e.at("batches").get<int>();
      d.dropped_rows = e.at("dropped_rows").get<std::size_t>();
      d.duplicate_rows = e.at("duplicate_rows").get<std::size_t>();
      d.generation_seconds = e.at("generation_seconds").get<double>();
      d.timed_out = e.at("timed_out").get<bool>();
      const auto batch_index = e.at("batch_index").get<std::vector<int>>();
      const auto path = dir / e.at("file").get<std::string>();
      if (!std::filesystem::exists(path)) throw MissingArtifact(path.string());
      if (!batch_index.empty()) {
        const auto loaded = core::load_labeled_dataset(path);
        if (loaded.size() != batch_index.size()) {
          throw Error(path.string() + ": size disagrees with run.json");
        }
        for (std::size_t i = 0; i < loaded.size(); ++i) {
          d.examples.push_back({loaded[i].payload, loaded[i].label, batch_index[i]});
        }
      }
      run.datasets.push_back(std::move(d));
    }
    return run;
  } catch (const nlohmann::json::exception& e) {
    throw Error(manifest.string() + ": malformed run manifest: " + e.what());
  }
}

}  // namespace detforge::datagen
