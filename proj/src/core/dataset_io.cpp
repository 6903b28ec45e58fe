#include "detforge/core/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "detforge/core/rng.hpp"

namespace detforge::core {

std::vector<std::vector<std::string>> parse_csv(std::string_view text, bool lenient) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;  // anything (even "") seen for the current field
  std::size_t i = 0;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // A physically empty line yields no record.
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };

  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else if (lenient) {
          field += c;
        } else {
          throw InvalidArgument("csv: stray quote in unquoted field at byte " +
                                std::to_string(i));
        }
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_row();
        ++i;
        break;
      case '\n':
        end_row();
        ++i;
        break;
      default:
        field += c;
        field_started = true;
        ++i;
    }
  }
  if (in_quotes && !lenient) throw InvalidArgument("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableFile(path.string(), "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw UnreadableFile(path.string(), "read error");
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UnreadableFile(tmp.string(), "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw UnreadableFile(tmp.string(), "write error");
  }
  std::filesystem::rename(tmp, path);
}

Dataset load_labeled_dataset(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::string text = read_file(path);
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);

  std::vector<std::vector<std::string>> rows;
  try {
    rows = parse_csv(text);
  } catch (const InvalidArgument& e) {
    throw UnreadableFile(name, e.what());
  }
  if (rows.empty() || rows[0] != std::vector<std::string>{"payload", "label"}) {
    throw MissingHeader(name);
  }

  std::vector<LabeledExample> examples;
  examples.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 2) {
      throw UnreadableFile(name, "row " + std::to_string(r) + ": expected 2 fields, got " +
                                     std::to_string(row.size()));
    }
    Label label;
    if (row[1] == "1") {
      label = Label::malicious;
    } else if (row[1] == "0") {
      label = Label::benign;
    } else {
      throw BadLabel(name, r, row[1]);
    }
    examples.push_back(LabeledExample{row[0], label});
  }
  return Dataset(path.stem().string(), std::move(examples));
}

std::string dataset_to_csv(const Dataset& d) {
  std::string out = "payload,label\n";
  for (const auto& e : d.examples()) {
    out += csv_field(e.payload);
    out += e.label == Label::malicious ? ",1\n" : ",0\n";
  }
  return out;
}

void save_labeled_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_csv(d));
}

DatasetSplit split_dataset(const Dataset& d, SplitRatios ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0)) {
    throw InvalidArgument("split ratios must all be positive");
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < d.size(); ++i) {
    by_class[d[i].label == Label::malicious ? 1 : 0].push_back(i);
  }
  if (by_class[1].empty()) throw EmptyClass(Label::malicious);
  if (by_class[0].empty()) throw EmptyClass(Label::benign);

  // piece[i] in {0 train, 1 val, 2 test}
  std::vector<int> piece(d.size(), 0);
  SeededRng rng(seed);
  for (int cls : {1, 0}) {
    auto idx = by_class[cls];
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n = static_cast<double>(idx.size());
    const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.val + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
    for (std::size_t j = 0; j < n_val; ++j) piece[idx[j]] = 1;
    for (std::size_t j = n_val; j < n_val + n_test; ++j) piece[idx[j]] = 2;
  }

  std::vector<LabeledExample> parts[3];
  for (std::size_t i = 0; i < d.size(); ++i) parts[piece[i]].push_back(d[i]);
  for (int p = 0; p < 3; ++p) {
    if (parts[p].empty()) throw InvalidArgument("split produced an empty piece; dataset too small");
  }
  return DatasetSplit{Dataset(d.name() + "_train", std::move(parts[0])),
                      Dataset(d.name() + "_val", std::move(parts[1])),
                      Dataset(d.name() + "_test", std::move(parts[2]))};
}

}  // namespace detforge::core
