#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "detforge/core/error.hpp"
#include "detforge/core/types.hpp"

namespace detforge::core {

class MissingHeader : public Error {
 public:
  explicit MissingHeader(const std::string& path)
      : Error(path + ": expected header 'payload,label'") {}
};

class BadLabel : public Error {
 public:
  BadLabel(const std::string& path, std::size_t row, const std::string& value)
      : Error(path + ": row " + std::to_string(row) + ": bad label '" + value + "'"),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class UnreadableFile : public Error {
 public:
  UnreadableFile(const std::string& path, const std::string& why)
      : Error(path + ": " + why) {}
};

class EmptyClass : public Error {
 public:
  explicit EmptyClass(Label label)
      : Error(std::string("dataset has no ") + std::string(to_string(label)) + " examples") {}
};

/// RFC 4180 record parser. In lenient mode a stray quote inside an unquoted
/// field is kept literally and an unterminated quoted field runs to the end.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, bool lenient = false);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_field(std::string_view field);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// `payload,label` CSV with labels 1 (malicious) / 0 (benign).
Dataset load_labeled_dataset(const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& d);
void save_labeled_dataset(const Dataset& d, const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.64;
  double val = 0.16;
  double test = 0.20;
};

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Stratified, seeded split. Per class, val and test take floor(n * ratio)
/// examples and train keeps the remainder; each piece preserves input order.
DatasetSplit split_dataset(const Dataset& d, SplitRatios ratios, std::uint64_t seed);

}  // namespace detforge::core
