#include "detforge/rag/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "detforge/core/dataset_io.hpp"
#include "json.hpp"

namespace detforge::rag {

namespace {

/// Byte offsets of each code point start, plus a final entry at text.size().
std::vector<std::size_t> code_point_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) offsets.push_back(i);
  }
  offsets.push_back(text.size());
  return offsets;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<KnowledgeChunk> chunk_source(std::string_view text, std::size_t size,
                                         std::size_t overlap, std::string source_path) {
  if (size == 0 || overlap >= size) {
    throw InvalidArgument("chunk_source: need size > overlap >= 0 (size " + std::to_string(size) +
                          ", overlap " + std::to_string(overlap) + ")");
  }
  if (text.empty()) throw EmptyDocument(source_path);

  const auto offsets = code_point_offsets(text);
  const std::size_t length = offsets.size() - 1;
  const std::size_t step = size - overlap;

  std::vector<KnowledgeChunk> chunks;
  for (std::size_t start = 0;; start += step) {
    const std::size_t end = std::min(start + size, length);
    chunks.push_back(KnowledgeChunk{
        .chunk_id = static_cast<int>(chunks.size()),
        .text = std::string(text.substr(offsets[start], offsets[end] - offsets[start])),
        .source_path = source_path,
        .begin = start,
        .end = end,
    });
    if (end == length) break;
  }
  return chunks;
}

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
  const double n = std::sqrt(std::inner_product(raw.begin(), raw.end(), raw.begin(), 0.0));
  if (n > 0) {
    for (auto& x : raw) x /= n;
  }
  EmbeddingVector v;
  v.values_ = std::move(raw);
  return v;
}

double EmbeddingVector::dot(const EmbeddingVector& other) const {
  if (other.values_.size() != values_.size()) {
    throw InvalidArgument("embedding dimension mismatch");
  }
  return std::inner_product(values_.begin(), values_.end(), other.values_.begin(), 0.0);
}

double EmbeddingVector::norm() const { return std::sqrt(dot(*this)); }

HashEmbedder::HashEmbedder(std::size_t dimension, int max_ngram)
    : dimension_(dimension), max_ngram_(max_ngram) {
  if (dimension_ == 0 || max_ngram_ < 1) throw InvalidArgument("HashEmbedder: bad parameters");
}

std::string HashEmbedder::id() const {
  return "hash-ngram-v1:d=" + std::to_string(dimension_) + ":n=" + std::to_string(max_ngram_);
}

std::vector<std::string> HashEmbedder::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
  auto tokens = tokenize(text);
  if (tokens.empty()) {
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) throw InvalidArgument("embed: empty text");
    auto last = text.find_last_not_of(" \t\r\n");
    tokens.emplace_back(text.substr(first, last - first + 1));
  }
  std::vector<double> counts(dimension_, 0.0);
  for (int n = 1; n <= max_ngram_; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram = std::to_string(n) + ":";
      for (int j = 0; j < n; ++j) {
        if (j) gram += ' ';
        gram += tokens[i + j];
      }
      counts[fnv1a(gram) % dimension_] += 1.0;
    }
  }
  return EmbeddingVector::normalized(std::move(counts));
}

VectorIndex VectorIndex::build(std::vector<KnowledgeChunk> chunks, const Embedder& embedder) {
  if (chunks.empty()) throw InvalidArgument("VectorIndex::build: no chunks");
  VectorIndex index;
  index.embedder_id_ = embedder.id();
  index.dimension_ = embedder.dimension();
  index.entries_.reserve(chunks.size());
  for (auto& c : chunks) {
    auto v = embedder.embed(c.text);
    index.entries_.push_back(IndexEntry{std::move(c), std::move(v)});
  }
  return index;
}

VectorIndex VectorIndex::build_from_file(const std::filesystem::path& path,
                                         const Embedder& embedder, std::size_t chunk_size,
                                         std::size_t overlap) {
  const std::string text = core::read_file(path);
  auto index = build(chunk_source(text, chunk_size, overlap, path.string()), embedder);
  index.chunk_size_ = chunk_size;
  index.chunk_overlap_ = overlap;
  return index;
}

std::vector<KnowledgeChunk> VectorIndex::retrieve(const Embedder& embedder,
                                                  std::string_view query,
                                                  std::size_t k) const {
  if (k < 1) throw InvalidArgument("retrieve: k must be at least 1");
  if (embedder.id() != embedder_id_) throw EmbedderMismatch(embedder_id_, embedder.id());
  const auto q = embedder.embed(query);

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    scored.emplace_back(entries_[i].vector.dot(q), i);
  }
  auto before = [this](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return entries_[a.second].chunk.chunk_id < entries_[b.second].chunk.chunk_id;
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), before);

  std::vector<KnowledgeChunk> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(entries_[scored[i].second].chunk);
  return out;
}

std::string VectorIndex::to_json() const {
  nlohmann::json j;
  j["embedder_id"] = embedder_id_;
  j["dimension"] = dimension_;
  j["chunk_size"] = chunk_size_;
  j["chunk_overlap"] = chunk_overlap_;
  auto& chunks = j["chunks"] = nlohmann::json::array();
  for (const auto& e : entries_) {
    chunks.push_back({{"chunk_id", e.chunk.chunk_id},
                      {"source_path", e.chunk.source_path},
                      {"begin", e.chunk.begin},
                      {"end", e.chunk.end},
                      {"text", e.chunk.text},
                      {"vector", e.vector.values()}});
  }
  return j.dump(1) + "\n";
}

VectorIndex VectorIndex::from_json(std::string_view text) {
  VectorIndex index;
  try {
    auto j = nlohmann::json::parse(text);
    j.at("embedder_id").get_to(index.embedder_id_);
    j.at("dimension").get_to(index.dimension_);
    index.chunk_size_ = j.value("chunk_size", std::size_t{0});
    index.chunk_overlap_ = j.value("chunk_overlap", std::size_t{0});
    for (const auto& c : j.at("chunks")) {
      KnowledgeChunk chunk{
          .chunk_id = c.at("chunk_id").get<int>(),
          .text = c.at("text").get<std::string>(),
          .source_path = c.at("source_path").get<std::string>(),
          .begin = c.at("begin").get<std::size_t>(),
          .end = c.at("end").get<std::size_t>(),
      };
      auto values = c.at("vector").get<std::vector<double>>();
      if (values.size() != index.dimension_) {
        throw InvalidArgument("index chunk " + std::to_string(chunk.chunk_id) +
                              ": vector dimension mismatch");
      }
      index.entries_.push_back(
          IndexEntry{std::move(chunk), EmbeddingVector::from_unit(std::move(values))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed index: ") + e.what());
  }
  if (index.entries_.empty()) throw InvalidArgument("index has no entries");
  return index;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  core::write_file_atomic(path, to_json());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifact(path.string());
  return from_json(core::read_file(path));
}

}  // namespace detforge::rag
