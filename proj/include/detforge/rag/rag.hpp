#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detforge/core/error.hpp"

namespace detforge::rag {

class EmptyDocument : public Error {
 public:
  explicit EmptyDocument(const std::string& source) : Error("empty knowledge document: " + source) {}
};

class EmbedderMismatch : public Error {
 public:
  EmbedderMismatch(const std::string& index_id, const std::string& query_id)
      : Error("index built with embedder '" + index_id + "' queried with '" + query_id + "'") {}
};

/// A window of the knowledge document. `begin`/`end` count Unicode code
/// points of the source, half-open.
struct KnowledgeChunk {
  int chunk_id = 0;
  std::string text;
  std::string source_path;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const KnowledgeChunk&, const KnowledgeChunk&) = default;
};

inline constexpr std::size_t kDefaultChunkSize = 1000;
inline constexpr std::size_t kDefaultChunkOverlap = 200;
inline constexpr std::size_t kDefaultRetrievalK = 4;

/// Windows of `size` code points stepping by `size - overlap`; the last
/// window ends at the end of the text.
std::vector<KnowledgeChunk> chunk_source(std::string_view text, std::size_t size,
                                         std::size_t overlap, std::string source_path = {});

/// Unit-norm embedding.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  /// Normalizes `raw` to unit L2 norm; a zero vector stays zero.
  static EmbeddingVector normalized(std::vector<double> raw);
  /// Wraps already-normalized values (used when loading a persisted index).
  static EmbeddingVector from_unit(std::vector<double> values) {
    EmbeddingVector v;
    v.values_ = std::move(values);
    return v;
  }

  std::size_t dimension() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double dot(const EmbeddingVector& other) const;
  double norm() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  /// Throws InvalidArgument on empty text.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Offline embedder: lower-cased alphanumeric tokens and their n-grams up to
/// `max_ngram`, hashed (FNV-1a 64) into `dimension` buckets, counts normalized.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 4096, int max_ngram = 2);

  std::string id() const override;
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

  /// Tokens as the embedder sees them (exposed for fixtures).
  static std::vector<std::string> tokenize(std::string_view text);

 private:
  std::size_t dimension_;
  int max_ngram_;
};

struct IndexEntry {
  KnowledgeChunk chunk;
  EmbeddingVector vector;
};

/// Exhaustive in-memory cosine index. Immutable after build.
class VectorIndex {
 public:
  static VectorIndex build(std::vector<KnowledgeChunk> chunks, const Embedder& embedder);

  /// Chunks the document at `path` and builds the index over it.
  static VectorIndex build_from_file(const std::filesystem::path& path, const Embedder& embedder,
                                     std::size_t chunk_size = kDefaultChunkSize,
                                     std::size_t overlap = kDefaultChunkOverlap);

  const std::string& embedder_id() const { return embedder_id_; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::size_t chunk_size() const { return chunk_size_; }
  std::size_t chunk_overlap() const { return chunk_overlap_; }

  /// Top `k` chunks by cosine similarity, descending, ties by chunk id.
  std::vector<KnowledgeChunk> retrieve(const Embedder& embedder, std::string_view query,
                                       std::size_t k) const;

  std::string to_json() const;
  static VectorIndex from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

 private:
  std::string embedder_id_;
  std::size_t dimension_ = 0;
  std::size_t chunk_size_ = 0;
  std::size_t chunk_overlap_ = 0;
  std::vector<IndexEntry> entries_;
};

}  // namespace detforge::rag
