#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "autoform/corpus.hpp"

namespace autoform {

// Batched text-embedding source. Implementations must be deterministic for
// identical input within one session and return one vector per input text.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
  // 0 = unknown until the first call (remote providers).
  virtual size_t dim() const = 0;
  virtual std::string id() const = 0;
  virtual bool deterministic() const { return false; }
};

// Offline provider: per-text seeded pseudo-random unit vector, seed derived
// from a stable hash of the text bytes. Identical text gives an identical
// vector; distinct texts collide only if the hash does.
class MockEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(size_t dim = 64, uint64_t seed = 0);
  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
  size_t dim() const override { return dim_; }
  std::string id() const override;
  bool deterministic() const override { return true; }

  std::vector<float> embed_one(const std::string& text);

 private:
  size_t dim_;
  uint64_t seed_;
};

struct Neighbor {
  std::string id;
  double score;  // cosine similarity in [-1, 1]

  bool operator==(const Neighbor&) const = default;
};

// Exact cosine kNN over unit-normalized float32 vectors.
//
// Arithmetic contract (load-bearing for reproducibility): vectors are
// normalized at insert by dividing each component, promoted to double, by the
// double-accumulated L2 norm, then stored as float32. Queries are normalized
// the same way; a score is the dot product of the normalized query with a
// stored row, accumulated in double in index order. Results are sorted by
// descending score with ties broken by ascending id.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  explicit EmbeddingIndex(size_t dim);

  size_t dim() const { return dim_; }
  size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(size_t i) const;
  std::optional<size_t> find(const std::string& id) const;

  // Normalizes and stores. Rejects zero / non-finite vectors, dimension
  // mismatches and duplicate ids.
  void insert(const std::string& id, std::span<const float> values);

  std::vector<Neighbor> knn(std::span<const float> query, size_t k) const;

  // Binary format, bit-exact: magic "AFIX", u32 version, u32 dim, u64 count,
  // then per record a u32 length-prefixed id and dim little-endian float32
  // values, then a trailing FNV-1a 64 checksum of all preceding bytes.
  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

 private:
  size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> values_;  // row-major, size() * dim_
  std::unordered_map<std::string, size_t> row_by_id_;
};

struct BuildIndexOptions {
  size_t batch_size = 64;
  size_t in_flight = 1;         // concurrent embedding batches
  bool include_name = false;    // embed "name\nstatement" instead of statement only
};

EmbeddingIndex build_index(const std::vector<FormalStatement>& statements,
                           EmbeddingProvider& provider,
                           const BuildIndexOptions& options = {});

}  // namespace autoform
