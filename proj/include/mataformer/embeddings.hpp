#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mata {

// Deterministic stand-in for an offline text encoder: hash the text into a
// PRNG stream, draw `dim` standard normals, normalize to unit L2 norm.
// Identical (text, dim, seed) gives bit-identical output.
std::vector<double> embed_synthetic(std::string_view text, size_t dim, uint64_t seed);

// Immutable map from event key to unit vector, loaded once and shared.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(uint32_t dim) : dim_(dim) {}

  uint32_t dim() const { return dim_; }
  size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  void put(const std::string& key, std::vector<double> vec);
  const std::vector<double>* find(const std::string& key) const;

 private:
  uint32_t dim_ = 0;
  std::vector<std::string> keys_;  // insertion order, for deterministic save
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct EmbeddingLoadReport {
  size_t rows = 0;
  size_t renormalized = 0;  // rows whose norm deviated by more than 1e-5
};

// Binary layout: magic "MATAEMB1", u32 dim (LE), u64 count (LE), then per row
// u32 key length, key bytes, dim f32 values (LE). Rows with |norm - 1| < 1e-3
// are renormalized on load; larger deviations are rejected.
EmbeddingStore load_precomputed(const std::string& path, EmbeddingLoadReport* report = nullptr);

void save_embeddings(const std::string& path, const EmbeddingStore& store);

}  // namespace mata
