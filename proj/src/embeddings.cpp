#include "mataformer/embeddings.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mataformer/errors.hpp"
#include "mataformer/rng.hpp"

namespace mata {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'T', 'A', 'E', 'M', 'B', '1'};

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<char*>(b), 8);
}

void write_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

bool read_u32(std::istream& is, uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = b[0] | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
  return true;
}

bool read_u64(std::istream& is, uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

bool read_f32(std::istream& is, float& v) {
  uint32_t u;
  if (!read_u32(is, u)) return false;
  std::memcpy(&v, &u, 4);
  return true;
}

}  // namespace

std::vector<double> embed_synthetic(std::string_view text, size_t dim, uint64_t seed) {
  if (dim < 2) throw DataError("embed_synthetic: dim must be >= 2");
  Rng rng(fnv1a64(text) ^ (seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
  std::vector<double> v(dim);
  double norm2 = 0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

void EmbeddingStore::put(const std::string& key, std::vector<double> vec) {
  if (dim_ == 0) dim_ = static_cast<uint32_t>(vec.size());
  if (vec.size() != dim_)
    throw DataError("embedding for key '" + key + "' has dim " + std::to_string(vec.size()) +
                    ", store dim is " + std::to_string(dim_));
  auto it = vectors_.find(key);
  if (it == vectors_.end()) {
    keys_.push_back(key);
    vectors_.emplace(key, std::move(vec));
  } else {
    it->second = std::move(vec);
  }
}

const std::vector<double>* EmbeddingStore::find(const std::string& key) const {
  auto it = vectors_.find(key);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingStore load_precomputed(const std::string& path, EmbeddingLoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError(path + ": bad magic, not a MATAEMB1 file");
  uint32_t dim;
  uint64_t count;
  if (!read_u32(in, dim) || !read_u64(in, count)) throw DataError(path + ": truncated header");
  if (dim < 2) throw DataError(path + ": dim must be >= 2");

  EmbeddingStore store(dim);
  EmbeddingLoadReport rep;
  for (uint64_t r = 0; r < count; ++r) {
    uint32_t key_len;
    if (!read_u32(in, key_len)) throw DataError(path + ": truncated at row " + std::to_string(r));
    std::string key(key_len, '\0');
    if (key_len && !in.read(key.data(), key_len))
      throw DataError(path + ": truncated key at row " + std::to_string(r));
    std::vector<double> vec(dim);
    double norm2 = 0;
    for (uint32_t i = 0; i < dim; ++i) {
      float f;
      if (!read_f32(in, f)) throw DataError(path + ": truncated values at row " + std::to_string(r));
      vec[i] = f;
      norm2 += vec[i] * vec[i];
    }
    double norm = std::sqrt(norm2);
    double dev = std::fabs(norm - 1.0);
    if (dev >= 1e-3)
      throw DataError(path + ": row '" + key + "' has norm " + std::to_string(norm) +
                      ", deviation >= 1e-3");
    if (norm > 0) {
      for (auto& x : vec) x /= norm;
      if (dev > 1e-5) ++rep.renormalized;
    }
    store.put(key, std::move(vec));
    ++rep.rows;
  }
  if (report) *report = rep;
  return store;
}

void save_embeddings(const std::string& path, const EmbeddingStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out.write(kMagic, 8);
  write_u32(out, store.dim());
  write_u64(out, store.size());
  for (const auto& key : store.keys()) {
    const auto* vec = store.find(key);
    write_u32(out, static_cast<uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    for (double v : *vec) write_f32(out, static_cast<float>(v));
  }
}

}  // namespace mata
