#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "mataformer/embeddings.hpp"
#include "mataformer/errors.hpp"

using namespace mata;

namespace {
double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace

TEST_CASE("embed_synthetic determinism and unit norm") {
  auto a = embed_synthetic("some clinical note", 64, 7);
  auto b = embed_synthetic("some clinical note", 64, 7);
  CHECK(a == b);  // bit-identical
  CHECK(std::fabs(norm(a) - 1.0) < 1e-12);

  auto c = embed_synthetic("some clinical note", 64, 8);
  CHECK(a != c);  // seed matters
  CHECK_THROWS_AS(embed_synthetic("x", 1, 0), DataError);
}

TEST_CASE("embed_synthetic: 1000 distinct texts stay nearly orthogonal at dim 64") {
  const size_t n = 1000;
  std::vector<std::vector<double>> vecs;
  vecs.reserve(n);
  for (size_t i = 0; i < n; ++i)
    vecs.push_back(embed_synthetic("text #" + std::to_string(i), 64, 3));
  // checking all pairs is ~500k dot products of length 64; fine at test time
  double max_abs_cos = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      max_abs_cos = std::max(max_abs_cos, std::fabs(cosine(vecs[i], vecs[j])));
  CHECK(max_abs_cos < 0.6);
}

TEST_CASE("embedding store round trip") {
  EmbeddingStore store(4);
  store.put("k1", {1, 0, 0, 0});
  store.put("k2", {0.5, 0.5, 0.5, 0.5});
  const std::string path = "/tmp/mata_test_emb.bin";
  save_embeddings(path, store);

  EmbeddingLoadReport rep;
  auto loaded = load_precomputed(path, &rep);
  CHECK(rep.rows == 2);
  CHECK(rep.renormalized == 0);
  REQUIRE(loaded.find("k1") != nullptr);
  CHECK((*loaded.find("k1"))[0] == doctest::Approx(1.0));
  CHECK(std::fabs(norm(*loaded.find("k2")) - 1.0) < 1e-9);
  std::remove(path.c_str());
}

TEST_CASE("load_precomputed: empty store") {
  EmbeddingStore store(8);
  const std::string path = "/tmp/mata_test_emb_empty.bin";
  save_embeddings(path, store);
  auto loaded = load_precomputed(path);
  CHECK(loaded.size() == 0);
  CHECK(loaded.dim() == 8);
  std::remove(path.c_str());
}

TEST_CASE("load_precomputed: norm repair below 1e-3, rejection beyond") {
  const std::string path = "/tmp/mata_test_emb_norm.bin";
  {
    // hand-written file with one row of norm ~1.0005
    std::ofstream out(path, std::ios::binary);
    out.write("MATAEMB1", 8);
    auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
    auto u64 = [&](uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); };
    u32(2);
    u64(1);
    u32(1);
    out.write("k", 1);
    float a = 1.0005f, b = 0.0f;
    out.write(reinterpret_cast<char*>(&a), 4);
    out.write(reinterpret_cast<char*>(&b), 4);
  }
  EmbeddingLoadReport rep;
  auto loaded = load_precomputed(path, &rep);
  CHECK(rep.renormalized == 1);
  CHECK(std::fabs(norm(*loaded.find("k")) - 1.0) < 1e-12);
  std::remove(path.c_str());

  {
    std::ofstream out(path, std::ios::binary);
    out.write("MATAEMB1", 8);
    auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
    auto u64 = [&](uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); };
    u32(2);
    u64(1);
    u32(1);
    out.write("k", 1);
    float a = 1.01f, b = 0.0f;  // deviation >= 1e-3
    out.write(reinterpret_cast<char*>(&a), 4);
    out.write(reinterpret_cast<char*>(&b), 4);
  }
  CHECK_THROWS_AS(load_precomputed(path), DataError);
  std::remove(path.c_str());
}

TEST_CASE("load_precomputed: bad magic and truncation") {
  const std::string path = "/tmp/mata_test_emb_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out.write("NOTMAGIC", 8);
  }
  CHECK_THROWS_AS(load_precomputed(path), DataError);
  {
    std::ofstream out(path, std::ios::binary);
    out.write("MATAEMB1", 8);
    uint32_t dim = 4;
    uint64_t count = 3;  // promises rows that are not there
    out.write(reinterpret_cast<char*>(&dim), 4);
    out.write(reinterpret_cast<char*>(&count), 8);
  }
  CHECK_THROWS_AS(load_precomputed(path), DataError);
  std::remove(path.c_str());
}
