#include "autoform/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <unordered_set>

#include "autoform/ioutil.hpp"

namespace autoform {

MockEmbeddingProvider::MockEmbeddingProvider(size_t dim, uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ConfigError("embedding dim must be >= 1");
}

std::string MockEmbeddingProvider::id() const {
  return "mock-embed/dim=" + std::to_string(dim_) + ",seed=" + std::to_string(seed_);
}

std::vector<float> MockEmbeddingProvider::embed_one(const std::string& text) {
  uint64_t h = fnv1a64(text) ^ (seed_ * 0x9e3779b97f4a7c15ull);
  std::mt19937_64 rng(h);
  std::vector<double> raw(dim_);
  for (auto& v : raw) {
    // 53 uniform bits mapped to [-1, 1); no libm in the draw itself.
    double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    v = 2.0 * u - 1.0;
  }
  double norm_sq = 0.0;
  for (double v : raw) norm_sq += v * v;
  if (norm_sq < 1e-18) raw[0] = 1.0, norm_sq = 1.0;
  double norm = std::sqrt(norm_sq);
  std::vector<float> out(dim_);
  for (size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(raw[i] / norm);
  return out;
}

std::vector<std::vector<float>> MockEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

EmbeddingIndex::EmbeddingIndex(size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("index dim must be >= 1");
}

std::span<const float> EmbeddingIndex::row(size_t i) const {
  return {values_.data() + i * dim_, dim_};
}

std::optional<size_t> EmbeddingIndex::find(const std::string& id) const {
  auto it = row_by_id_.find(id);
  if (it == row_by_id_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingIndex::insert(const std::string& id, std::span<const float> values) {
  if (dim_ == 0) throw std::invalid_argument("index not initialized with a dim");
  if (id.empty()) throw std::invalid_argument("vector id must be non-empty");
  if (values.size() != dim_)
    throw std::invalid_argument("vector '" + id + "' has dim " +
                                std::to_string(values.size()) + ", index dim is " +
                                std::to_string(dim_));
  if (row_by_id_.count(id))
    throw std::invalid_argument("duplicate vector id '" + id + "'");
  double norm_sq = 0.0;
  for (float v : values) {
    if (!std::isfinite(v))
      throw std::invalid_argument("vector '" + id + "' has a non-finite component");
    norm_sq += static_cast<double>(v) * static_cast<double>(v);
  }
  if (norm_sq == 0.0)
    throw std::invalid_argument("zero vector rejected for id '" + id + "'");
  double norm = std::sqrt(norm_sq);
  row_by_id_.emplace(id, ids_.size());
  ids_.push_back(id);
  values_.reserve(values_.size() + dim_);
  for (float v : values)
    values_.push_back(static_cast<float>(static_cast<double>(v) / norm));
}

std::vector<Neighbor> EmbeddingIndex::knn(std::span<const float> query, size_t k) const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (size() == 0) throw std::invalid_argument("knn on an empty index");
  if (query.size() != dim_)
    throw std::invalid_argument("query dim " + std::to_string(query.size()) +
                                " does not match index dim " + std::to_string(dim_));
  double norm_sq = 0.0;
  for (float v : query) norm_sq += static_cast<double>(v) * static_cast<double>(v);
  if (norm_sq == 0.0) throw std::invalid_argument("zero query vector");
  double norm = std::sqrt(norm_sq);
  // Same arithmetic as insert: round the normalized query to float32 so query
  // and stored vectors go through identical quantization.
  std::vector<double> q(dim_);
  for (size_t j = 0; j < dim_; ++j)
    q[j] = static_cast<double>(
        static_cast<float>(static_cast<double>(query[j]) / norm));

  std::vector<std::pair<double, size_t>> scored(size());
  for (size_t r = 0; r < size(); ++r) {
    const float* v = values_.data() + r * dim_;
    double s = 0.0;
    for (size_t j = 0; j < dim_; ++j) s += q[j] * static_cast<double>(v[j]);
    scored[r] = {s, r};
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return ids_[a.second] < ids_[b.second];
  });
  size_t take = std::min(k, scored.size());
  std::vector<Neighbor> out;
  out.reserve(take);
  for (size_t i = 0; i < take; ++i)
    out.push_back({ids_[scored[i].second], scored[i].first});
  return out;
}

namespace {

constexpr char kMagic[4] = {'A', 'F', 'I', 'X'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

struct Reader {
  std::string_view data;
  size_t pos = 0;
  size_t remaining() const { return data.size() - pos; }
  bool take(void* dst, size_t n) {
    if (remaining() < n) return false;
    std::memcpy(dst, data.data() + pos, n);
    pos += n;
    return true;
  }
  bool u32(uint32_t& v) {
    unsigned char b[4];
    if (!take(b, 4)) return false;
    v = static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
        static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
    return true;
  }
  bool u64(uint64_t& v) {
    uint32_t lo, hi;
    if (!u32(lo) || !u32(hi)) return false;
    v = static_cast<uint64_t>(lo) | static_cast<uint64_t>(hi) << 32;
    return true;
  }
};

}  // namespace

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  std::string out;
  out.reserve(16 + values_.size() * 4 + ids_.size() * 24);
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(dim_));
  put_u64(out, static_cast<uint64_t>(size()));
  for (size_t r = 0; r < size(); ++r) {
    put_u32(out, static_cast<uint32_t>(ids_[r].size()));
    out += ids_[r];
    for (size_t j = 0; j < dim_; ++j) put_f32(out, values_[r * dim_ + j]);
  }
  put_u64(out, fnv1a64(out));
  write_file_atomic(path, out);
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  std::string data = read_file(path);
  Reader rd{data};
  char magic[4];
  if (!rd.take(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("bad magic in index file " + path.string());
  uint32_t version = 0, dim = 0;
  uint64_t count = 0;
  if (!rd.u32(version) || !rd.u32(dim) || !rd.u64(count))
    throw ParseError("truncated index header in " + path.string());
  if (version != kVersion)
    throw ParseError("unsupported index version " + std::to_string(version) + " in " +
                     path.string());
  if (dim == 0) throw ParseError("index file declares dim 0: " + path.string());

  EmbeddingIndex index(dim);
  index.ids_.reserve(count);
  index.values_.reserve(count * dim);
  for (uint64_t r = 0; r < count; ++r) {
    uint32_t id_len = 0;
    std::string id;
    bool ok = rd.u32(id_len);
    if (ok) {
      id.resize(id_len);
      ok = rd.take(id.data(), id_len);
    }
    std::vector<float> vals(dim);
    if (ok) {
      for (uint32_t j = 0; j < dim && ok; ++j) {
        uint32_t bits = 0;
        ok = rd.u32(bits);
        vals[j] = std::bit_cast<float>(bits);
      }
    }
    if (!ok)
      throw ParseError("truncated index file " + path.string() + ": expected " +
                       std::to_string(count) + " records, found " + std::to_string(r));
    if (!index.row_by_id_.emplace(id, index.ids_.size()).second)
      throw ParseError("duplicate vector id '" + id + "' in " + path.string());
    index.ids_.push_back(std::move(id));
    index.values_.insert(index.values_.end(), vals.begin(), vals.end());
  }
  uint64_t stored = 0;
  if (!rd.u64(stored))
    throw ParseError("truncated index file " + path.string() + ": missing checksum");
  if (rd.remaining() != 0)
    throw ParseError("trailing bytes after checksum in " + path.string());
  uint64_t actual = fnv1a64(std::string_view(data.data(), data.size() - 8));
  if (stored != actual)
    throw ParseError("checksum mismatch in index file " + path.string());
  return index;
}

EmbeddingIndex build_index(const std::vector<FormalStatement>& statements,
                           EmbeddingProvider& provider,
                           const BuildIndexOptions& options) {
  if (statements.empty()) throw ConfigError("cannot build an index from zero statements");
  if (options.batch_size == 0) throw ConfigError("batch size must be >= 1");
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& s : statements) {
      if (s.name.empty()) throw ConfigError("statement with empty name in index input");
      if (!seen.insert(s.name).second)
        throw ConfigError("duplicate statement name '" + s.name + "' in index input");
    }
  }

  size_t n = statements.size();
  size_t batches = (n + options.batch_size - 1) / options.batch_size;
  std::vector<std::vector<std::vector<float>>> results(batches);

  parallel_for(batches, std::max<size_t>(1, options.in_flight), [&](size_t b) {
    size_t begin = b * options.batch_size;
    size_t end = std::min(n, begin + options.batch_size);
    std::vector<std::string> texts;
    texts.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) {
      const auto& s = statements[i];
      texts.push_back(options.include_name ? s.name + "\n" + s.statement_text
                                           : s.statement_text);
    }
    try {
      results[b] = provider.embed(texts);
    } catch (const std::exception& e) {
      throw ProviderError("embedding batch starting at '" + statements[begin].name +
                          "' failed: " + e.what());
    }
    if (results[b].size() != texts.size())
      throw ProviderError("embedding batch starting at '" + statements[begin].name +
                          "' returned " + std::to_string(results[b].size()) +
                          " vectors for " + std::to_string(texts.size()) + " texts");
  });

  size_t dim = results[0].empty() ? 0 : results[0][0].size();
  if (dim == 0) throw ProviderError("embedding provider returned an empty vector");
  EmbeddingIndex index(dim);
  for (size_t b = 0; b < batches; ++b) {
    for (size_t i = 0; i < results[b].size(); ++i) {
      const auto& vec = results[b][i];
      const auto& name = statements[b * options.batch_size + i].name;
      if (vec.size() != dim)
        throw ProviderError("dimension mismatch across batches: vector '" + name +
                            "' has dim " + std::to_string(vec.size()) + ", expected " +
                            std::to_string(dim));
      index.insert(name, vec);
    }
  }
  return index;
}

}  // namespace autoform
