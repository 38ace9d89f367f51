#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "swapmix/error.hpp"
#include "swapmix/random.hpp"

namespace swapmix {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline bool parse_float(std::string_view s, float& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

}  // namespace detail

/// Cosine similarity computed in double precision. Zero-norm inputs are
/// rejected because similarity is undefined for them.
inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::DimensionMismatch, "cosine over vectors of different dimension");
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  const double na = detail::norm(a), nb = detail::norm(b);
  if (na == 0 || nb == 0)
    throw Error(ErrorKind::InvalidArgument, "cosine of a zero-norm vector");
  return dot / (na * nb);
}

/// Word-embedding table (GloVe text format).
///
/// lookup() resolves a token in three steps: exact entry; for multi-word
/// phrases the mean of the per-word lookups; otherwise, when fallback is
/// enabled, a unit vector seeded by the token's hash.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dim_(dimension) {}

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<float>>& entries() const { return entries_; }
  bool contains(std::string_view token) const { return entries_.contains(std::string(token)); }

  void insert(std::string token, std::vector<float> vec) {
    if (dim_ == 0) dim_ = vec.size();
    if (vec.size() != dim_)
      throw Error(ErrorKind::DimensionMismatch,
                  "token '" + token + "' has " + std::to_string(vec.size()) +
                      " values, expected " + std::to_string(dim_));
    for (float v : vec)
      if (!std::isfinite(v))
        throw Error(ErrorKind::MalformedInput, "non-finite value for token '" + token + "'");
    if (detail::norm(vec) == 0)
      throw Error(ErrorKind::MalformedInput, "zero-norm vector for token '" + token + "'");
    entries_[std::move(token)] = std::move(vec);
  }

  std::vector<float> lookup(std::string_view token, bool allow_fallback = true) const {
    if (auto it = entries_.find(std::string(token)); it != entries_.end()) return it->second;
    const auto words = detail::split_ws(token);
    if (words.size() > 1) {
      std::vector<double> acc(dim_, 0.0);
      for (auto w : words) {
        const auto v = lookup(w, allow_fallback);
        for (std::size_t i = 0; i < dim_; ++i) acc[i] += v[i];
      }
      std::vector<float> out(dim_);
      for (std::size_t i = 0; i < dim_; ++i)
        out[i] = static_cast<float>(acc[i] / static_cast<double>(words.size()));
      return out;
    }
    if (!allow_fallback)
      throw Error(ErrorKind::UnknownLabel, "no embedding for '" + std::string(token) + "'");
    return fallback_vector(token);
  }

  /// Deterministic unit vector for out-of-vocabulary tokens.
  std::vector<float> fallback_vector(std::string_view token) const {
    Rng rng(derive_seed(0, {"oov", token}));
    std::vector<double> v(dim_);
    double n = 0;
    do {
      n = 0;
      for (auto& x : v) {
        x = rng.uniform() * 2.0 - 1.0;
        n += x * x;
      }
    } while (n == 0);
    n = std::sqrt(n);
    std::vector<float> out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(v[i] / n);
    return out;
  }

  double similarity(std::string_view a, std::string_view b, bool allow_fallback = true) const {
    return cosine(lookup(a, allow_fallback), lookup(b, allow_fallback));
  }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<float>> entries_;
};

/// Parses `token v1 ... ve` lines. The first line fixes e. A line with more
/// leading non-numeric fields than one carries a multi-word token.
inline EmbeddingTable parse_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() < 2) throw Error(ErrorKind::MalformedInput, where + ": token without values");
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() < dim + 1)
      throw Error(ErrorKind::DimensionMismatch,
                  where + ": " + std::to_string(fields.size() - 1) + " values, expected " +
                      std::to_string(dim));
    const std::size_t token_fields = fields.size() - dim;
    std::string token;
    float probe;
    for (std::size_t i = 0; i < token_fields; ++i) {
      if (i > 0) {
        if (detail::parse_float(fields[i], probe))
          throw Error(ErrorKind::DimensionMismatch,
                      where + ": " + std::to_string(fields.size() - 1) +
                          " values, expected " + std::to_string(dim));
        token += ' ';
      }
      token.append(fields[i]);
    }
    std::vector<float> vec(dim);
    for (std::size_t i = 0; i < dim; ++i)
      if (!detail::parse_float(fields[token_fields + i], vec[i]))
        throw Error(ErrorKind::MalformedInput,
                    where + ": bad number '" + std::string(fields[token_fields + i]) + "'");
    table.insert(std::move(token), std::move(vec));
  }
  if (table.size() == 0) throw Error(ErrorKind::MalformedInput, "embedding table is empty");
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open embeddings file " + path);
  return parse_embeddings(in);
}

/// Writes the table in the text format; floats use shortest round-trip form.
inline std::string serialize_embeddings(const EmbeddingTable& table) {
  std::string out;
  char buf[64];
  for (const auto& [token, vec] : table.entries()) {
    out += token;
    for (float v : vec) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out += ' ';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

}  // namespace swapmix
