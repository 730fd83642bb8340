#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "xsynth/common.hpp"

namespace xsynth {

using Embedding = std::vector<double>;

/// Text → dense vector. Implementations must be deterministic.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const noexcept = 0;
  virtual Embedding embed(std::string_view text) const = 0;
};

/// Signed feature hashing of lowercase tokens into `dim` buckets, L2-normalized.
/// Bucket is fnv1a64(token) mod dim; the sign is the hash's top bit.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 64;

  explicit HashingEmbedder(std::size_t dim = kDefaultDim) : dim_(dim) {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
  }

  std::size_t dim() const noexcept override { return dim_; }

  Embedding embed(std::string_view text) const override {
    Embedding v(dim_, 0.0);
    for (const auto& tok : tokenize(text)) {
      const std::uint64_t h = fnv1a64(tok);
      v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    return v;
  }

 private:
  std::size_t dim_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Cosine similarity; 0 when either vector is zero.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace xsynth
