#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glode/core.hpp"

namespace glode {

/// Seeded Gaussian random projection with orthonormal rows, used to map
/// embeddings into a lower-dimensional denoising space.
class RandomProjection {
 public:
  RandomProjection(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed)
      : in_dim_(in_dim), out_dim_(out_dim) {
    if (out_dim == 0 || out_dim > in_dim)
      throw Error(ErrorKind::InvalidArgument, "projection needs 0 < out_dim <= in_dim");
    RngStream rng(derive_seed(seed, 0x9120ULL));
    rows_.reserve(out_dim);
    while (rows_.size() < out_dim) {
      Vector v(in_dim);
      for (double& x : v) x = rng.normal();
      // Modified Gram-Schmidt against the rows accepted so far.
      for (const Vector& r : rows_) {
        const double p = dot(v, r);
        for (std::size_t j = 0; j < in_dim; ++j) v[j] -= p * r[j];
      }
      if (l2_norm(v) < 1e-8) continue;
      rows_.push_back(l2_normalize(v));
    }
  }

  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t out_dim() const noexcept { return out_dim_; }
  const std::vector<Vector>& rows() const noexcept { return rows_; }

  Vector apply(std::span<const double> z) const {
    if (z.size() != in_dim_) throw Error(ErrorKind::DimensionMismatch, "projection input dimension");
    Vector out(out_dim_);
    for (std::size_t i = 0; i < out_dim_; ++i) out[i] = dot(rows_[i], z);
    return out;
  }

 private:
  std::size_t in_dim_;
  std::size_t out_dim_;
  std::vector<Vector> rows_;
};

}  // namespace glode
