#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "retag/errors.hpp"
#include "retag/telemetry.hpp"
#include "retag/types.hpp"

namespace retag {

inline bool all_finite(const EmbeddingVector& a) {
  for (float v : a.values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Accumulates in double regardless of the float storage width.
inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    fail(Errc::DimensionMismatch, "dot: dimensions differ (" + std::to_string(a.dim()) +
                                      " vs " + std::to_string(b.dim()) + ")");
  telemetry::count_dot_product();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    acc += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  return acc;
}

inline double l2_norm(const EmbeddingVector& a) {
  double acc = 0.0;
  for (float v : a.values) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

// (a.b) / (|a||b|), clamped to [-1, 1] so floating-point drift can never
// leak outside the declared score range.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    fail(Errc::DimensionMismatch,
         "cosine_similarity: dimensions differ (" + std::to_string(a.dim()) + " vs " +
             std::to_string(b.dim()) + ")");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) fail(Errc::ZeroVector, "cosine_similarity: zero-norm vector");
  telemetry::count_dot_product();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    acc += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  return std::clamp(acc / (na * nb), -1.0, 1.0);
}

inline EmbeddingVector l2_normalize(const EmbeddingVector& a) {
  const double n = l2_norm(a);
  if (n == 0.0) fail(Errc::ZeroVector, "l2_normalize: zero-norm vector has no direction");
  telemetry::count_normalization();
  EmbeddingVector out;
  out.values.resize(a.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i)
    out.values[i] = static_cast<float>(static_cast<double>(a.values[i]) / n);
  return out;
}

inline void validate_vector(const EmbeddingVector& a, std::size_t expected_dim) {
  if (a.dim() != expected_dim)
    fail(Errc::DimensionMismatch, "expected dimension " + std::to_string(expected_dim) +
                                      ", got " + std::to_string(a.dim()));
  if (!all_finite(a)) fail(Errc::NonFiniteEntry, "vector contains NaN or infinity");
  if (l2_norm(a) == 0.0) fail(Errc::ZeroVector, "vector has zero norm");
}

inline bool is_unit_norm(const EmbeddingVector& a, double tolerance = 1e-6) {
  return std::abs(l2_norm(a) - 1.0) <= tolerance;
}

}  // namespace retag
