#pragma once

#include <atomic>
#include <cstdint>

namespace retag::telemetry {

// Process-wide operation counters. They exist so tests can assert cost
// contracts (e.g. adding one label normalizes exactly one vector and
// computes zero similarities). Relaxed ordering: counts only need to be
// consistent once worker threads are joined.
struct Counters {
  std::atomic<std::uint64_t> normalizations{0};
  std::atomic<std::uint64_t> dot_products{0};
};

inline Counters& counters() {
  static Counters c;
  return c;
}

inline void count_normalization() {
  counters().normalizations.fetch_add(1, std::memory_order_relaxed);
}

inline void count_dot_product() {
  counters().dot_products.fetch_add(1, std::memory_order_relaxed);
}

struct Snapshot {
  std::uint64_t normalizations;
  std::uint64_t dot_products;
};

inline Snapshot snapshot() {
  return {counters().normalizations.load(std::memory_order_relaxed),
          counters().dot_products.load(std::memory_order_relaxed)};
}

}  // namespace retag::telemetry
