#pragma once
// Replica-parallel execution and order-fixed reductions.
//
// Every Monte Carlo operation in this library follows the same contract:
// replica r derives its own seed, writes into its own slot, and the slots
// are reduced in index order with compensated summation.  The result is a
// pure function of (root seed, replica count) — the thread count only
// changes the wall clock.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "brw/detail/walker.hpp"

namespace brw::detail {

// Runs fn(r) for r in [0, replicas) across `threads` workers.  Each call
// must write only to its own slot, so the outcome is independent of
// scheduling.
template <class Fn>
void for_replicas(std::uint64_t replicas, unsigned threads, Fn&& fn) {
  if (threads <= 1) {
    for (std::uint64_t r = 0; r < replicas; ++r) fn(r);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t r = next.fetch_add(1);
      if (r >= replicas) return;
      fn(r);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Mean and sample standard error of the mean over slots, accumulated in
// index order with compensated sums (order-fixed => thread-count invariant).
struct MeanSe {
  double mean = 0.0, se = 0.0;
  std::uint64_t count = 0;
};

inline MeanSe reduce_mean_se(const std::vector<double>& slots,
                             bool skip_nan = false) {
  CompensatedSum s1, s2;
  std::uint64_t cnt = 0;
  for (double v : slots) {
    if (skip_nan && std::isnan(v)) continue;
    s1.add(v);
    s2.add(v * v);
    ++cnt;
  }
  MeanSe out;
  out.count = cnt;
  if (cnt == 0) return out;
  out.mean = s1.sum / double(cnt);
  const double var = s2.sum / double(cnt) - out.mean * out.mean;
  out.se = var > 0.0 ? std::sqrt(var / double(cnt)) : 0.0;
  return out;
}

}  // namespace brw::detail
