#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include <omp.h>

namespace ground::parallel {

/// Work is cut into this many blocks regardless of the thread count, and the
/// block partials are summed in block order, so results are bit-identical for
/// any OMP_NUM_THREADS.
inline constexpr std::size_t kReductionBlocks = 16;

/// Runs body(begin, end, partial) over a fixed block partition of [0, n),
/// each block accumulating into its own zeroed buffer of `width` doubles, and
/// returns the in-order sum of the block buffers.
template <class Body>
std::vector<double> block_reduce(std::size_t n, std::size_t width, Body&& body) {
  const std::size_t blocks = std::max<std::size_t>(1, std::min(n, kReductionBlocks));
  std::vector<std::vector<double>> partials(blocks, std::vector<double>(width, 0.0));

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = n * static_cast<std::size_t>(b) / blocks;
    const std::size_t hi = n * (static_cast<std::size_t>(b) + 1) / blocks;
    body(lo, hi, std::span<double>(partials[static_cast<std::size_t>(b)]));
  }

  std::vector<double> total(width, 0.0);
  for (const auto& p : partials) {
    for (std::size_t i = 0; i < width; ++i) total[i] += p[i];
  }
  return total;
}

/// Element-wise parallel map with no reduction; order of writes is irrelevant.
template <class Body>
void for_each_index(std::size_t n, Body&& body) {
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) body(static_cast<std::size_t>(i));
}

}  // namespace ground::parallel
