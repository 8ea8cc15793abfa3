#pragma once

#include "liehom/lie/group.hpp"
#include "liehom/parallel.hpp"
#include "liehom/random.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace liehom {

struct McOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  int threads = 0;
};

/// Running mean / second central moment per coordinate.
struct Accumulator {
  std::size_t count = 0;
  Vector mean;
  Vector m2;

  explicit Accumulator(Eigen::Index dim = 0) : mean(Vector::Zero(dim)), m2(Vector::Zero(dim)) {}

  void add(const Vector& x) {
    ++count;
    const Vector delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(x - mean);
  }

  void merge(const Accumulator& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double n_a = static_cast<double>(count);
    const double n_b = static_cast<double>(other.count);
    const double n = n_a + n_b;
    const Vector delta = other.mean - mean;
    mean += delta * (n_b / n);
    m2 += other.m2 + delta.cwiseProduct(delta) * (n_a * n_b / n);
    count += other.count;
  }

  Vector variance() const {
    if (count < 2) return Vector::Zero(mean.size());
    return m2 / static_cast<double>(count - 1);
  }
  Vector standard_error() const {
    if (count < 2) return Vector::Zero(mean.size());
    return (variance() / static_cast<double>(count)).cwiseSqrt();
  }
};

struct SampleMoments {
  Vector mean;
  Vector se;
  std::size_t count = 0;
};

inline constexpr std::size_t kMcBlockSize = 4096;

/// Haar average of a vector-valued function of H.
///
/// Samples are drawn in fixed blocks, block b from substream (seed, b); block
/// summaries are merged in block order, so the result is identical for any
/// thread count.
template <typename Fn>
SampleMoments haar_average(const GroupSpec& spec, Eigen::Index out_dim, const McOptions& options,
                           Fn&& fn) {
  const std::size_t n = options.samples;
  const std::size_t blocks = (n + kMcBlockSize - 1) / kMcBlockSize;
  std::vector<Accumulator> partial(blocks, Accumulator(out_dim));
  parallel_for(blocks, options.threads, [&](std::size_t b) {
    RandomStream rng(options.seed, b, 0, StreamPurpose::haar);
    const std::size_t begin = b * kMcBlockSize;
    const std::size_t end = std::min(n, begin + kMcBlockSize);
    Vector value(out_dim);
    for (std::size_t s = begin; s < end; ++s) {
      const GroupElement h = haar_sample(spec, rng);
      fn(h, value);
      partial[b].add(value);
    }
  });
  Accumulator total(out_dim);
  for (const auto& p : partial) total.merge(p);
  return SampleMoments{total.mean, total.standard_error(), total.count};
}

}  // namespace liehom
