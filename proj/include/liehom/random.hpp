#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace liehom {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Satisfies UniformRandomBitGenerator. Streams with distinct keys are
/// independent, which is what makes per-trajectory substreams reproducible
/// regardless of how work is scheduled across threads.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  explicit Philox4x32(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        counter_{static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32), 0, 0} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (index_ == 4) {
      block_ = generate(counter_, key_);
      increment();
      index_ = 0;
    }
    return block_[index_++];
  }

  static std::array<std::uint32_t, 4> generate(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept;

 private:
  void increment() noexcept {
    for (auto& word : counter_) {
      if (++word != 0) break;
    }
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int index_ = 4;
};

/// Purposes keep substreams for different consumers of one trajectory disjoint.
enum class StreamPurpose : std::uint32_t {
  driving = 1,
  fast = 2,
  haar = 3,
  effective = 4,
  initial = 5,
  test = 6,
};

/// Key for the substream identified by (root seed, index, driver, purpose).
std::uint64_t substream_key(std::uint64_t root, std::uint64_t index, std::uint64_t driver,
                            StreamPurpose purpose) noexcept;

/// Random source passed explicitly to every stochastic routine.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : engine_(key) {}
  RandomStream(std::uint64_t root, std::uint64_t index, std::uint64_t driver, StreamPurpose purpose)
      : engine_(substream_key(root, index, driver, purpose)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  Philox4x32& engine() { return engine_; }

 private:
  Philox4x32 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace liehom
