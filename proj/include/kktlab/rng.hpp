#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace kktlab {

/// Philox4x32-10 (Salmon et al., SC'11). A pure function of (key, counter):
/// there is no hidden state, so any block of the stream can be produced in
/// any order.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Block operator()(std::uint64_t hi, std::uint64_t lo) const noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Substream tags. Each tag gets its own Philox key, so e.g. changing the flip
/// probability never perturbs the covariates drawn for the same seed.
enum class Stream : std::uint64_t {
  kCovariates = 1,
  kClusters = 2,
  kCleanLabels = 3,
  kFlips = 4,
  kInit = 5,
  kProbes = 6,
  kTestDraws = 7,
  kInstances = 8,
};

/// Derives a child seed; used to separate e.g. training draws from test draws
/// of the same experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

/// Counter-based stream addressed by (row, index). Row r of a dataset always
/// consumes counters (r, 0), (r, 1), ..., independent of n or of which other
/// rows are generated.
class RowStream {
 public:
  RowStream(std::uint64_t seed, Stream stream) noexcept;

  /// Uniform in [0, 1) with 53 random bits; two per counter block.
  double uniform(std::uint64_t row, std::uint64_t index) const noexcept;

  /// Fills `out` with i.i.d. standard normals (Box-Muller on uniform pairs).
  void normals(std::uint64_t row, std::span<double> out) const noexcept;

  /// Fills `out` with i.i.d. Rademacher signs.
  void signs(std::uint64_t row, std::span<double> out) const noexcept;

  /// Fills `out` with i.i.d. uniform values in [lo, hi).
  void uniforms(std::uint64_t row, double lo, double hi, std::span<double> out) const noexcept;

  Philox4x32::Block block(std::uint64_t row, std::uint64_t index) const noexcept {
    return gen_(row, index);
  }

 private:
  Philox4x32 gen_;
};

}  // namespace kktlab
