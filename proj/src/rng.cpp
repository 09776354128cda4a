#include "kktlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace kktlab {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return static_cast<double>(bits & ((std::uint64_t{1} << 53) - 1)) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Block Philox4x32::operator()(std::uint64_t hi, std::uint64_t lo) const noexcept {
  Block ctr{static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(lo >> 32),
            static_cast<std::uint32_t>(hi), static_cast<std::uint32_t>(hi >> 32)};
  std::uint32_t k0 = key_[0];
  std::uint32_t k1 = key_[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
    k0 += kWeylA;
    k1 += kWeylB;
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return splitmix64(splitmix64(seed) ^ (tag * 0xD1B54A32D192ED03ull));
}

RowStream::RowStream(std::uint64_t seed, Stream stream) noexcept
    : gen_(derive_seed(seed, static_cast<std::uint64_t>(stream))) {}

double RowStream::uniform(std::uint64_t row, std::uint64_t index) const noexcept {
  const auto b = gen_(row, index / 2);
  return index % 2 == 0 ? to_unit(b[0], b[1]) : to_unit(b[2], b[3]);
}

void RowStream::normals(std::uint64_t row, std::span<double> out) const noexcept {
  const std::size_t d = out.size();
  for (std::size_t j = 0, blk = 0; j < d; j += 2, ++blk) {
    const auto b = gen_(row, blk);
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - to_unit(b[0], b[1]);
    const double u2 = to_unit(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    out[j] = r * std::cos(theta);
    if (j + 1 < d) out[j + 1] = r * std::sin(theta);
  }
}

void RowStream::signs(std::uint64_t row, std::span<double> out) const noexcept {
  const std::size_t d = out.size();
  for (std::size_t j = 0, blk = 0; j < d; ++blk) {
    const auto b = gen_(row, blk);
    for (std::uint32_t word : b) {
      for (int bit = 0; bit < 32 && j < d; ++bit, ++j) {
        out[j] = ((word >> bit) & 1u) ? 1.0 : -1.0;
      }
    }
  }
}

void RowStream::uniforms(std::uint64_t row, double lo, double hi,
                         std::span<double> out) const noexcept {
  const std::size_t d = out.size();
  const double width = hi - lo;
  for (std::size_t j = 0, blk = 0; j < d; j += 2, ++blk) {
    const auto b = gen_(row, blk);
    out[j] = lo + width * to_unit(b[0], b[1]);
    if (j + 1 < d) out[j + 1] = lo + width * to_unit(b[2], b[3]);
  }
}

}  // namespace kktlab
