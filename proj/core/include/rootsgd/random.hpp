#pragma once

#include <cstdint>
#include <random>

namespace rootsgd {

/// Seeded random source. Streams are derived from (master_seed, index,
/// domain) through std::seed_seq, so replicate k of an experiment draws the
/// same numbers no matter which worker runs it.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t master_seed, std::uint64_t index = 0,
                        std::uint64_t domain = 0);

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * unit_(engine_);
  }
  /// +1 with probability p, otherwise -1.
  double sign_with_probability(double p) { return unit_(engine_) < p ? 1.0 : -1.0; }

  std::mt19937_64& engine() { return engine_; }

  /// Independent child stream, e.g. one per replicate.
  RandomStream split(std::uint64_t index) const;

 private:
  std::uint64_t master_seed_;
  std::uint64_t index_;
  std::uint64_t domain_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

// Domain tags keep streams used for different purposes apart.
namespace stream_domain {
inline constexpr std::uint64_t replicate = 1;
inline constexpr std::uint64_t construction = 2;
inline constexpr std::uint64_t estimation = 3;
inline constexpr std::uint64_t evaluation = 4;
}  // namespace stream_domain

}  // namespace rootsgd
