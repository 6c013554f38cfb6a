#include "rootsgd/random.hpp"

namespace rootsgd {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t master_seed, std::uint64_t index,
                              std::uint64_t domain) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(master_seed), hi(master_seed), lo(index), hi(index),
                    lo(domain),      hi(domain)};
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t index,
                           std::uint64_t domain)
    : master_seed_(master_seed),
      index_(index),
      domain_(domain),
      engine_(seeded_engine(master_seed, index, domain)) {}

RandomStream RandomStream::split(std::uint64_t index) const {
  // Fold the parent coordinates into a fresh master seed.
  std::uint64_t mixed = master_seed_ ^ (index_ * 0x9E3779B97F4A7C15ull) ^
                        (domain_ << 48);
  return RandomStream(mixed, index, domain_ + 1);
}

}  // namespace rootsgd
