#include "ivsmm/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "ivsmm/numerics.hpp"

namespace ivsmm {

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed), stream_index_(stream_index) {
  inc_ = (stream_index << 1u) | 1u;
  state_ = 0u;
  next_u32();
  state_ += master_seed;
  next_u32();
}

std::uint32_t RngStream::next_u32() {
  const std::uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + inc_;
  const std::uint32_t xorshifted =
      static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_quantile(uniform_open()); }

bool RngStream::bernoulli(double p) { return uniform() < p; }

int RngStream::categorical(const std::vector<double>& probs) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::domain_error("categorical: negative weight");
    total += p;
  }
  if (total <= 0.0) throw std::domain_error("categorical: zero total weight");
  double u = uniform() * total;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    u -= probs[k];
    if (u < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

std::pair<double, double> RngStream::bivariate_normal(double rho) {
  const double u = normal();
  const double v = normal();
  return {u, rho * u + std::sqrt(1.0 - rho * rho) * v};
}

}  // namespace ivsmm
