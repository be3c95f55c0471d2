#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace ivsmm {

// PCG32 with one stream per Monte Carlo replication.  The stream selector is
// the replication index, so (master_seed, stream_index) fully determines the
// draw sequence and distinct indices give unrelated sequences.  Instances are
// single-owner; never share one across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_index = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1); safe input for quantile transforms.
  double uniform_open();
  /// Standard normal by inversion.
  double normal();
  bool bernoulli(double p);
  /// Index drawn from the given probabilities (renormalized defensively).
  int categorical(const std::vector<double>& probs);
  /// Correlated standard normal pair via Cholesky of [[1,rho],[rho,1]].
  std::pair<double, double> bivariate_normal(double rho);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
};

}  // namespace ivsmm
