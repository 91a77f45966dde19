#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace csbp {

/// Philox4x32-10 counter-based generator.
///
/// The 128-bit counter is split into a 64-bit block index (low words) and a
/// 64-bit stream identifier (high words); the 64-bit key is the run seed.
/// Two engines with the same (seed, stream) produce the same sequence no
/// matter which thread owns them, which is what makes path-parallel Monte
/// Carlo reproducible.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Skip `n` 64-bit outputs.
  void discard(std::uint64_t n);

  /// The raw bijection; exposed for known-answer tests.
  static Counter block(Counter ctr, Key key);

 private:
  void refill();

  Key key_{};
  Counter ctr_{};
  Counter buf_{};
  int next_ = 4;
};

/// Combine a run seed, an experiment tag and a path index into a stream id.
std::uint64_t substream_id(std::uint32_t tag, std::uint64_t path_index);

/// Random source handed to samplers. Owns the engine and the std::
/// distribution objects whose internal state must travel with it.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(seed, stream) {}

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential(double rate);
  /// Poisson with the given mean (0 for mean <= 0).
  std::int64_t poisson(double mean);
  /// Gamma with shape k and rate.
  double gamma(double shape, double rate);

  Philox4x32& engine() { return engine_; }

 private:
  Philox4x32 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace csbp
