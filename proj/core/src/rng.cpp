#include "csbp/rng.hpp"

#include <cmath>

namespace csbp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream) {
  key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  ctr_ = {0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

void Philox4x32::refill() {
  buf_ = block(ctr_, key_);
  if (++ctr_[0] == 0) ++ctr_[1];
  next_ = 0;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (next_ >= 4) refill();
  const std::uint64_t lo = buf_[next_];
  const std::uint64_t hi = buf_[next_ + 1];
  next_ += 2;
  return (hi << 32) | lo;
}

void Philox4x32::discard(std::uint64_t n) {
  while (n > 0 && next_ < 4) {
    next_ += 2;
    --n;
  }
  // Two outputs per block.
  const std::uint64_t blocks = n / 2;
  const std::uint64_t low = (static_cast<std::uint64_t>(ctr_[1]) << 32 | ctr_[0]) + blocks;
  ctr_[0] = static_cast<std::uint32_t>(low);
  ctr_[1] = static_cast<std::uint32_t>(low >> 32);
  if (n % 2 == 1) {
    refill();
    next_ = 2;
  }
}

std::uint64_t substream_id(std::uint32_t tag, std::uint64_t path_index) {
  return (static_cast<std::uint64_t>(tag) << 40) ^ path_index;
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return normal_(engine_); }

double Rng::exponential(double rate) { return -std::log(uniform()) / rate; }

std::int64_t Rng::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 30.0) {
    // Inversion by sequential search; cheap for the small means of a time step.
    double u = uniform();
    double p = std::exp(-mean);
    std::int64_t k = 0;
    double cdf = p;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (k > 400) break;  // u beyond the rounded cdf
    }
    return k;
  }
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(engine_);
}

double Rng::gamma(double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

}  // namespace csbp
