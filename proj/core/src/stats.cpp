#include "csbp/stats.hpp"

#include <cmath>

#include "csbp/errors.hpp"

namespace csbp {

void NeumaierSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

double neumaier_sum(const std::vector<double>& xs) {
  NeumaierSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  r.n = xs.size();
  if (r.n == 0) return r;
  r.mean = neumaier_sum(xs) / static_cast<double>(r.n);
  if (r.n < 2) return r;
  NeumaierSum ss;
  for (double x : xs) ss.add((x - r.mean) * (x - r.mean));
  r.var = ss.value() / static_cast<double>(r.n - 1);
  r.se = std::sqrt(r.var / static_cast<double>(r.n));
  return r;
}

MeanSe paired_difference(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("paired_difference: size mismatch");
  std::vector<double> d(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) d[i] = xs[i] - ys[i];
  return mean_se(d);
}

}  // namespace csbp
