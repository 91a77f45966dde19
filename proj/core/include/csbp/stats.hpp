#pragma once

#include <cstddef>
#include <vector>

namespace csbp {

/// Compensated (Neumaier) summation. Adding the same values in the same
/// order gives the same bits, which is what reports rely on.
class NeumaierSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double neumaier_sum(const std::vector<double>& xs);

struct MeanSe {
  double mean = 0.0;
  double var = 0.0;  // unbiased sample variance
  double se = 0.0;   // sqrt(var / n)
  std::size_t n = 0;
};

/// Sample mean, variance and standard error, reduced in index order.
MeanSe mean_se(const std::vector<double>& xs);

/// Mean and standard error of x_i - y_i (paired samples).
MeanSe paired_difference(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace csbp
