#pragma once

#include <span>
#include <string>

namespace moranq {

/// Round-trip decimal text (17 significant digits) used in every output file.
std::string format_double(double v);

/// Ordinary least-squares slope of y on x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

/// Compensated (Neumaier) summation.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if ((sum_ >= 0 ? sum_ : -sum_) >= (v >= 0 ? v : -v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace moranq
