#pragma once

#include <functional>
#include <string>

namespace fbbai {

// Link between the linear predictor z = x^T theta and the mean reward h(z).
//
// `cumulant` is an antiderivative of `value`. IRLS uses it as the merit
// function for step halving; when empty, the squared score norm is used.
struct MeanFunction {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::function<double(double)> cumulant;

  static MeanFunction identity();
  static MeanFunction logistic();

  // Checks monotonicity and h' > 0 on an evenly spaced probe grid over [lo, hi].
  bool is_increasing_on(double lo, double hi, int probes = 201) const;
};

double logistic_value(double z);
double logistic_derivative(double z);
// log(1 + e^z) without overflow.
double softplus(double z);

}  // namespace fbbai
