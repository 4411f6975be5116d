#include "fbbai/mean_function.hpp"

#include <cmath>

namespace fbbai {

double logistic_value(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_derivative(double z) {
  const double p = logistic_value(z);
  return p * (1.0 - p);
}

double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

MeanFunction MeanFunction::identity() {
  return {"identity", [](double z) { return z; }, [](double) { return 1.0; },
          [](double z) { return 0.5 * z * z; }};
}

MeanFunction MeanFunction::logistic() {
  return {"logistic", logistic_value, logistic_derivative, softplus};
}

bool MeanFunction::is_increasing_on(double lo, double hi, int probes) const {
  double prev = value(lo);
  for (int k = 0; k < probes; ++k) {
    const double z = lo + (hi - lo) * k / (probes - 1);
    if (!(derivative(z) > 0)) return false;
    const double v = value(z);
    if (k > 0 && !(v > prev)) return false;
    prev = v;
  }
  return true;
}

}  // namespace fbbai
