#pragma once

#include <cstdint>
#include <vector>

#include "fbbai/gse.hpp"
#include "fbbai/instances.hpp"

namespace fbbai {

// Scalars entering the error bounds. Logarithms are base eta.
struct BoundInputs {
  long B = 0;
  std::size_t K = 0;
  std::size_t d = 0;
  double eta = 2.0;
  double sigma2 = 0.0;
  double delta_min = 0.0;
  double c_min = 1.0;  // GLM only
};

// log_eta K.
double log_eta(double K, double eta);

// All bounds return the failure probability clipped to [0, 1]. Invalid inputs
// (K < 2, eta <= 1, negative sigma2 / delta_min, c_min outside (0, 1]) throw
// ConfigError.

// 2 eta log K exp(-B Dmin^2 / (4 sigma^2 d log K)), G-optimal allocation.
double bound_linear_gopt(const BoundInputs& in);

// 2 eta log K exp(-Dmin^2 / (4 sigma^2 max ||x_i - x_best||^2_{V_t^{-1}})),
// for any valid allocation. `max_diff_norm2` is the max over stages (and
// arms) of the realized weighted norm; +inf gives the trivial bound.
double bound_linear_general(const BoundInputs& in, double max_diff_norm2);

// 2 eta log K exp(-B Dmin^2 c_min^2 / (8 sigma^2 d log K)).
double bound_glm_gopt(const BoundInputs& in);

// 2 eta log K exp(-Dmin^2 c_min^2 / (8 sigma^2 max ||x_i||^2_{V_t^{-1}})).
double bound_glm_general(const BoundInputs& in, double max_norm2);

// Realized norm terms of a run, maximised over stages. Stages after the best
// arm was eliminated carry NaN difference norms and are skipped.
struct RealizedNorms {
  double max_norm2 = 0.0;
  double max_diff_norm2 = 0.0;           // i in A_t
  double max_diff_norm2_all_arms = 0.0;  // i in A
};
RealizedNorms realized_norms(const RunResult& result);

inline constexpr double kDefaultCminRadius = 0.5;
inline constexpr long kDefaultCminProbes = 100000;
inline constexpr std::uint64_t kCminProbeSeed = 0x5eedc0de;

// min over arms i and probes theta of h'(x_i^T theta); probes are theta* and
// `probes` points drawn uniformly on the sphere of `radius` around theta*.
// Returns 1 for linear instances. Uses OpenMP over the probes.
double oracle_c_min(const BanditInstance& instance, double radius = kDefaultCminRadius,
                    long probes = kDefaultCminProbes, std::uint64_t seed = kCminProbeSeed);

// Same probe set, evaluated in a single thread.
double oracle_c_min_serial(const BanditInstance& instance, double radius = kDefaultCminRadius,
                           long probes = kDefaultCminProbes,
                           std::uint64_t seed = kCminProbeSeed);

}  // namespace fbbai
