#include <doctest.h>

#include <cmath>

#include "fbbai/bounds.hpp"
#include "fbbai/errors.hpp"
#include "fbbai/instances.hpp"

using namespace fbbai;

namespace {

BoundInputs reference() {
  BoundInputs in;
  in.B = 320;
  in.K = 16;
  in.d = 16;
  in.eta = 2.0;
  in.sigma2 = 10.0;
  in.delta_min = 2.0;
  return in;
}

}  // namespace

TEST_CASE("linear G-optimal bound: reference values") {
  BoundInputs in = reference();
  // 16 exp(-0.5) = 9.70 > 1
  CHECK(bound_linear_gopt(in) == 1.0);
  in.B = 32000;
  CHECK(bound_linear_gopt(in) == doctest::Approx(16.0 * std::exp(-50.0)).epsilon(1e-12));
  in.B = 1000000000;
  CHECK(bound_linear_gopt(in) < 1e-300);
}

TEST_CASE("GLM G-optimal bound with c_min = 1 halves the linear exponent") {
  BoundInputs in = reference();
  in.B = 6000;
  const double lin_half = std::min(1.0, 16.0 * std::exp(-6000.0 * 4 / (4 * 10.0 * 16 * 4) / 2));
  CHECK(bound_glm_gopt(in) == doctest::Approx(lin_half).epsilon(1e-12));
  in.delta_min = 0.0;
  CHECK(bound_glm_gopt(in) == 1.0);
}

TEST_CASE("general linear bound: limits, hand value, relaxation") {
  BoundInputs in;
  in.K = 2;
  in.d = 1;
  in.eta = 2.0;
  in.sigma2 = 1.0;
  in.delta_min = 1.0;
  // Two arms x = 1, 2 in d = 1 with 10 pulls each: V = 10 + 40 = 50.
  const double diff2 = 1.0 / 50.0;
  CHECK(bound_linear_general(in, diff2) ==
        doctest::Approx(std::min(1.0, 4.0 * std::exp(-1.0 / (4 * diff2)))).epsilon(1e-12));
  CHECK(bound_linear_general(in, 1e-12) == 0.0);
  CHECK(bound_linear_general(in, INFINITY) == 1.0);
  CHECK_THROWS_AS(bound_linear_general(in, NAN), ConfigError);
  // ||x_i - x_1||^2 <= 4 max ||x||^2 (triangle inequality).
  const double max_norm2 = 4.0 / 50.0;
  CHECK(bound_linear_general(in, diff2) <= bound_linear_general(in, 4 * max_norm2));
}

TEST_CASE("bounds are monotone and clipped on a parameter grid") {
  for (long B : {10L, 100L, 1000L, 10000L})
    for (double dm : {0.1, 0.5, 2.0})
      for (double s2 : {0.25, 1.0, 10.0})
        for (std::size_t d : {2u, 8u})
          for (std::size_t K : {4u, 16u}) {
            BoundInputs in{B, K, d, 2.0, s2, dm, 0.2};
            for (auto f : {bound_linear_gopt, bound_glm_gopt}) {
              const double v = f(in);
              CHECK(v >= 0.0);
              CHECK(v <= 1.0);
              BoundInputs more = in;
              more.B *= 2;
              CHECK(f(more) <= v);
              more = in;
              more.delta_min *= 2;
              CHECK(f(more) <= v);
              more = in;
              more.sigma2 *= 2;
              CHECK(f(more) >= v);
              more = in;
              more.d *= 2;
              CHECK(f(more) >= v);
              more = in;
              more.K *= 2;
              CHECK(f(more) >= v);
            }
            for (double norm : {0.01, 0.1, 1.0}) {
              CHECK(bound_glm_general(in, norm) <= bound_glm_general(in, 2 * norm));
              CHECK(bound_linear_general(in, norm) <= bound_linear_general(in, 2 * norm));
            }
          }
}

TEST_CASE("invalid bound inputs") {
  BoundInputs in = reference();
  in.eta = 1.0;
  CHECK_THROWS_AS(bound_linear_gopt(in), ConfigError);
  in = reference();
  in.c_min = 0.0;
  CHECK_THROWS_AS(bound_glm_gopt(in), ConfigError);
  in = reference();
  in.sigma2 = 0.0;
  CHECK(bound_linear_gopt(in) == 0.0);
}

TEST_CASE("c_min oracle") {
  const BanditInstance lin = gen_static_instance(1.0, 3, 1.0);
  CHECK(oracle_c_min(lin) == 1.0);

  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 0, 1;
  const BanditInstance zero = BanditInstance::create(x, Eigen::Vector2d(1e-3, 0),
                                                     MeanFunction::logistic(),
                                                     NoiseKind::Bernoulli, 0.0);
  CHECK(oracle_c_min(zero, 0.0, 0) == doctest::Approx(logistic_derivative(1e-3)));
  CHECK(oracle_c_min(zero, 0.0, 0) == doctest::Approx(0.25).epsilon(1e-6));

  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    const BanditInstance inst = gen_logistic_instance(8, 5, rng);
    const double c = oracle_c_min(inst, 0.5, 20000);
    CHECK(c == oracle_c_min_serial(inst, 0.5, 20000));
    // Logistic h' is even and decreasing in |z|, so the exact minimum over the
    // ball is h'(|x.theta*| + r ||x||) at the worst arm; probes approach it from above.
    double exact = 1.0;
    for (Eigen::Index i = 0; i < 8; ++i) {
      const double z = std::abs(inst.features().row(i).dot(inst.theta_star())) +
                       0.5 * inst.features().row(i).norm();
      exact = std::min(exact, logistic_derivative(z));
    }
    CHECK(c >= exact - 1e-15);
    CHECK(c <= exact * 1.1);
    // A denser probe set can only lower the minimum.
    CHECK(oracle_c_min(inst, 0.5, 100000) <= c);
    // Without a radius the minimum is at theta*.
    double at_star = 1.0;
    for (Eigen::Index i = 0; i < 8; ++i)
      at_star = std::min(at_star, logistic_derivative(inst.features().row(i).dot(inst.theta_star())));
    CHECK(oracle_c_min(inst, 0.0, 10) == doctest::Approx(at_star).epsilon(1e-14));
  }
}

TEST_CASE("c_min lower bound when all predictors are within one") {
  Eigen::MatrixXd x(3, 1);
  x << 1.0, -0.5, 0.25;
  const BanditInstance inst = BanditInstance::create(x, Eigen::VectorXd::Ones(1),
                                                     MeanFunction::logistic(),
                                                     NoiseKind::Bernoulli, 0.0);
  CHECK(oracle_c_min(inst, 0.0, 0) >= std::exp(1.0) / std::pow(1 + std::exp(1.0), 2) - 1e-15);
  CHECK(std::exp(1.0) / std::pow(1 + std::exp(1.0), 2) == doctest::Approx(0.1966).epsilon(1e-3));
}
