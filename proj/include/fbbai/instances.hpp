#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbbai/mean_function.hpp"

namespace fbbai {

using Rng = std::mt19937_64;
using ArmId = std::size_t;

enum class NoiseKind {
  Gaussian,   // y = mu + N(0, sigma2)
  Bernoulli,  // y ~ Bern(mu), requires mu in [0, 1]
  MeanOnly,   // y = mu; deterministic stand-in for either of the above
};

// Ground truth the simulator samples from. Immutable after construction; build
// through `BanditInstance::create`, which validates the invariants and locates
// the unique best arm.
class BanditInstance {
 public:
  // Throws DegenerateInput if K < 2, d < 1, all rows are zero, dimensions
  // disagree, or the best mean is not strictly unique.
  static BanditInstance create(Eigen::MatrixXd features, Eigen::VectorXd theta_star,
                               std::optional<MeanFunction> mean_fn, NoiseKind noise,
                               double noise_sigma2);

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& theta_star() const { return theta_star_; }
  const std::optional<MeanFunction>& mean_fn() const { return mean_fn_; }
  bool is_glm() const { return mean_fn_.has_value(); }
  NoiseKind noise() const { return noise_; }
  double noise_sigma2() const { return noise_sigma2_; }

  std::size_t num_arms() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  double norm_bound() const { return norm_bound_; }

  const Eigen::VectorXd& means() const { return means_; }
  double mean(ArmId arm) const { return means_(static_cast<Eigen::Index>(arm)); }
  ArmId best_arm() const { return best_arm_; }
  // min_{i != best} (mu_best - mu_i).
  double min_gap() const { return min_gap_; }

  // Variance proxy used by the error bounds: sigma2 for Gaussian noise, 1/4
  // for Bernoulli rewards, 0 when noiseless.
  double subgaussian_sigma2() const;

  // Same arms and parameter with a different noise model.
  BanditInstance with_noise(NoiseKind noise, double noise_sigma2) const;

 private:
  BanditInstance() = default;

  Eigen::MatrixXd features_;
  Eigen::VectorXd theta_star_;
  std::optional<MeanFunction> mean_fn_;
  NoiseKind noise_ = NoiseKind::Gaussian;
  double noise_sigma2_ = 0.0;
  double norm_bound_ = 0.0;
  Eigen::VectorXd means_;
  ArmId best_arm_ = 0;
  double min_gap_ = 0.0;
};

// Active arms expressed in an orthonormal basis of their span.
struct ProjectedArmSet {
  Eigen::MatrixXd projected_features;  // |A_t| x d_t
  Eigen::MatrixXd basis;               // d x d_t, orthonormal columns
  std::vector<ArmId> original_ids;

  std::size_t size() const { return original_ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(basis.cols()); }
};

inline constexpr double kDefaultRankTol = 1e-9;

// Projects the rows of `active_features` onto the span of those rows. The basis
// comes from an SVD, keeping singular values above rank_tol * sigma_max.
// `ids` labels the rows; when empty, rows are labelled 0..m-1.
ProjectedArmSet project_to_span(const Eigen::MatrixXd& active_features,
                                double rank_tol = kDefaultRankTol,
                                std::vector<ArmId> ids = {});

// Projection of a subset of the instance's arms.
ProjectedArmSet project_arms(const BanditInstance& instance, const std::vector<ArmId>& ids,
                             double rank_tol = kDefaultRankTol);

double sample_reward(const BanditInstance& instance, ArmId arm, Rng& rng);

// Draws rewards for one instance from a single reusable noise distribution.
// A sequence of calls consumes the stream differently from repeated
// sample_reward calls but has the same distribution.
class RewardSampler {
 public:
  explicit RewardSampler(const BanditInstance& instance);
  double operator()(ArmId arm, Rng& rng);

 private:
  const BanditInstance* instance_;
  double sigma_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

// ---- experiment families -------------------------------------------------

// e_1..e_d plus (cos w, sin w, 0, ...); theta* = e_1.
BanditInstance gen_adaptive_instance(int d, double omega, double sigma2);

// e_1..e_K in R^K; theta* = (delta, 0, ..., 0).
BanditInstance gen_static_instance(double delta, int K, double sigma2 = 10.0);

// K uniform unit vectors; theta* = x_i + 0.01 (x_j - x_i) for the closest pair.
BanditInstance gen_sphere_instance(int K, int d, Rng& rng, double sigma2 = 10.0);

// Arms uniform on [-1/2, 1/2]^d, theta* ~ N(0, (3/d) I), Bernoulli rewards with
// logistic mean.
BanditInstance gen_logistic_instance(int K, int d, Rng& rng);

// d = 2, x_1 = theta* = e_1, x_K at angle 3pi/4, the rest at pi/4 + N(0, 0.09^2).
BanditInstance gen_corner_instance(int K, Rng& rng, double sigma2 = 1.0);

inline constexpr int kMaxGeneratorAttempts = 100;

}  // namespace fbbai
