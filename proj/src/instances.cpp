#include "fbbai/instances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "fbbai/errors.hpp"

namespace fbbai {

BanditInstance BanditInstance::create(Eigen::MatrixXd features, Eigen::VectorXd theta_star,
                                      std::optional<MeanFunction> mean_fn, NoiseKind noise,
                                      double noise_sigma2) {
  if (features.rows() < 2) throw DegenerateInput("instance needs at least two arms");
  if (features.cols() < 1) throw DegenerateInput("instance needs dimension d >= 1");
  if (theta_star.size() != features.cols())
    throw DegenerateInput("theta* dimension does not match feature dimension");
  if (!(noise_sigma2 >= 0)) throw DegenerateInput("noise variance must be nonnegative");
  if (!features.allFinite() || !theta_star.allFinite())
    throw DegenerateInput("non-finite features or parameter");

  BanditInstance inst;
  inst.norm_bound_ = features.rowwise().norm().maxCoeff();
  if (!(inst.norm_bound_ > 0)) throw DegenerateInput("all feature rows are zero");

  Eigen::VectorXd linear = features * theta_star;
  if (mean_fn) {
    inst.means_ = linear.unaryExpr([&](double z) { return mean_fn->value(z); });
  } else {
    inst.means_ = linear;
  }
  if (noise == NoiseKind::Bernoulli &&
      (inst.means_.minCoeff() < 0.0 || inst.means_.maxCoeff() > 1.0))
    throw DegenerateInput("Bernoulli rewards need means in [0, 1]");

  Eigen::Index best = 0;
  inst.means_.maxCoeff(&best);
  double second = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < inst.means_.size(); ++i)
    if (i != best) second = std::max(second, inst.means_(i));
  const double gap = inst.means_(best) - second;
  if (!(gap > 0)) throw DegenerateInput("no strictly unique best arm");

  inst.features_ = std::move(features);
  inst.theta_star_ = std::move(theta_star);
  inst.mean_fn_ = std::move(mean_fn);
  inst.noise_ = noise;
  inst.noise_sigma2_ = noise_sigma2;
  inst.best_arm_ = static_cast<ArmId>(best);
  inst.min_gap_ = gap;
  return inst;
}

double BanditInstance::subgaussian_sigma2() const {
  switch (noise_) {
    case NoiseKind::Gaussian:
      return noise_sigma2_;
    case NoiseKind::Bernoulli:
      return 0.25;
    case NoiseKind::MeanOnly:
      return 0.0;
  }
  return noise_sigma2_;
}

BanditInstance BanditInstance::with_noise(NoiseKind noise, double noise_sigma2) const {
  return create(features_, theta_star_, mean_fn_, noise, noise_sigma2);
}

ProjectedArmSet project_to_span(const Eigen::MatrixXd& active_features, double rank_tol,
                                std::vector<ArmId> ids) {
  if (active_features.rows() < 1) throw DegenerateInput("projection of an empty arm set");
  if (!(rank_tol > 0)) throw ConfigError("rank_tol must be positive");
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(active_features.rows()));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  }
  if (ids.size() != static_cast<std::size_t>(active_features.rows()))
    throw DegenerateInput("arm id count does not match feature rows");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(active_features, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0)) throw DegenerateInput("all-zero feature matrix");

  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > rank_tol * sv(0)) ++rank;

  ProjectedArmSet out;
  out.basis = svd.matrixV().leftCols(rank);
  out.projected_features = active_features * out.basis;
  out.original_ids = std::move(ids);
  return out;
}

ProjectedArmSet project_arms(const BanditInstance& instance, const std::vector<ArmId>& ids,
                             double rank_tol) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(ids.size()), instance.features().cols());
  for (std::size_t r = 0; r < ids.size(); ++r)
    rows.row(static_cast<Eigen::Index>(r)) =
        instance.features().row(static_cast<Eigen::Index>(ids[r]));
  return project_to_span(rows, rank_tol, ids);
}

double sample_reward(const BanditInstance& instance, ArmId arm, Rng& rng) {
  return RewardSampler(instance)(arm, rng);
}

RewardSampler::RewardSampler(const BanditInstance& instance)
    : instance_(&instance), sigma_(std::sqrt(instance.noise_sigma2())) {}

double RewardSampler::operator()(ArmId arm, Rng& rng) {
  const double mu = instance_->mean(arm);
  switch (instance_->noise()) {
    case NoiseKind::Gaussian:
      return sigma_ == 0.0 ? mu : mu + sigma_ * gauss_(rng);
    case NoiseKind::Bernoulli:
      return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < mu ? 1.0 : 0.0;
    case NoiseKind::MeanOnly:
      return mu;
  }
  return mu;
}

// ---- experiment families -------------------------------------------------

BanditInstance gen_adaptive_instance(int d, double omega, double sigma2) {
  if (d < 2) throw ConfigError("adaptive instance needs d >= 2");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(d + 1, d);
  x.topRows(d).setIdentity();
  x(d, 0) = std::cos(omega);
  x(d, 1) = std::sin(omega);
  Eigen::VectorXd theta = Eigen::VectorXd::Unit(d, 0);
  return BanditInstance::create(std::move(x), std::move(theta), std::nullopt,
                                NoiseKind::Gaussian, sigma2);
}

BanditInstance gen_static_instance(double delta, int K, double sigma2) {
  if (K < 2) throw ConfigError("static instance needs K >= 2");
  if (!(delta > 0)) throw DegenerateInput("static instance needs delta > 0");
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(K, K);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(K);
  theta(0) = delta;
  return BanditInstance::create(std::move(x), std::move(theta), std::nullopt,
                                NoiseKind::Gaussian, sigma2);
}

namespace {

// Retries a randomized generator until it yields a strictly unique best arm.
template <typename Draw>
BanditInstance retry_unique(Draw&& draw) {
  for (int attempt = 0; attempt < kMaxGeneratorAttempts; ++attempt) {
    try {
      return draw();
    } catch (const DegenerateInput&) {
    }
  }
  throw DegenerateInput("generator failed to produce a unique best arm");
}

Eigen::VectorXd unit_vector(int d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(d);
  do {
    for (int j = 0; j < d; ++j) v(j) = gauss(rng);
  } while (!(v.norm() > 0));
  return v / v.norm();
}

}  // namespace

BanditInstance gen_sphere_instance(int K, int d, Rng& rng, double sigma2) {
  if (K < 2 || d < 2) throw ConfigError("sphere instance needs K >= 2 and d >= 2");
  return retry_unique([&] {
    Eigen::MatrixXd x(K, d);
    for (int i = 0; i < K; ++i) x.row(i) = unit_vector(d, rng).transpose();

    // Closest pair; ties resolved by the lexicographically lowest (i, j).
    int bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < K; ++i)
      for (int j = i + 1; j < K; ++j) {
        const double dist = (x.row(i) - x.row(j)).squaredNorm();
        if (dist < best) {
          best = dist;
          bi = i;
          bj = j;
        }
      }
    Eigen::VectorXd theta = (x.row(bi) + 0.01 * (x.row(bj) - x.row(bi))).transpose();
    BanditInstance inst = BanditInstance::create(x, std::move(theta), std::nullopt,
                                                 NoiseKind::Gaussian, sigma2);
    if (inst.best_arm() != static_cast<ArmId>(bi))
      throw DegenerateInput("closest-pair anchor is not the best arm");
    return inst;
  });
}

BanditInstance gen_logistic_instance(int K, int d, Rng& rng) {
  if (K < 2 || d < 1) throw ConfigError("logistic instance needs K >= 2 and d >= 1");
  return retry_unique([&] {
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    std::normal_distribution<double> gauss(0.0, std::sqrt(3.0 / d));
    Eigen::MatrixXd x(K, d);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = unif(rng);
    Eigen::VectorXd theta(d);
    for (int j = 0; j < d; ++j) theta(j) = gauss(rng);
    return BanditInstance::create(std::move(x), std::move(theta), MeanFunction::logistic(),
                                  NoiseKind::Bernoulli, 0.0);
  });
}

BanditInstance gen_corner_instance(int K, Rng& rng, double sigma2) {
  if (K < 3) throw ConfigError("corner instance needs K >= 3");
  using std::numbers::pi;
  return retry_unique([&] {
    std::normal_distribution<double> jitter(0.0, 0.09);
    Eigen::MatrixXd x(K, 2);
    x.row(0) << 1.0, 0.0;
    for (int i = 1; i < K - 1; ++i) {
      const double angle = pi / 4 + jitter(rng);
      x.row(i) << std::cos(angle), std::sin(angle);
    }
    x.row(K - 1) << std::cos(3 * pi / 4), std::sin(3 * pi / 4);
    BanditInstance inst = BanditInstance::create(x, Eigen::Vector2d(1.0, 0.0), std::nullopt,
                                                 NoiseKind::Gaussian, sigma2);
    if (inst.best_arm() != 0) throw DegenerateInput("corner instance: arm 1 not optimal");
    return inst;
  });
}

}  // namespace fbbai
