#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbbai/design.hpp"
#include "fbbai/estimators.hpp"
#include "fbbai/instances.hpp"

namespace fbbai {

enum class AllocationStrategy { Uniform, FwGOptimal, FwDOptimal, StaticSingleStage };
enum class EstimatorModel { Linear, Glm };

struct GseConfig {
  double eta = 2.0;
  long budget = 0;
  AllocationStrategy strategy = AllocationStrategy::FwGOptimal;
  EstimatorModel model = EstimatorModel::Linear;
  MeanFunction glm_mean = MeanFunction::logistic();
  // Prepend one pull of d_t spanning arms per stage, taken from the stage budget.
  bool forced_exploration = false;
  // Give the unused B - s*n pulls to the last stage.
  bool spend_remainder_last_stage = false;
  double rank_tol = kDefaultRankTol;
  FwOptions fw;
  IrlsOptions irls;
};

struct StageSchedule {
  int stages = 0;                  // s = ceil(log_eta K)
  long per_stage = 0;              // n = floor(B / s)
  std::vector<std::size_t> sizes;  // |A_1| = K, ..., |A_{s+1}| = 1
};

// Throws ConfigError for K < 2, eta <= 1 or B < s.
StageSchedule stage_schedule(std::size_t K, double eta, long B);

// ceil(m / eta), exact for integral eta.
std::size_t ceil_div_eta(std::size_t m, double eta);

// Rewards drawn for a stage, both stacked and grouped per active arm.
struct Exploration {
  Allocation allocation;        // indexed like the active set
  GroupedRegressionData data;   // projected rows, pull counts, reward sums
  std::vector<double> rewards;  // in pull order (arm by arm)
  double design_g = 0.0;        // g of the design the allocation was rounded from
  bool design_certified = false;

  RegressionData stacked() const { return data.stacked(rewards); }
};

// Uniform: n / |A_t| pulls each, remainder to the lowest positions.
// FwGOptimal / FwDOptimal: Frank-Wolfe design, then rounding.
Exploration explore(const BanditInstance& instance, const ProjectedArmSet& active, long n,
                    AllocationStrategy strategy, Rng& rng, const GseConfig& config = {});

// Keeps the ceil(|A_t| / eta) arms with the largest estimates; ties go to the
// lower arm id. `estimates` is aligned with `active`; survivors come back in
// ascending id order.
std::vector<ArmId> eliminate(const std::vector<ArmId>& active, const Eigen::VectorXd& estimates,
                             double eta);
std::vector<ArmId> keep_top(const std::vector<ArmId>& active, const Eigen::VectorXd& estimates,
                            std::size_t keep);

struct StageTrace {
  int stage = 0;
  std::vector<ArmId> active;
  std::size_t dim = 0;
  std::vector<long> allocation;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd estimates;
  std::vector<ArmId> survivors;
  bool estimator_converged = true;
  int estimator_iterations = 0;
  bool fell_back_to_linear = false;
  double design_g = 0.0;
  bool design_certified = false;
  // max_{i in A_t} ||x_i||^2_{V_t^{-1}} with V_t = sum_j X_j X_j^T.
  double max_norm2 = 0.0;
  // max_{i in A_t} ||x_i - x_best||^2_{V_t^{-1}}; NaN once the best arm is gone.
  double max_diff_norm2 = 0.0;
  // Same maximum over every arm of the instance; +inf for arms outside span(A_t).
  double max_diff_norm2_all_arms = 0.0;
};

struct RunResult {
  ArmId recommended = 0;
  std::vector<StageTrace> traces;
  long total_pulls = 0;
  std::optional<bool> success;
};

// Generalized successive elimination. Throws ConfigError when the per-stage
// budget cannot span the arms, InvalidAllocation when a stage's V_t is
// singular. Deterministic given (instance, config, rng state).
RunResult gse_run(const BanditInstance& instance, const GseConfig& config, Rng& rng);

// One G-optimal allocation of the whole budget over all K arms, one
// least-squares fit, recommend the argmax.
RunResult static_single_stage_run(const BanditInstance& instance, long budget, Rng& rng,
                                  const GseConfig& config = {});

// Canonical text rendering of a run, for byte-level determinism checks.
std::string to_json(const RunResult& result);

}  // namespace fbbai
