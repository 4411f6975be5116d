#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fbbai/mean_function.hpp"

namespace fbbai {

// Stacked observations (X_t, Y_t): one row per pull.
struct RegressionData {
  Eigen::MatrixXd xs;  // n x d_t
  Eigen::VectorXd ys;  // n
};

// The same observations grouped by distinct feature row. For data produced by
// pulling arms with repetition this is exact and costs O(#arms) instead of
// O(#pulls) per pass.
struct GroupedRegressionData {
  Eigen::MatrixXd xs;      // m x d_t, one row per arm
  Eigen::VectorXd counts;  // pulls per row
  Eigen::VectorXd y_sums;  // summed rewards per row

  static GroupedRegressionData from_stacked(const RegressionData& data);
  RegressionData stacked(const std::vector<double>& rewards_in_row_order) const;
  double total_count() const { return counts.sum(); }
};

struct ParameterEstimate {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd covariance;  // V_t (or the IRLS information matrix at theta_hat)
  bool converged = false;
  int iterations = 0;
};

inline constexpr double kMaxConditionNumber = 1e12;

// theta_hat = V^{-1} b with V = sum x x^T, b = sum x y, via a Cholesky solve.
// Throws InvalidAllocation if V is singular or its condition number reaches
// kMaxConditionNumber.
ParameterEstimate least_squares(const RegressionData& data);
ParameterEstimate least_squares(const GroupedRegressionData& data);

struct IrlsOptions {
  double tol = 1e-8;  // on the score norm ||sum (y - h(x^T theta)) x||
  int max_iter = 100;
  double ridge = 1e-10;
  int max_halvings = 30;
};

// Maximum-likelihood (score-equation) fit by Newton/IRLS with step halving.
// Returns converged=false with the last iterate when max_iter is reached or the
// fitted means saturate (separable data). Throws EstimationFailure if the
// merit function cannot be decreased after max_halvings halvings.
ParameterEstimate irls_glm(const RegressionData& data, const MeanFunction& h,
                           const IrlsOptions& options = {});
ParameterEstimate irls_glm(const GroupedRegressionData& data, const MeanFunction& h,
                           const IrlsOptions& options = {});

// ||sum_j (y_j - h(x_j^T theta)) x_j||_2.
double score_residual(const RegressionData& data, const MeanFunction& h,
                      const Eigen::VectorXd& theta);
double score_residual(const GroupedRegressionData& data, const MeanFunction& h,
                      const Eigen::VectorXd& theta);

// mu_hat_i = x_i^T theta (mean_fn == nullptr) or h(x_i^T theta).
Eigen::VectorXd mean_estimates(const Eigen::VectorXd& theta_hat, const Eigen::MatrixXd& arms,
                               const MeanFunction* mean_fn = nullptr);

}  // namespace fbbai
