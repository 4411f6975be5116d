#include "fbbai/estimators.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "fbbai/errors.hpp"

namespace fbbai {

GroupedRegressionData GroupedRegressionData::from_stacked(const RegressionData& data) {
  if (data.xs.rows() != data.ys.size())
    throw DegenerateInput("regression data: row count of xs differs from length of ys");
  // Exact row equality; rows produced by repeated pulls are bit-identical.
  std::map<std::vector<double>, Eigen::Index> index;
  std::vector<Eigen::Index> order;
  std::vector<double> counts, sums;
  for (Eigen::Index r = 0; r < data.xs.rows(); ++r) {
    std::vector<double> key(static_cast<std::size_t>(data.xs.cols()));
    for (Eigen::Index j = 0; j < data.xs.cols(); ++j) key[static_cast<std::size_t>(j)] = data.xs(r, j);
    auto [it, inserted] = index.emplace(std::move(key), static_cast<Eigen::Index>(order.size()));
    if (inserted) {
      order.push_back(r);
      counts.push_back(0.0);
      sums.push_back(0.0);
    }
    counts[static_cast<std::size_t>(it->second)] += 1.0;
    sums[static_cast<std::size_t>(it->second)] += data.ys(r);
  }
  GroupedRegressionData out;
  const auto m = static_cast<Eigen::Index>(order.size());
  out.xs.resize(m, data.xs.cols());
  out.counts.resize(m);
  out.y_sums.resize(m);
  for (Eigen::Index g = 0; g < m; ++g) {
    out.xs.row(g) = data.xs.row(order[static_cast<std::size_t>(g)]);
    out.counts(g) = counts[static_cast<std::size_t>(g)];
    out.y_sums(g) = sums[static_cast<std::size_t>(g)];
  }
  return out;
}

RegressionData GroupedRegressionData::stacked(const std::vector<double>& rewards) const {
  const auto n = static_cast<Eigen::Index>(total_count());
  if (static_cast<Eigen::Index>(rewards.size()) != n)
    throw DegenerateInput("reward count does not match grouped pull counts");
  RegressionData out{Eigen::MatrixXd(n, xs.cols()), Eigen::VectorXd(n)};
  Eigen::Index r = 0;
  for (Eigen::Index g = 0; g < xs.rows(); ++g)
    for (int k = 0; k < static_cast<int>(counts(g)); ++k, ++r) {
      out.xs.row(r) = xs.row(g);
      out.ys(r) = rewards[static_cast<std::size_t>(r)];
    }
  return out;
}

namespace {

void check_shapes(const RegressionData& data) {
  if (data.xs.rows() < 1) throw DegenerateInput("regression data is empty");
  if (data.xs.rows() != data.ys.size())
    throw DegenerateInput("regression data: row count of xs differs from length of ys");
}

void check_shapes(const GroupedRegressionData& data) {
  if (data.xs.rows() < 1 || !(data.total_count() > 0))
    throw DegenerateInput("regression data is empty");
  if (data.xs.rows() != data.counts.size() || data.xs.rows() != data.y_sums.size())
    throw DegenerateInput("grouped regression data: inconsistent lengths");
}

ParameterEstimate solve_normal(const Eigen::MatrixXd& v, const Eigen::VectorXd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0) || hi / lo >= kMaxConditionNumber)
    throw InvalidAllocation("V_t is singular or ill-conditioned (smallest eigenvalue " +
                            std::to_string(lo) + ")");
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) throw InvalidAllocation("V_t is not positive definite");
  ParameterEstimate est;
  est.theta_hat = llt.solve(b);
  // One round of iterative refinement.
  est.theta_hat += llt.solve(b - v * est.theta_hat);
  if ((v * est.theta_hat - b).norm() > 1e-8 * b.norm())
    throw InvalidAllocation("least-squares residual check failed");
  est.covariance = v;
  est.converged = true;
  est.iterations = 1;
  return est;
}

// The IRLS iteration only needs weighted sums over rows, so both data layouts
// share one implementation through this view.
struct WeightedRows {
  const Eigen::MatrixXd& xs;
  Eigen::VectorXd counts;
  const Eigen::VectorXd& y_sums;
};

Eigen::VectorXd score_of(const WeightedRows& rows, const MeanFunction& h,
                         const Eigen::VectorXd& eta) {
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    resid(i) = rows.y_sums(i) - rows.counts(i) * h.value(eta(i));
  return rows.xs.transpose() * resid;
}

double merit_of(const WeightedRows& rows, const MeanFunction& h, const Eigen::VectorXd& eta) {
  if (!h.cumulant) return 0.5 * score_of(rows, h, eta).squaredNorm();
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    total += rows.counts(i) * h.cumulant(eta(i)) - rows.y_sums(i) * eta(i);
  return total;
}

// Fitted means are numerically flat: h' vanished on some observed row.
constexpr double kSaturatedDerivative = 1e-12;
constexpr double kStepTol = 1e-6;

ParameterEstimate irls_impl(const WeightedRows& rows, const MeanFunction& h,
                            const IrlsOptions& opt) {
  const auto d = rows.xs.cols();
  const auto m = rows.xs.rows();
  ParameterEstimate est;
  est.theta_hat = Eigen::VectorXd::Zero(d);
  const Eigen::MatrixXd ridge = opt.ridge * Eigen::MatrixXd::Identity(d, d);

  Eigen::VectorXd eta = rows.xs * est.theta_hat;
  double merit = merit_of(rows, h, eta);
  Eigen::VectorXd w(m);

  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    est.iterations = iter;
    bool saturated = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double deriv = h.derivative(eta(i));
      w(i) = rows.counts(i) * deriv;
      if (rows.counts(i) > 0 && deriv < kSaturatedDerivative) saturated = true;
    }
    const Eigen::VectorXd score = score_of(rows, h, eta);
    const Eigen::MatrixXd info = rows.xs.transpose() * w.asDiagonal() * rows.xs;
    est.covariance = info;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(info + ridge);
    const Eigen::VectorXd step = ldlt.solve(score);
    if (!step.allFinite()) throw EstimationFailure("IRLS: Newton system is singular");

    const bool score_ok = score.norm() <= opt.tol;
    if (score_ok && step.norm() <= kStepTol * (1.0 + est.theta_hat.norm())) {
      est.converged = true;
      return est;
    }
    if (saturated) return est;

    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opt.max_halvings; ++k, t *= 0.5) {
      const Eigen::VectorXd trial = est.theta_hat + t * step;
      const Eigen::VectorXd trial_eta = rows.xs * trial;
      const double trial_merit = merit_of(rows, h, trial_eta);
      if (std::isfinite(trial_merit) &&
          trial_merit <= merit + 1e-14 * (1.0 + std::abs(merit))) {
        est.theta_hat = trial;
        eta = trial_eta;
        merit = trial_merit;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (score_ok) {
        est.converged = true;
        return est;
      }
      throw EstimationFailure("IRLS: objective increased after " +
                              std::to_string(opt.max_halvings) + " step halvings");
    }
  }
  return est;
}

}  // namespace

ParameterEstimate least_squares(const RegressionData& data) {
  check_shapes(data);
  return solve_normal(data.xs.transpose() * data.xs, data.xs.transpose() * data.ys);
}

ParameterEstimate least_squares(const GroupedRegressionData& data) {
  check_shapes(data);
  return solve_normal(data.xs.transpose() * data.counts.asDiagonal() * data.xs,
                      data.xs.transpose() * data.y_sums);
}

ParameterEstimate irls_glm(const RegressionData& data, const MeanFunction& h,
                           const IrlsOptions& options) {
  check_shapes(data);
  return irls_impl({data.xs, Eigen::VectorXd::Ones(data.xs.rows()), data.ys}, h, options);
}

ParameterEstimate irls_glm(const GroupedRegressionData& data, const MeanFunction& h,
                           const IrlsOptions& options) {
  check_shapes(data);
  return irls_impl({data.xs, data.counts, data.y_sums}, h, options);
}

double score_residual(const RegressionData& data, const MeanFunction& h,
                      const Eigen::VectorXd& theta) {
  const WeightedRows rows{data.xs, Eigen::VectorXd::Ones(data.xs.rows()), data.ys};
  return score_of(rows, h, data.xs * theta).norm();
}

double score_residual(const GroupedRegressionData& data, const MeanFunction& h,
                      const Eigen::VectorXd& theta) {
  const WeightedRows rows{data.xs, data.counts, data.y_sums};
  return score_of(rows, h, data.xs * theta).norm();
}

Eigen::VectorXd mean_estimates(const Eigen::VectorXd& theta_hat, const Eigen::MatrixXd& arms,
                               const MeanFunction* mean_fn) {
  if (arms.cols() != theta_hat.size())
    throw DegenerateInput("arm dimension does not match parameter dimension");
  Eigen::VectorXd z = arms * theta_hat;
  if (mean_fn) z = z.unaryExpr([&](double v) { return mean_fn->value(v); });
  return z;
}

}  // namespace fbbai
