#include "fbbai/gse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "fbbai/errors.hpp"

namespace fbbai {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_integral(double eta) { return std::abs(eta - std::round(eta)) < 1e-12; }

// Rank of the instance's full arm matrix.
std::size_t full_rank(const BanditInstance& instance, double rank_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(instance.features());
  const Eigen::VectorXd& sv = svd.singularValues();
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(sv.size()) &&
         sv(static_cast<Eigen::Index>(rank)) > rank_tol * sv(0))
    ++rank;
  return rank;
}

Allocation uniform_allocation(std::size_t m, long n) {
  Allocation out;
  out.counts.assign(m, n / static_cast<long>(m));
  const long extra = n % static_cast<long>(m);
  for (long i = 0; i < extra; ++i) ++out.counts[static_cast<std::size_t>(i)];
  out.total = n;
  return out;
}

// Positions (within the active set) of d_t arms whose rows span R^{d_t}.
std::vector<Eigen::Index> spanning_positions(const Eigen::MatrixXd& rows) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(rows.transpose());
  std::vector<Eigen::Index> out;
  for (Eigen::Index k = 0; k < rows.cols(); ++k) out.push_back(qr.colsPermutation().indices()(k));
  return out;
}

// ||z||^2_{V^{-1}} for each column z.
Eigen::VectorXd weighted_norms(const Eigen::LDLT<Eigen::MatrixXd>& v, const Eigen::MatrixXd& z) {
  const Eigen::MatrixXd solved = v.solve(z);
  return (z.array() * solved.array()).colwise().sum().transpose();
}

void fill_bound_terms(const BanditInstance& instance, const ProjectedArmSet& proj,
                      const Exploration& ex, StageTrace& trace) {
  const Eigen::MatrixXd& x = proj.projected_features;
  const Eigen::MatrixXd v = x.transpose() * ex.data.counts.asDiagonal() * x;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(v);
  trace.max_norm2 = weighted_norms(ldlt, x.transpose()).maxCoeff();

  const auto best = instance.best_arm();
  const auto pos = std::find(proj.original_ids.begin(), proj.original_ids.end(), best);
  if (pos == proj.original_ids.end()) {
    trace.max_diff_norm2 = kNaN;
    trace.max_diff_norm2_all_arms = kNaN;
    return;
  }
  const Eigen::RowVectorXd x_best = x.row(pos - proj.original_ids.begin());
  trace.max_diff_norm2 = weighted_norms(ldlt, (x.rowwise() - x_best).transpose()).maxCoeff();

  // Every arm of the instance, expressed in the stage basis when it lies in
  // the span of the active arms.
  const Eigen::MatrixXd& all = instance.features();
  const Eigen::MatrixXd coords = all * proj.basis;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < all.rows(); ++i) {
    const double outside = (all.row(i) - coords.row(i) * proj.basis.transpose()).norm();
    if (outside > 1e-9 * std::max(1.0, all.row(i).norm())) {
      worst = kInf;
      break;
    }
    const Eigen::VectorXd diff = (coords.row(i) - x_best).transpose();
    worst = std::max(worst, diff.dot(ldlt.solve(diff)));
  }
  trace.max_diff_norm2_all_arms = worst;
}

ParameterEstimate estimate(const Exploration& ex, const GseConfig& config, StageTrace& trace) {
  if (config.model == EstimatorModel::Glm) {
    try {
      ParameterEstimate est = irls_glm(ex.data, config.glm_mean, config.irls);
      trace.estimator_converged = est.converged;
      trace.estimator_iterations = est.iterations;
      return est;
    } catch (const EstimationFailure&) {
      trace.fell_back_to_linear = true;
    }
  }
  ParameterEstimate est = least_squares(ex.data);
  trace.estimator_converged = est.converged;
  trace.estimator_iterations = est.iterations;
  return est;
}

void run_stage(const BanditInstance& instance, const std::vector<ArmId>& active, long n,
               std::size_t keep, AllocationStrategy strategy, const GseConfig& config,
               Rng& rng, RunResult& result) {
  StageTrace trace;
  trace.stage = static_cast<int>(result.traces.size()) + 1;
  trace.active = active;

  const ProjectedArmSet proj = project_arms(instance, active, config.rank_tol);
  trace.dim = proj.dim();
  const Exploration ex = explore(instance, proj, n, strategy, rng, config);
  trace.allocation = ex.allocation.counts;
  trace.design_g = ex.design_g;
  trace.design_certified = ex.design_certified;
  result.total_pulls += ex.allocation.total;

  const ParameterEstimate est = estimate(ex, config, trace);
  const bool glm = config.model == EstimatorModel::Glm && !trace.fell_back_to_linear;
  trace.theta_hat = est.theta_hat;
  trace.estimates =
      mean_estimates(est.theta_hat, proj.projected_features, glm ? &config.glm_mean : nullptr);
  trace.survivors = keep_top(active, trace.estimates, keep);
  fill_bound_terms(instance, proj, ex, trace);
  result.traces.push_back(std::move(trace));
}

void finish(const BanditInstance& instance, RunResult& result) {
  result.recommended = result.traces.back().survivors.front();
  result.success = result.recommended == instance.best_arm();
}

}  // namespace

std::size_t ceil_div_eta(std::size_t m, double eta) {
  if (is_integral(eta)) {
    const auto e = static_cast<std::size_t>(std::llround(eta));
    return (m + e - 1) / e;
  }
  return static_cast<std::size_t>(std::ceil(static_cast<double>(m) / eta - 1e-12));
}

StageSchedule stage_schedule(std::size_t K, double eta, long B) {
  if (K < 2) throw ConfigError("need at least two arms");
  if (!(eta > 1.0)) throw ConfigError("elimination parameter eta must exceed 1");
  StageSchedule out;
  if (is_integral(eta)) {
    for (std::size_t m = K; m > 1; m = ceil_div_eta(m, eta)) ++out.stages;
  } else {
    out.stages = static_cast<int>(
        std::ceil(std::log(static_cast<double>(K)) / std::log(eta) - 1e-12));
  }
  if (B < out.stages)
    throw ConfigError("budget " + std::to_string(B) + " is below the stage count " +
                      std::to_string(out.stages));
  out.per_stage = B / out.stages;
  out.sizes.push_back(K);
  for (int t = 1; t <= out.stages; ++t)
    out.sizes.push_back(std::max<std::size_t>(1, ceil_div_eta(out.sizes.back(), eta)));
  // Non-integral eta can leave more than one arm after s ceilings; the last
  // stage always recommends a single arm.
  out.sizes.back() = 1;
  return out;
}

Exploration explore(const BanditInstance& instance, const ProjectedArmSet& active, long n,
                    AllocationStrategy strategy, Rng& rng, const GseConfig& config) {
  const std::size_t m = active.size();
  const std::size_t d = active.dim();
  if (m == 0) throw DegenerateInput("explore called with no active arms");
  if (n < static_cast<long>(d))
    throw ConfigError("stage budget " + std::to_string(n) + " is below d_t = " +
                      std::to_string(d));

  Exploration ex;
  std::vector<long> forced(m, 0);
  long remaining = n;
  if (config.forced_exploration) {
    for (Eigen::Index p : spanning_positions(active.projected_features))
      forced[static_cast<std::size_t>(p)] = 1;
    remaining -= static_cast<long>(d);
  }

  switch (strategy) {
    case AllocationStrategy::Uniform:
      ex.allocation = uniform_allocation(m, remaining);
      break;
    case AllocationStrategy::FwGOptimal:
    case AllocationStrategy::FwDOptimal:
    case AllocationStrategy::StaticSingleStage: {
      FwOptions fw = config.fw;
      fw.criterion = strategy == AllocationStrategy::FwDOptimal ? DesignCriterion::D
                                                                : DesignCriterion::G;
      const Design design = fw_g_optimal(active.projected_features, fw);
      ex.design_g = design.g_value;
      ex.design_certified = design.certified;
      if (remaining > 0) {
        ex.allocation = round_allocation_with_retry(remaining, design.weights,
                                                    active.projected_features);
      } else {
        ex.allocation.counts.assign(m, 0);
      }
      break;
    }
  }
  for (std::size_t i = 0; i < m; ++i) ex.allocation.counts[i] += forced[i];
  ex.allocation.total = std::accumulate(ex.allocation.counts.begin(), ex.allocation.counts.end(), 0L);

  ex.data.xs = active.projected_features;
  ex.data.counts.resize(static_cast<Eigen::Index>(m));
  ex.data.y_sums.setZero(static_cast<Eigen::Index>(m));
  ex.rewards.reserve(static_cast<std::size_t>(ex.allocation.total));
  RewardSampler sampler(instance);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    ex.data.counts(row) = static_cast<double>(ex.allocation.counts[i]);
    for (long k = 0; k < ex.allocation.counts[i]; ++k) {
      const double y = sampler(active.original_ids[i], rng);
      ex.rewards.push_back(y);
      ex.data.y_sums(row) += y;
    }
  }
  return ex;
}

std::vector<ArmId> keep_top(const std::vector<ArmId>& active, const Eigen::VectorXd& estimates,
                            std::size_t keep) {
  if (static_cast<std::size_t>(estimates.size()) != active.size())
    throw DegenerateInput("estimate count does not match active set");
  if (!estimates.allFinite()) throw DegenerateInput("non-finite mean estimates");
  std::vector<std::size_t> order(active.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ea = estimates(static_cast<Eigen::Index>(a));
    const double eb = estimates(static_cast<Eigen::Index>(b));
    if (ea != eb) return ea > eb;
    return active[a] < active[b];
  });
  keep = std::min(keep, active.size());
  std::vector<ArmId> out;
  for (std::size_t k = 0; k < keep; ++k) out.push_back(active[order[k]]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ArmId> eliminate(const std::vector<ArmId>& active, const Eigen::VectorXd& estimates,
                             double eta) {
  if (!(eta > 1.0)) throw ConfigError("elimination parameter eta must exceed 1");
  return keep_top(active, estimates, ceil_div_eta(active.size(), eta));
}

RunResult gse_run(const BanditInstance& instance, const GseConfig& config, Rng& rng) {
  if (config.strategy == AllocationStrategy::StaticSingleStage)
    return static_single_stage_run(instance, config.budget, rng, config);

  const StageSchedule schedule = stage_schedule(instance.num_arms(), config.eta, config.budget);
  const long min_stage = static_cast<long>(full_rank(instance, config.rank_tol));
  if (schedule.per_stage < min_stage)
    throw ConfigError("per-stage budget " + std::to_string(schedule.per_stage) +
                      " cannot span the arms (rank " + std::to_string(min_stage) + ")");

  RunResult result;
  std::vector<ArmId> active(instance.num_arms());
  std::iota(active.begin(), active.end(), 0);
  for (int t = 0; t < schedule.stages; ++t) {
    long n = schedule.per_stage;
    if (config.spend_remainder_last_stage && t + 1 == schedule.stages)
      n += config.budget - schedule.per_stage * schedule.stages;
    run_stage(instance, active, n, schedule.sizes[static_cast<std::size_t>(t) + 1],
              config.strategy, config, rng, result);
    active = result.traces.back().survivors;
  }
  finish(instance, result);
  return result;
}

RunResult static_single_stage_run(const BanditInstance& instance, long budget, Rng& rng,
                                  const GseConfig& config) {
  if (budget < static_cast<long>(full_rank(instance, config.rank_tol)))
    throw ConfigError("budget cannot span the arms");
  GseConfig linear = config;
  linear.model = EstimatorModel::Linear;
  RunResult result;
  std::vector<ArmId> all(instance.num_arms());
  std::iota(all.begin(), all.end(), 0);
  run_stage(instance, all, budget, 1, AllocationStrategy::FwGOptimal, linear, rng, result);
  finish(instance, result);
  return result;
}

std::string to_json(const RunResult& result) {
  using nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j;
  j["recommended"] = result.recommended;
  j["total_pulls"] = result.total_pulls;
  if (result.success) j["success"] = *result.success;
  j["stages"] = json::array();
  for (const StageTrace& t : result.traces) {
    j["stages"].push_back({{"stage", t.stage},
                           {"active", t.active},
                           {"dim", t.dim},
                           {"allocation", t.allocation},
                           {"theta_hat", vec(t.theta_hat)},
                           {"estimates", vec(t.estimates)},
                           {"survivors", t.survivors},
                           {"estimator_converged", t.estimator_converged},
                           {"estimator_iterations", t.estimator_iterations},
                           {"fell_back_to_linear", t.fell_back_to_linear},
                           {"design_g", t.design_g},
                           {"design_certified", t.design_certified},
                           {"max_norm2", t.max_norm2},
                           {"max_diff_norm2", t.max_diff_norm2},
                           {"max_diff_norm2_all_arms", t.max_diff_norm2_all_arms}});
  }
  return j.dump();
}

}  // namespace fbbai
