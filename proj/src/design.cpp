#include "fbbai/design.hpp"

#include <cmath>
#include <limits>

#include "fbbai/errors.hpp"

namespace fbbai {

namespace {

constexpr double kSingularRcond = 1e-13;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_design_inputs(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms) {
  if (arms.rows() < 1 || arms.cols() < 1) throw DegenerateInput("design over an empty arm set");
  if (weights.size() != arms.rows())
    throw DegenerateInput("design weight count does not match arm count");
}

// Factorization of V(pi) together with W = V^{-1} X^T and the per-arm
// variances a_i = x_i^T V^{-1} x_i.
struct DesignState {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd w;
  Eigen::VectorXd variances;
  Eigen::Index argmax = 0;
  double g = 0.0;
};

DesignState evaluate(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms) {
  DesignState s;
  s.llt.compute(information_matrix(weights, arms));
  if (s.llt.info() != Eigen::Success || !(s.llt.rcond() > kSingularRcond))
    throw SingularDesign("V(pi) is singular");
  s.w = s.llt.solve(arms.transpose());
  s.variances = (arms.array() * s.w.transpose().array()).rowwise().sum();
  s.g = -kInf;
  for (Eigen::Index i = 0; i < s.variances.size(); ++i)
    if (s.variances(i) > s.g) {
      s.g = s.variances(i);
      s.argmax = i;
    }
  return s;
}

Eigen::Index argmin_lowest(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) < v(best)) best = i;
  return best;
}

}  // namespace

Eigen::MatrixXd information_matrix(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms) {
  check_design_inputs(weights, arms);
  return arms.transpose() * weights.asDiagonal() * arms;
}

GValue g_value_and_argmax(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms) {
  const DesignState s = evaluate(weights, arms);
  return {s.g, s.argmax};
}

Eigen::VectorXd g_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms) {
  const DesignState s = evaluate(weights, arms);
  const Eigen::VectorXd cross = arms * s.w.col(s.argmax);
  return -cross.array().square().matrix();
}

Eigen::VectorXd d_opt_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms) {
  const DesignState s = evaluate(weights, arms);
  const double det = s.llt.matrixLLT().diagonal().prod();
  return -(det * det) * s.variances;
}

double line_search_g(const Eigen::VectorXd& pi, const Eigen::VectorXd& direction,
                     const Eigen::MatrixXd& arms) {
  check_design_inputs(pi, arms);
  if (direction.size() != pi.size()) throw DegenerateInput("direction has the wrong length");
  if (direction.lpNorm<Eigen::Infinity>() == 0.0) return 0.0;
  auto g_at = [&](double gamma) {
    try {
      return g_value_and_argmax(pi + gamma * direction, arms).g;
    } catch (const SingularDesign&) {
      return kInf;
    }
  };
  return minimize_on_unit_interval(g_at);
}

int default_fw_iterations(std::size_t num_arms, std::size_t dim) {
  const double kd = static_cast<double>(num_arms + dim) + 3.0;
  return static_cast<int>(
      std::ceil(kFwIterationConstant * static_cast<double>(dim) * std::log(std::log(kd))));
}

Design fw_g_optimal(const Eigen::MatrixXd& arms, const FwOptions& options) {
  const Eigen::Index m = arms.rows();
  const Eigen::Index d = arms.cols();
  if (m < 1 || d < 1) throw DegenerateInput("design over an empty arm set");
  const int cap = options.max_iterations > 0
                      ? options.max_iterations
                      : default_fw_iterations(static_cast<std::size_t>(m),
                                              static_cast<std::size_t>(d));
  const auto dd = static_cast<double>(d);
  const double target = dd * (1.0 + options.tol);
  if (options.trace) options.trace->clear();

  Eigen::VectorXd pi = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  Design best;
  best.dim = static_cast<std::size_t>(d);
  best.g_value = kInf;

  for (int it = 0;; ++it) {
    const DesignState s = evaluate(pi, arms);
    if (s.g < best.g_value) {
      best.weights = pi;
      best.g_value = s.g;
    }
    best.iterations_used = it;
    if (s.g <= target) {
      best.certified = true;
      break;
    }
    if (it >= cap) break;

    // Linear minimization oracle over the simplex: the vertex with the most
    // negative gradient coordinate.
    Eigen::Index vertex = s.argmax;
    if (options.criterion == DesignCriterion::G) {
      const Eigen::VectorXd cross = arms * s.w.col(s.argmax);
      vertex = argmin_lowest(-cross.array().square().matrix());
    }
    const Eigen::VectorXd b = arms * s.w.col(vertex);
    const double c = s.variances(vertex);

    // Along pi + gamma (e_v - pi), V(gamma) = (1 - gamma) V + gamma x_v x_v^T,
    // so every variance follows from a rank-one (Sherman-Morrison) update.
    auto g_along = [&](double gamma) {
      if (gamma >= 1.0) {
        if (d > 1) return kInf;
        return (arms.col(0).array().square() / (arms(vertex, 0) * arms(vertex, 0))).maxCoeff();
      }
      const double r = gamma / (1.0 - gamma);
      const double shrink = r / (1.0 + r * c);
      return ((s.variances.array() - shrink * b.array().square()) / (1.0 - gamma)).maxCoeff();
    };

    // argmax of det V(gamma) / det V = (1 - gamma)^(d-1) (1 - gamma + gamma c).
    const double gamma_d = c > dd ? (c / dd - 1.0) / (c - 1.0) : 0.0;
    double gamma = gamma_d;
    FwStep kind = FwStep::DExact;
    if (options.criterion == DesignCriterion::G) {
      const double gamma_g = minimize_on_unit_interval(g_along);
      if (gamma_g >= gamma_d && g_along(gamma_g) < s.g) {
        gamma = gamma_g;
        kind = FwStep::GLineSearch;
      }
    }
    if (!(gamma > 0.0)) break;
    if (options.trace) {
      const double log_det = 2.0 * s.llt.matrixLLT().diagonal().array().log().sum();
      options.trace->push_back({s.g, log_det, gamma, kind});
    }
    pi *= (1.0 - gamma);
    pi(vertex) += gamma;
  }
  return best;
}

bool kw_certificate(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms, double eps) {
  if ((weights.array() < 0).any()) return false;
  try {
    return g_value_and_argmax(weights, arms).g <= static_cast<double>(arms.cols()) * (1.0 + eps);
  } catch (const SingularDesign&) {
    return false;
  }
}

Allocation round_allocation(long n, const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms) {
  check_design_inputs(weights, arms);
  const Eigen::Index m = weights.size();
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < m; ++i)
    if (weights(i) > kSupportThreshold) support.push_back(i);
  const long p = static_cast<long>(support.size());
  if (p == 0) throw DegenerateInput("design has empty support");
  if (n < p)
    throw BudgetTooSmall("budget " + std::to_string(n) + " is below the design support size " +
                         std::to_string(p));

  Eigen::MatrixXd rows(p, arms.cols());
  for (long k = 0; k < p; ++k) rows.row(k) = arms.row(support[static_cast<std::size_t>(k)]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(rows);
  qr.setThreshold(1e-10);
  if (qr.rank() < arms.cols()) throw InvalidAllocation("design support does not span R^d_t");

  Allocation out;
  out.counts.assign(static_cast<std::size_t>(m), 0);
  long sum = 0;
  const double scale = static_cast<double>(n) - 0.5 * static_cast<double>(p);
  for (Eigen::Index i : support) {
    const long c = std::max(1L, static_cast<long>(std::ceil(scale * weights(i))));
    out.counts[static_cast<std::size_t>(i)] = c;
    sum += c;
  }
  auto ratio = [&](Eigen::Index i) {
    return static_cast<double>(out.counts[static_cast<std::size_t>(i)]) / weights(i);
  };
  // Removing a pull from arm i leaves the ratio (c_i - 1)/pi_i; take it from
  // the arm where that is largest.
  auto reduced = [&](Eigen::Index i) {
    return static_cast<double>(out.counts[static_cast<std::size_t>(i)] - 1) / weights(i);
  };
  while (sum > n) {
    Eigen::Index pick = -1;
    for (Eigen::Index i : support)
      if (out.counts[static_cast<std::size_t>(i)] > 1 && (pick < 0 || reduced(i) > reduced(pick)))
        pick = i;
    --out.counts[static_cast<std::size_t>(pick)];
    --sum;
  }
  while (sum < n) {
    Eigen::Index pick = support.front();
    for (Eigen::Index i : support)
      if (ratio(i) < ratio(pick)) pick = i;
    ++out.counts[static_cast<std::size_t>(pick)];
    ++sum;
  }
  out.total = sum;
  return out;
}

Allocation round_allocation_with_retry(long n, const Eigen::VectorXd& weights,
                                       const Eigen::MatrixXd& arms) {
  try {
    return round_allocation(n, weights, arms);
  } catch (const BudgetTooSmall&) {
    Eigen::VectorXd trimmed = weights;
    const double floor = 1.0 / static_cast<double>(std::max(n, 1L));
    for (Eigen::Index i = 0; i < trimmed.size(); ++i)
      if (trimmed(i) < floor) trimmed(i) = 0.0;
    if (!(trimmed.sum() > 0)) throw;
    trimmed /= trimmed.sum();
    return round_allocation(n, trimmed, arms);
  }
}

}  // namespace fbbai
