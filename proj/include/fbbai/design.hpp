#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace fbbai {

// Probability vector over the active arms. All quantities use the unit-budget
// convention V(pi) = sum_i pi_i x_i x_i^T, so the optimal g equals d_t.
struct Design {
  Eigen::VectorXd weights;
  double g_value = 0.0;
  int iterations_used = 0;
  std::size_t dim = 0;     // d_t
  bool certified = false;  // g_value <= dim * (1 + tol)
};

// Integer pull counts per active arm.
struct Allocation {
  std::vector<long> counts;
  long total = 0;
};

enum class DesignCriterion { G, D };

struct GValue {
  double g;
  Eigen::Index argmax;  // lowest index on ties
};

Eigen::MatrixXd information_matrix(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms);

// max_i x_i^T V(pi)^{-1} x_i. Throws SingularDesign if V(pi) is singular.
GValue g_value_and_argmax(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms);

// Danskin gradient: component j is -(x_j^T V^{-1} x_max)^2.
Eigen::VectorXd g_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms);

// Gradient of -det V(pi): component i is -det(V) x_i^T V^{-1} x_i.
Eigen::VectorXd d_opt_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms);

// Minimizes f on [0, 1]: a 200-interval bracketing scan followed by golden
// section on the best bracket, to absolute tolerance `tol`. Ties favour the
// smaller argument.
template <typename F>
double minimize_on_unit_interval(F&& f, double tol = 1e-6);

// argmin_{gamma in [0,1]} g(pi + gamma * direction); 0 when direction == 0.
// Points where V is singular count as +infinity.
double line_search_g(const Eigen::VectorXd& pi, const Eigen::VectorXd& direction,
                     const Eigen::MatrixXd& arms);

enum class FwStep {
  GLineSearch,  // step minimizing g along the FW direction
  DExact,       // exact maximizer of det V along the FW direction
};

struct FwIterate {
  double g;
  double log_det;
  double gamma;
  FwStep step;
};

struct FwOptions {
  int max_iterations = 0;  // 0: default cap ceil(100 d log log(K + d + 3))
  double tol = 0.01;
  DesignCriterion criterion = DesignCriterion::G;
  std::vector<FwIterate>* trace = nullptr;  // optional per-iteration record
};

inline constexpr double kFwIterationConstant = 100.0;

int default_fw_iterations(std::size_t num_arms, std::size_t dim);

// Frank-Wolfe over the simplex from the uniform design. Each iteration moves
// toward the vertex minimizing the linearized objective. For the G criterion
// the step is the larger of the g line-search step and the exact D-optimal
// step along the same direction: a pure g line search stalls on the kinks of
// the max, while the D step always makes progress toward the common
// Kiefer-Wolfowitz optimum. The D criterion uses the exact D step only.
//
// Stops as soon as g <= d_t (1 + tol) holds; otherwise returns the best
// iterate with certified = false. `arms` must span R^{d_t}, d_t = cols.
Design fw_g_optimal(const Eigen::MatrixXd& arms, const FwOptions& options = {});

// True iff V(pi) is invertible and g(pi) <= d_t (1 + eps).
bool kw_certificate(const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms, double eps);

inline constexpr double kSupportThreshold = 1e-9;

// Efficient apportionment of n pulls to the support of the design. Throws
// BudgetTooSmall if n is below the support size and InvalidAllocation if the
// support does not span R^{d_t}.
Allocation round_allocation(long n, const Eigen::VectorXd& weights, const Eigen::MatrixXd& arms);

// round_allocation, retrying once on BudgetTooSmall after dropping weights
// below 1/n and renormalizing.
Allocation round_allocation_with_retry(long n, const Eigen::VectorXd& weights,
                                       const Eigen::MatrixXd& arms);

// ---- implementation -------------------------------------------------------

template <typename F>
double minimize_on_unit_interval(F&& f, double tol) {
  constexpr int kScan = 200;
  int best_k = 0;
  double best = f(0.0);
  for (int k = 1; k <= kScan; ++k) {
    const double v = f(static_cast<double>(k) / kScan);
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  double lo = static_cast<double>(std::max(best_k - 1, 0)) / kScan;
  double hi = static_cast<double>(std::min(best_k + 1, kScan)) / kScan;
  constexpr double kInvPhi = 0.6180339887498949;
  double a = hi - kInvPhi * (hi - lo);
  double b = lo + kInvPhi * (hi - lo);
  double fa = f(a), fb = f(b);
  while (hi - lo > tol) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - kInvPhi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + kInvPhi * (hi - lo);
      fb = f(b);
    }
  }
  const double mid = 0.5 * (lo + hi);
  const double fmid = f(mid);
  double arg = static_cast<double>(best_k) / kScan;
  if (fmid < best) {
    best = fmid;
    arg = mid;
  }
  if (fa < best) {
    best = fa;
    arg = a;
  }
  if (fb < best) arg = b;
  return arg;
}

}  // namespace fbbai
