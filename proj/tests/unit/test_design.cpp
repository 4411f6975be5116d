#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fbbai/design.hpp"
#include "fbbai/errors.hpp"
#include "fbbai/instances.hpp"
#include "oracles.hpp"

using namespace fbbai;

namespace {

Eigen::MatrixXd random_arms(Rng& rng, int K, int d) {
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd x(K, d);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = g(rng);
  return x;
}

Eigen::VectorXd random_simplex(Rng& rng, int m) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd pi(m);
  for (int i = 0; i < m; ++i) pi(i) = e(rng);
  return pi / pi.sum();
}

}  // namespace

TEST_CASE("g on the canonical basis with uniform weights is d") {
  for (int d : {1, 2, 5, 9}) {
    const GValue gv = g_value_and_argmax(Eigen::VectorXd::Constant(d, 1.0 / d),
                                         Eigen::MatrixXd::Identity(d, d));
    CHECK(gv.g == doctest::Approx(d).epsilon(1e-12));
    CHECK(gv.argmax == 0);
  }
}

TEST_CASE("g agrees with the explicit 2x2 inverse") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd x = random_arms(rng, 3, 2);
    const Eigen::VectorXd pi = random_simplex(rng, 3);
    CHECK(g_value_and_argmax(pi, x).g == doctest::Approx(oracle::g_2d(pi, x)).epsilon(1e-10));
  }
}

TEST_CASE("singular designs") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(g_value_and_argmax(Eigen::Vector2d(1, 0), x), SingularDesign);
  CHECK_FALSE(kw_certificate(Eigen::Vector2d(1, 0), x, 0.0));
  CHECK(kw_certificate(Eigen::Vector2d(0.5, 0.5), x, 0.0));
}

TEST_CASE("gradients on the canonical basis") {
  const int d = 4;
  const Eigen::VectorXd grad =
      g_gradient(Eigen::VectorXd::Constant(d, 1.0 / d), Eigen::MatrixXd::Identity(d, d));
  CHECK(grad(0) == doctest::Approx(-d * d));
  for (int j = 1; j < d; ++j) CHECK(grad(j) == 0.0);
  const Eigen::VectorXd dg =
      d_opt_gradient(Eigen::Vector2d(0.5, 0.5), Eigen::MatrixXd::Identity(2, 2));
  CHECK(dg(0) == doctest::Approx(-0.5));
  CHECK(dg(1) == doctest::Approx(-0.5));
}

TEST_CASE("g gradient is nonpositive and matches finite differences") {
  Rng rng(2);
  int checked = 0;
  for (int t = 0; t < 200 && checked < 40; ++t) {
    const int d = 2 + t % 4, K = d + 1 + t % 5;
    const Eigen::MatrixXd x = random_arms(rng, K, d);
    const Eigen::VectorXd pi = random_simplex(rng, K);
    const Eigen::VectorXd grad = g_gradient(pi, x);
    CHECK((grad.array() <= 0).all());
    const double h = 1e-6;
    // Stable argmax: the top two variances are well separated.
    const Eigen::MatrixXd vinv = (x.transpose() * pi.asDiagonal() * x).inverse();
    Eigen::VectorXd var = (x * vinv * x.transpose()).diagonal();
    std::sort(var.data(), var.data() + var.size(), std::greater<>());
    if (var(0) - var(1) < 1e-3 * var(0)) continue;
    ++checked;
    for (int j = 0; j < K; ++j) {
      Eigen::VectorXd up = pi, dn = pi;
      up(j) += h;
      dn(j) -= h;
      const double fd = (oracle::g_dense(up, x) - oracle::g_dense(dn, x)) / (2 * h);
      CHECK(std::abs(fd - grad(j)) <= 1e-5 * std::max(1.0, std::abs(grad(j))));
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("D gradient matches finite differences of -det V") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const int d = 2 + t % 3, K = d + 2;
    const Eigen::MatrixXd x = random_arms(rng, K, d);
    const Eigen::VectorXd pi = random_simplex(rng, K);
    const Eigen::VectorXd grad = d_opt_gradient(pi, x);
    for (int j = 0; j < K; ++j) {
      const double h = 1e-6;
      Eigen::VectorXd up = pi, dn = pi;
      up(j) += h;
      dn(j) -= h;
      const double fd = -(oracle::det_dense(up, x) - oracle::det_dense(dn, x)) / (2 * h);
      CHECK(std::abs(fd - grad(j)) <= 1e-5 * std::max(1.0, std::abs(grad(j))));
    }
  }
}

TEST_CASE("line search") {
  Rng rng(4);
  const Eigen::MatrixXd x = random_arms(rng, 3, 2);
  const Eigen::VectorXd pi = Eigen::VectorXd::Constant(3, 1.0 / 3);
  CHECK(line_search_g(pi, Eigen::VectorXd::Zero(3), x) == 0.0);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd arms = random_arms(rng, 3, 2);
    const Eigen::VectorXd p0 = random_simplex(rng, 3);
    Eigen::VectorXd vertex = Eigen::VectorXd::Zero(3);
    vertex(t % 3) = 1.0;
    const Eigen::VectorXd dir = vertex - p0;
    const double gamma = line_search_g(p0, dir, arms);
    auto g_at = [&](double s) {
      const Eigen::VectorXd p = p0 + s * dir;
      const double det = (arms.transpose() * p.asDiagonal() * arms).determinant();
      return det > 1e-14 ? oracle::g_2d(p, arms) : INFINITY;
    };
    CHECK(g_at(gamma) <= g_at(0.0) + 1e-12);
    CHECK(g_at(gamma) <= g_at(1.0) + 1e-12);
    double best = INFINITY;
    for (int k = 0; k <= 100000; ++k) best = std::min(best, g_at(k * 1e-5));
    CHECK(g_at(gamma) <= best + 1e-4 * std::max(1.0, best));
  }
}

TEST_CASE("Frank-Wolfe fixed point on the canonical basis") {
  for (int d : {2, 5, 10}) {
    const Design des = fw_g_optimal(Eigen::MatrixXd::Identity(d, d));
    CHECK(std::abs(des.g_value - d) < 1e-9);
    CHECK((des.weights.array() - 1.0 / d).abs().maxCoeff() < 1e-12);
    CHECK(des.certified);
    FwOptions opt;
    opt.criterion = DesignCriterion::D;
    CHECK((fw_g_optimal(Eigen::MatrixXd::Identity(d, d), opt).weights.array() - 1.0 / d)
              .abs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("Frank-Wolfe on three arms matches the simplex grid") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 0, 0, 1, std::sqrt(0.5), std::sqrt(0.5);
  FwOptions opt;
  opt.tol = 1e-6;
  opt.max_iterations = 20000;
  const Design des = fw_g_optimal(x, opt);
  CHECK(std::abs(des.g_value - oracle::grid_min_g_3arms(x, 1e-3)) < 1e-3);
}

TEST_CASE("Frank-Wolfe certifies the adaptive instance") {
  const BanditInstance inst = gen_adaptive_instance(2, 0.1, 10.0);
  const Design des = fw_g_optimal(inst.features());
  CHECK(des.certified);
  CHECK(des.g_value <= 2.02);
}

TEST_CASE("Frank-Wolfe certifies random instances, best-so-far g never increases") {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const int d = 2 + t % 9, K = d + 1 + (t * 7) % 40;
    const Eigen::MatrixXd x = random_arms(rng, K, d);
    std::vector<FwIterate> trace;
    FwOptions opt;
    opt.trace = &trace;
    const Design des = fw_g_optimal(x, opt);
    CHECK(des.certified);
    CHECK(des.g_value <= 1.01 * d);
    CHECK(des.g_value >= d - 1e-9);
    CHECK(std::abs(des.weights.sum() - 1.0) < 1e-12);
    CHECK((des.weights.array() >= 0).all());
    CHECK(kw_certificate(des.weights, x, 0.01));
    // Each step lowers g or is the exact det-maximizing step (which raises log det).
    for (std::size_t k = 1; k < trace.size(); ++k) {
      if (trace[k - 1].step == FwStep::GLineSearch) {
        CHECK(trace[k].g < trace[k - 1].g);
      } else {
        CHECK(trace[k].log_det > trace[k - 1].log_det);
      }
    }
  }
}

TEST_CASE("design is scale invariant") {
  Rng rng(6);
  const Eigen::MatrixXd x = random_arms(rng, 8, 3);
  const Design a = fw_g_optimal(x);
  const Design b = fw_g_optimal(x * 7.5);
  CHECK((a.weights - b.weights).norm() < 1e-9);
  CHECK(std::abs(a.g_value - b.g_value) < 1e-9);
}

TEST_CASE("rounding examples") {
  Eigen::MatrixXd x2 = Eigen::MatrixXd::Identity(2, 2);
  CHECK(round_allocation(4, Eigen::Vector2d(0.5, 0.5), x2).counts == std::vector<long>{2, 2});
  Eigen::MatrixXd x1(2, 1);
  x1 << 1, 2;
  CHECK(round_allocation(5, Eigen::Vector2d(1, 0), x1).counts == std::vector<long>{5, 0});
  CHECK_THROWS_AS(round_allocation(1, Eigen::Vector2d(0.5, 0.5), x2), BudgetTooSmall);
  CHECK_THROWS_AS(round_allocation(5, Eigen::Vector2d(1, 0), x2), InvalidAllocation);
}

TEST_CASE("rounding 1/3 each into 4 pulls gives a permutation of (2,1,1)") {
  // Enumerate every composition of 4 into 3 parts and keep those that satisfy
  // the apportionment fixed-point condition max_i (c_i - 1)/pi_i <= min_j c_j/pi_j.
  Eigen::Vector3d pi = Eigen::Vector3d::Constant(1.0 / 3);
  std::vector<std::vector<int>> all;
  std::vector<int> cur;
  oracle::compositions(4, 3, cur, all);
  std::vector<std::vector<long>> admissible;
  for (const auto& c : all) {
    double hi = -INFINITY, lo = INFINITY;
    for (int i = 0; i < 3; ++i) {
      if (c[i] < 1) hi = INFINITY;
      hi = std::max(hi, (c[i] - 1) / pi(i));
      lo = std::min(lo, c[i] / pi(i));
    }
    if (hi <= lo) admissible.push_back({c[0], c[1], c[2]});
  }
  CHECK(admissible.size() == 3);
  const Allocation a = round_allocation(4, pi, Eigen::MatrixXd::Identity(3, 3));
  CHECK(std::find(admissible.begin(), admissible.end(), a.counts) != admissible.end());
}

TEST_CASE("rounding properties on random designs") {
  Rng rng(7);
  for (int t = 0; t < 500; ++t) {
    const int m = 2 + t % 12;
    const Eigen::MatrixXd x = random_arms(rng, m, std::min(m, 3));
    const Eigen::VectorXd pi = random_simplex(rng, m);
    const long n = m + (t * 13) % 300;
    const Allocation a = round_allocation(n, pi, x);
    CHECK(a.total == n);
    CHECK(std::accumulate(a.counts.begin(), a.counts.end(), 0L) == n);
    // Efficient apportionment: no single pull can be moved to lower the
    // largest count-to-weight ratio, i.e. max (c_i - 1)/pi_i <= min c_j/pi_j.
    double hi = -INFINITY, lo = INFINITY;
    long start = 0;
    for (int i = 0; i < m; ++i) {
      CHECK(a.counts[i] >= 1);
      hi = std::max(hi, (a.counts[i] - 1) / pi(i));
      lo = std::min(lo, a.counts[i] / pi(i));
      start += static_cast<long>(std::ceil((n - 0.5 * m) * pi(i)));
    }
    CHECK(hi <= lo * (1 + 1e-12));
    // The adjustment loop runs at most p times.
    CHECK(std::abs(start - n) <= m);
  }
}

TEST_CASE("efficient apportionment can sit more than one pull away from n pi") {
  const Eigen::Vector3d pi = Eigen::Vector3d(2, 3, 12) / 17.0;
  const Allocation a = round_allocation(10, pi, Eigen::MatrixXd::Identity(3, 3));
  CHECK(a.counts == std::vector<long>{2, 2, 6});
  CHECK(std::abs(a.counts[2] - 10 * pi(2)) > 1.0);
}

TEST_CASE("rounding retry drops tiny weights") {
  Eigen::MatrixXd x(5, 3);
  x << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1, 1, -1, 0;
  Eigen::VectorXd pi(5);
  pi << 0.3, 0.3, 0.3, 0.05, 0.05;
  CHECK_THROWS_AS(round_allocation(4, pi, x), BudgetTooSmall);
  const Allocation a = round_allocation_with_retry(4, pi, x);
  CHECK(a.counts == std::vector<long>{2, 1, 1, 0, 0});
}

TEST_CASE("default iteration cap grows with d") {
  CHECK(default_fw_iterations(50, 10) > default_fw_iterations(50, 2));
  CHECK(default_fw_iterations(3, 2) >= 1);
}
