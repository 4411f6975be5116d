#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "fbbai/errors.hpp"
#include "fbbai/gse.hpp"
#include "fbbai/harness.hpp"
#include "fbbai/instances.hpp"

using namespace fbbai;

TEST_CASE("stage schedule examples") {
  StageSchedule s = stage_schedule(8, 2.0, 300);
  CHECK(s.stages == 3);
  CHECK(s.per_stage == 100);
  CHECK(s.sizes == std::vector<std::size_t>{8, 4, 2, 1});
  s = stage_schedule(5, 2.0, 90);
  CHECK(s.stages == 3);
  CHECK(s.per_stage == 30);
  CHECK(s.sizes == std::vector<std::size_t>{5, 3, 2, 1});
  s = stage_schedule(16, 2.0, 320);
  CHECK(s.stages == 4);
  CHECK(s.per_stage == 80);
  CHECK(stage_schedule(2, 2.0, 10).stages == 1);
  CHECK(stage_schedule(10, 10.0, 10).stages == 1);
  CHECK_THROWS_AS(stage_schedule(8, 2.0, 2), ConfigError);
  CHECK_THROWS_AS(stage_schedule(8, 1.0, 100), ConfigError);
  CHECK_THROWS_AS(stage_schedule(1, 2.0, 100), ConfigError);
}

TEST_CASE("stage schedule for real eta matches ceil(log_eta K) and ends at one arm") {
  for (double eta : {1.5, 2.5, 3.7}) {
    for (std::size_t K = 2; K < 200; K += 7) {
      const StageSchedule s = stage_schedule(K, eta, 10000);
      CHECK(s.stages == static_cast<int>(std::ceil(std::log(double(K)) / std::log(eta) - 1e-12)));
      CHECK(s.sizes.front() == K);
      CHECK(s.sizes.back() == 1);
      for (std::size_t t = 1; t < s.sizes.size(); ++t) CHECK(s.sizes[t] <= s.sizes[t - 1]);
    }
  }
}

TEST_CASE("elimination keeps the top ceil(m / eta) with ties to lower ids") {
  CHECK(eliminate({0, 1, 2, 3}, Eigen::Vector4d(3, 1, 2, 0), 2.0) == std::vector<ArmId>{0, 2});
  CHECK(eliminate({4, 7, 9, 11, 12}, Eigen::VectorXd::Zero(5), 2.0) ==
        std::vector<ArmId>{4, 7, 9});
  CHECK(eliminate({0, 1, 2}, Eigen::Vector3d(0, 1, 2), 2.0).size() == 2);
  CHECK_THROWS_AS(eliminate({0, 1}, Eigen::Vector2d(NAN, 1), 2.0), DegenerateInput);
}

TEST_CASE("uniform exploration and bookkeeping") {
  const BanditInstance inst = gen_static_instance(1.0, 4, 1.0);
  const ProjectedArmSet proj = project_arms(inst, {0, 1, 2, 3});
  Rng rng(1);
  Exploration ex = explore(inst, proj, 8, AllocationStrategy::Uniform, rng);
  CHECK(ex.allocation.counts == std::vector<long>{2, 2, 2, 2});
  ex = explore(inst, proj, 10, AllocationStrategy::Uniform, rng);
  CHECK(ex.allocation.counts == std::vector<long>{3, 3, 2, 2});
  const RegressionData stacked = ex.stacked();
  CHECK(stacked.xs.rows() == 10);
  // Rows of X_t form the multiset given by the counts.
  std::map<Eigen::Index, long> seen;
  for (Eigen::Index r = 0; r < stacked.xs.rows(); ++r)
    for (Eigen::Index i = 0; i < proj.projected_features.rows(); ++i)
      if ((stacked.xs.row(r) - proj.projected_features.row(i)).norm() < 1e-12) ++seen[i];
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(seen[i] == ex.allocation.counts[i]);
  CHECK(std::abs(ex.data.y_sums.sum() - stacked.ys.sum()) < 1e-9);
}

TEST_CASE("G-optimal exploration on the canonical basis with n = d pulls each arm once") {
  const BanditInstance inst = gen_static_instance(1.0, 6, 1.0);
  std::vector<ArmId> ids(6);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(2);
  const Exploration ex =
      explore(inst, project_arms(inst, ids), 6, AllocationStrategy::FwGOptimal, rng);
  CHECK(ex.allocation.counts == std::vector<long>(6, 1));
  CHECK(ex.design_certified);
}

TEST_CASE("forced exploration adds one pull on spanning arms") {
  const BanditInstance inst = gen_adaptive_instance(3, 0.1, 1.0);
  std::vector<ArmId> ids{0, 1, 2, 3};
  GseConfig cfg;
  cfg.forced_exploration = true;
  Rng rng(3);
  const Exploration ex =
      explore(inst, project_arms(inst, ids), 20, AllocationStrategy::Uniform, rng, cfg);
  CHECK(ex.allocation.total == 20);
  long positive = 0;
  for (long c : ex.allocation.counts) positive += c > 0;
  CHECK(positive >= 3);
}

TEST_CASE("noiseless runs always succeed") {
  Rng gen(4);
  for (const std::string& variant : variant_names()) {
    for (int t = 0; t < 5; ++t) {
      const BanditInstance inst =
          gen_sphere_instance(12, 4, gen).with_noise(NoiseKind::MeanOnly, 0.0);
      Rng rng(t);
      if (variant.rfind("gse-log", 0) != 0)
        CHECK(*gse_run(inst, variant_config(variant, 200), rng).success);
      // Logistic means are only ranked correctly by the logistic model.
      const BanditInstance logi =
          gen_logistic_instance(8, 3, gen).with_noise(NoiseKind::MeanOnly, 0.0);
      if (variant.rfind("gse-log", 0) == 0)
        CHECK(*gse_run(logi, variant_config(variant, 200), rng).success);
    }
  }
}

TEST_CASE("trace invariants: cardinalities, nesting, budget accounting") {
  Rng gen(5);
  for (int t = 0; t < 20; ++t) {
    const int K = 3 + t * 3;
    const BanditInstance inst = gen_sphere_instance(K, 5, gen);
    for (double eta : {2.0, 3.0, 2.5}) {
      GseConfig cfg;
      cfg.budget = 40 * K + t;
      cfg.eta = eta;
      cfg.strategy = t % 2 ? AllocationStrategy::Uniform : AllocationStrategy::FwGOptimal;
      Rng rng(t);
      const RunResult r = gse_run(inst, cfg, rng);
      const StageSchedule s = stage_schedule(inst.num_arms(), eta, cfg.budget);
      REQUIRE(r.traces.size() == static_cast<std::size_t>(s.stages));
      CHECK(r.total_pulls == s.stages * s.per_stage);
      CHECK(r.total_pulls <= cfg.budget);
      for (const StageTrace& st : r.traces) {
        CHECK(std::accumulate(st.allocation.begin(), st.allocation.end(), 0L) == s.per_stage);
        CHECK(st.survivors.size() == s.sizes[st.stage]);
        for (ArmId a : st.survivors)
          CHECK(std::find(st.active.begin(), st.active.end(), a) != st.active.end());
        CHECK(std::is_sorted(st.survivors.begin(), st.survivors.end()));
        // Survivors are the top arms by estimate.
        const auto keep = st.survivors.size();
        CHECK(keep_top(st.active, st.estimates, keep) == st.survivors);
      }
      CHECK(r.traces.back().survivors.size() == 1);
      CHECK(r.recommended == r.traces.back().survivors.front());
    }
  }
}

TEST_CASE("runs are byte-for-byte deterministic") {
  Rng gen(6);
  const BanditInstance inst = gen_logistic_instance(8, 5, gen);
  for (const std::string& variant : variant_names()) {
    Rng a(77), b(77);
    const GseConfig cfg = variant_config(variant, 400);
    CHECK(to_json(gse_run(inst, cfg, a)) == to_json(gse_run(inst, cfg, b)));
  }
}

TEST_CASE("budget below the span is a configuration error") {
  const BanditInstance inst = gen_static_instance(1.0, 16, 1.0);
  GseConfig cfg;
  cfg.budget = 40;  // 4 stages of 10 pulls, rank 16
  Rng rng(1);
  CHECK_THROWS_AS(gse_run(inst, cfg, rng), ConfigError);
}

TEST_CASE("two arms: one stage, static baseline coincides") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 0.6, 0.8;
  const BanditInstance inst =
      BanditInstance::create(x, Eigen::Vector2d(1, 0), std::nullopt, NoiseKind::Gaussian, 1.0);
  Rng a(9), b(9);
  GseConfig cfg;
  cfg.budget = 30;
  const RunResult g = gse_run(inst, cfg, a);
  const RunResult s = static_single_stage_run(inst, 30, b);
  CHECK(g.traces.size() == 1);
  CHECK(to_json(g) == to_json(s));
}

TEST_CASE("remainder is discarded unless requested") {
  const BanditInstance inst = gen_static_instance(1.0, 8, 1.0);
  GseConfig cfg;
  cfg.budget = 100;
  Rng rng(1);
  CHECK(gse_run(inst, cfg, rng).total_pulls == 99);
  cfg.spend_remainder_last_stage = true;
  CHECK(gse_run(inst, cfg, rng).total_pulls == 100);
}

TEST_CASE("norm terms in the trace") {
  const BanditInstance inst = gen_static_instance(1.0, 4, 1.0);
  GseConfig cfg;
  cfg.budget = 80;
  cfg.strategy = AllocationStrategy::Uniform;
  Rng rng(3);
  const RunResult r = gse_run(inst, cfg, rng);
  // Stage 1: 40 pulls, 10 per basis arm -> ||e_i||^2 = 1/10, ||e_i - e_1||^2 = 2/10.
  CHECK(r.traces[0].max_norm2 == doctest::Approx(0.1));
  CHECK(r.traces[0].max_diff_norm2 == doctest::Approx(0.2));
  CHECK(r.traces[0].max_diff_norm2_all_arms == doctest::Approx(0.2));
  // Later stages lose directions of eliminated arms.
  if (std::find(r.traces[1].active.begin(), r.traces[1].active.end(), 0) !=
      r.traces[1].active.end())
    CHECK(std::isinf(r.traces[1].max_diff_norm2_all_arms));
}

TEST_CASE("GLM estimator falls back or converges on every stage") {
  Rng gen(8);
  for (int t = 0; t < 20; ++t) {
    const BanditInstance inst = gen_logistic_instance(8, 10, gen);
    Rng rng(t);
    const RunResult r = gse_run(inst, variant_config("gse-log-fwg", 200), rng);
    for (const StageTrace& st : r.traces) CHECK(st.theta_hat.allFinite());
  }
}

TEST_CASE("more budget does not hurt (within Monte-Carlo error)") {
  McTask task;
  task.family.family = Family::Static;
  task.family.K = 8;
  task.family.delta = 1.0;
  task.family.sigma2 = 10.0;
  task.variant = "gse-fwg";
  task.replications = 1000;
  task.seed = 4;
  task.budget = 80;
  const McResult lo = mc_accuracy(task);
  task.budget = 160;
  const McResult hi = mc_accuracy(task);
  CHECK(hi.accuracy >= lo.accuracy - 2 * std::sqrt(lo.stderr_ * lo.stderr_ + hi.stderr_ * hi.stderr_));
}

TEST_CASE("static instance at the reference configuration beats its bound") {
  McTask task;
  task.family.family = Family::Static;
  task.family.K = 16;
  task.family.delta = 2.0;
  task.family.sigma2 = 10.0;
  task.variant = "gse-fwg";
  task.budget = 320;
  task.replications = 1000;
  task.seed = 5;
  const McResult r = mc_accuracy(task);
  if (r.bound_delta < 1) CHECK(r.accuracy > 1 - r.bound_delta);
  CHECK(r.aborts == 0);
}
