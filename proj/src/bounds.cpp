#include "fbbai/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fbbai/errors.hpp"

namespace fbbai {

namespace {

void validate(const BoundInputs& in) {
  if (in.K < 2) throw ConfigError("bound needs K >= 2");
  if (in.d < 1) throw ConfigError("bound needs d >= 1");
  if (!(in.eta > 1.0)) throw ConfigError("bound needs eta > 1");
  if (!(in.sigma2 >= 0.0)) throw ConfigError("sigma2 must be nonnegative");
  if (!(in.delta_min >= 0.0)) throw ConfigError("delta_min must be nonnegative");
  if (!(in.c_min > 0.0 && in.c_min <= 1.0)) throw ConfigError("c_min must lie in (0, 1]");
  if (in.B < 0) throw ConfigError("budget must be nonnegative");
}

// min(1, 2 eta log K exp(-num / den)), with num, den >= 0.
double clipped(const BoundInputs& in, double num, double den) {
  const double prefactor = 2.0 * in.eta * log_eta(static_cast<double>(in.K), in.eta);
  double exponent;
  if (num == 0.0) {
    exponent = 0.0;
  } else if (den == 0.0) {
    return 0.0;
  } else {
    exponent = -num / den;
  }
  return std::clamp(prefactor * std::exp(exponent), 0.0, 1.0);
}

void check_norm(double v) {
  if (std::isnan(v) || v < 0.0) throw ConfigError("weighted norm must be a nonnegative number");
}

}  // namespace

double log_eta(double K, double eta) { return std::log(K) / std::log(eta); }

double bound_linear_gopt(const BoundInputs& in) {
  validate(in);
  const double L = log_eta(static_cast<double>(in.K), in.eta);
  return clipped(in, static_cast<double>(in.B) * in.delta_min * in.delta_min,
                 4.0 * in.sigma2 * static_cast<double>(in.d) * L);
}

double bound_linear_general(const BoundInputs& in, double max_diff_norm2) {
  validate(in);
  check_norm(max_diff_norm2);
  if (std::isinf(max_diff_norm2)) return 1.0;
  return clipped(in, in.delta_min * in.delta_min, 4.0 * in.sigma2 * max_diff_norm2);
}

double bound_glm_gopt(const BoundInputs& in) {
  validate(in);
  const double L = log_eta(static_cast<double>(in.K), in.eta);
  const double c2 = in.c_min * in.c_min;
  return clipped(in, static_cast<double>(in.B) * in.delta_min * in.delta_min * c2,
                 8.0 * in.sigma2 * static_cast<double>(in.d) * L);
}

double bound_glm_general(const BoundInputs& in, double max_norm2) {
  validate(in);
  check_norm(max_norm2);
  if (std::isinf(max_norm2)) return 1.0;
  return clipped(in, in.delta_min * in.delta_min * in.c_min * in.c_min,
                 8.0 * in.sigma2 * max_norm2);
}

RealizedNorms realized_norms(const RunResult& result) {
  RealizedNorms out;
  for (const StageTrace& t : result.traces) {
    out.max_norm2 = std::max(out.max_norm2, t.max_norm2);
    if (!std::isnan(t.max_diff_norm2)) {
      out.max_diff_norm2 = std::max(out.max_diff_norm2, t.max_diff_norm2);
      out.max_diff_norm2_all_arms =
          std::max(out.max_diff_norm2_all_arms, t.max_diff_norm2_all_arms);
    }
  }
  return out;
}

namespace {

struct ProbeSet {
  Eigen::MatrixXd thetas;  // d x (probes + 1)
};

ProbeSet make_probes(const BanditInstance& instance, double radius, long probes,
                     std::uint64_t seed) {
  if (!(radius >= 0.0)) throw ConfigError("c_min radius must be nonnegative");
  if (probes < 0) throw ConfigError("probe count must be nonnegative");
  const auto d = static_cast<Eigen::Index>(instance.dim());
  ProbeSet ps;
  ps.thetas.resize(d, probes + 1);
  ps.thetas.col(0) = instance.theta_star();
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (long p = 1; p <= probes; ++p) {
    Eigen::VectorXd u(d);
    do {
      for (Eigen::Index j = 0; j < d; ++j) u(j) = gauss(rng);
    } while (!(u.norm() > 0));
    ps.thetas.col(p) = instance.theta_star() + radius * u / u.norm();
  }
  return ps;
}

double probe_min(const BanditInstance& instance, const Eigen::VectorXd& theta) {
  const MeanFunction& h = *instance.mean_fn();
  const Eigen::VectorXd z = instance.features() * theta;
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < z.size(); ++i) m = std::min(m, h.derivative(z(i)));
  return m;
}

}  // namespace

double oracle_c_min(const BanditInstance& instance, double radius, long probes,
                    std::uint64_t seed) {
  if (!instance.is_glm()) return 1.0;
  const ProbeSet ps = make_probes(instance, radius, probes, seed);
  const long n = ps.thetas.cols();
  double m = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : m) schedule(static)
  for (long p = 0; p < n; ++p) m = std::min(m, probe_min(instance, ps.thetas.col(p)));
  return std::min(m, 1.0);
}

double oracle_c_min_serial(const BanditInstance& instance, double radius, long probes,
                           std::uint64_t seed) {
  if (!instance.is_glm()) return 1.0;
  const ProbeSet ps = make_probes(instance, radius, probes, seed);
  double m = std::numeric_limits<double>::infinity();
  for (long p = 0; p < ps.thetas.cols(); ++p)
    m = std::min(m, probe_min(instance, ps.thetas.col(p)));
  return std::min(m, 1.0);
}

}  // namespace fbbai
