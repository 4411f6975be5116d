#include "fbbai/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>

#include <omp.h>

#include <json.hpp>

#include "fbbai/bounds.hpp"
#include "fbbai/errors.hpp"

namespace fbbai {

std::string family_name(Family f) {
  switch (f) {
    case Family::Adaptive: return "adaptive";
    case Family::Static: return "static";
    case Family::Sphere: return "sphere";
    case Family::Logistic: return "logistic";
    case Family::Corner: return "corner";
    case Family::Csv: return "csv";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::Adaptive, Family::Static, Family::Sphere, Family::Logistic,
                   Family::Corner, Family::Csv})
    if (family_name(f) == name) return f;
  throw ConfigError("unknown instance family '" + name + "'");
}

bool is_randomized(const FamilyParams& p) {
  return p.family == Family::Sphere || p.family == Family::Logistic ||
         p.family == Family::Corner;
}

BanditInstance make_instance(const FamilyParams& p, Rng& rng) {
  std::optional<BanditInstance> inst;
  switch (p.family) {
    case Family::Adaptive:
      inst = gen_adaptive_instance(p.d, p.omega, p.sigma2.value_or(10.0));
      break;
    case Family::Static:
      inst = gen_static_instance(p.delta, p.K, p.sigma2.value_or(10.0));
      break;
    case Family::Sphere:
      inst = gen_sphere_instance(p.K, p.d, rng, p.sigma2.value_or(10.0));
      break;
    case Family::Logistic:
      inst = gen_logistic_instance(p.K, p.d, rng);
      break;
    case Family::Corner:
      inst = gen_corner_instance(p.K, rng, p.sigma2.value_or(1.0));
      break;
    case Family::Csv:
      if (!p.fixed) throw ConfigError("csv family needs an arms file and a theta file");
      inst = p.fixed;
      if (p.sigma2) inst = inst->with_noise(inst->noise(), *p.sigma2);
      break;
  }
  if (p.noiseless) inst = inst->with_noise(NoiseKind::MeanOnly, 0.0);
  return *inst;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"gse-uniform",     "gse-fwg",     "gse-fwd",
                                                 "gse-log-uniform", "gse-log-fwg", "static-fwg"};
  return names;
}

GseConfig variant_config(const std::string& variant, long budget, double eta) {
  GseConfig c;
  c.budget = budget;
  c.eta = eta;
  if (variant == "gse-uniform") {
    c.strategy = AllocationStrategy::Uniform;
  } else if (variant == "gse-fwg") {
    c.strategy = AllocationStrategy::FwGOptimal;
  } else if (variant == "gse-fwd") {
    c.strategy = AllocationStrategy::FwDOptimal;
  } else if (variant == "gse-log-uniform") {
    c.strategy = AllocationStrategy::Uniform;
    c.model = EstimatorModel::Glm;
  } else if (variant == "gse-log-fwg") {
    c.strategy = AllocationStrategy::FwGOptimal;
    c.model = EstimatorModel::Glm;
  } else if (variant == "static-fwg") {
    c.strategy = AllocationStrategy::StaticSingleStage;
  } else {
    throw ConfigError("unknown variant '" + variant + "'");
  }
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ splitmix64(value));
}

// FNV-1a
std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t reward_stream_seed(std::uint64_t master, const std::string& family,
                                 const std::string& variant, std::uint64_t grid_point,
                                 std::uint64_t r) {
  std::uint64_t h = hash_combine(splitmix64(master), hash_string(family));
  h = hash_combine(h, hash_string(variant));
  h = hash_combine(h, grid_point);
  return hash_combine(h, r);
}

std::uint64_t instance_stream_seed(std::uint64_t master, const std::string& family,
                                   std::uint64_t grid_point, std::uint64_t r) {
  std::uint64_t h = hash_combine(splitmix64(master), hash_string(family));
  h = hash_combine(h, hash_string("instance"));
  h = hash_combine(h, grid_point);
  return hash_combine(h, r);
}

int default_workers() {
  if (const char* env = std::getenv("FBBAI_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError(std::string("FBBAI_WORKERS must be a positive integer, got '") + env +
                        "'");
    return static_cast<int>(v);
  }
  return omp_get_max_threads();
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Outcome { Success, Failure, Abort, ConfigFailure };

struct Replication {
  Outcome outcome = Outcome::Failure;
  double bound = kNaN;
  std::exception_ptr error;
};

bool bound_applies(const McTask& task, const BanditInstance& inst, const GseConfig& config) {
  if (!task.compute_bound) return false;
  if (config.strategy != AllocationStrategy::FwGOptimal &&
      config.strategy != AllocationStrategy::FwDOptimal)
    return false;
  return inst.is_glm() == (config.model == EstimatorModel::Glm);
}

double gopt_bound(const McTask& task, const BanditInstance& inst, long probes) {
  BoundInputs in;
  in.B = task.budget;
  in.K = inst.num_arms();
  in.d = inst.dim();
  in.eta = task.eta;
  in.sigma2 = inst.subgaussian_sigma2();
  in.delta_min = inst.min_gap();
  if (!inst.is_glm()) return bound_linear_gopt(in);
  in.c_min = oracle_c_min_serial(inst, kDefaultCminRadius, probes);
  return bound_glm_gopt(in);
}

struct Prepared {
  GseConfig config;
  std::string family;
  std::optional<BanditInstance> fixed;
  double fixed_bound = kNaN;
};

Prepared prepare(const McTask& task) {
  if (task.replications < 1) throw ConfigError("replications must be >= 1");
  Prepared p;
  p.config = variant_config(task.variant, task.budget, task.eta);
  if (task.tweak) task.tweak(p.config);
  p.family = family_name(task.family.family);
  if (!is_randomized(task.family)) {
    Rng unused(0);
    p.fixed = make_instance(task.family, unused);
    if (bound_applies(task, *p.fixed, p.config))
      p.fixed_bound = gopt_bound(task, *p.fixed, task.c_min_probes);
  }
  return p;
}

Replication replicate(const McTask& task, const Prepared& p, long r) {
  Replication rep;
  try {
    std::optional<BanditInstance> drawn;
    if (!p.fixed) {
      Rng irng(instance_stream_seed(task.seed, p.family, task.grid_point,
                                    static_cast<std::uint64_t>(r)));
      drawn = make_instance(task.family, irng);
    }
    const BanditInstance& inst = p.fixed ? *p.fixed : *drawn;
    if (p.fixed) {
      rep.bound = p.fixed_bound;
    } else if (bound_applies(task, inst, p.config)) {
      rep.bound = gopt_bound(task, inst, task.c_min_probes);
    }
    Rng rng(reward_stream_seed(task.seed, p.family, task.variant, task.grid_point,
                               static_cast<std::uint64_t>(r)));
    const RunResult result = gse_run(inst, p.config, rng);
    rep.outcome = *result.success ? Outcome::Success : Outcome::Failure;
  } catch (const ConfigError&) {
    rep.outcome = Outcome::ConfigFailure;
    rep.error = std::current_exception();
  } catch (const Error&) {
    rep.outcome = Outcome::Abort;
  }
  return rep;
}

McResult reduce(const std::vector<Replication>& reps) {
  McResult out;
  out.replications = static_cast<long>(reps.size());
  double bound_sum = 0.0;
  for (const Replication& rep : reps) {
    if (rep.outcome == Outcome::ConfigFailure) std::rethrow_exception(rep.error);
    if (rep.outcome == Outcome::Success) ++out.successes;
    if (rep.outcome == Outcome::Abort) ++out.aborts;
    bound_sum += rep.bound;
  }
  const double R = static_cast<double>(out.replications);
  out.accuracy = static_cast<double>(out.successes) / R;
  out.stderr_ = std::sqrt(out.accuracy * (1.0 - out.accuracy) / R);
  out.bound_delta = bound_sum / R;
  return out;
}

}  // namespace

McResult mc_accuracy(const McTask& task, int workers) {
  const Prepared p = prepare(task);
  if (workers <= 0) workers = default_workers();
  std::vector<Replication> reps(static_cast<std::size_t>(task.replications));
  const long R = task.replications;
#pragma omp parallel for schedule(dynamic, 4) num_threads(workers)
  for (long r = 0; r < R; ++r) reps[static_cast<std::size_t>(r)] = replicate(task, p, r);
  return reduce(reps);
}

McResult mc_accuracy_serial(const McTask& task) {
  const Prepared p = prepare(task);
  std::vector<Replication> reps;
  reps.reserve(static_cast<std::size_t>(task.replications));
  for (long r = 0; r < task.replications; ++r) reps.push_back(replicate(task, p, r));
  return reduce(reps);
}

// ---- sweeps ----------------------------------------------------------------

namespace {

int arm_count(const FamilyParams& f) {
  switch (f.family) {
    case Family::Adaptive: return f.d + 1;
    case Family::Csv: return f.fixed ? static_cast<int>(f.fixed->num_arms()) : 0;
    default: return f.K;
  }
}

int as_int(const std::string& name, double v) {
  if (v != std::floor(v)) throw ConfigError(name + " grid values must be integers");
  return static_cast<int>(v);
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config) {
  if (config.variants.empty()) throw ConfigError("no variants given");
  if (config.replications < 1) throw ConfigError("replications must be >= 1");
  std::vector<double> grid = config.grid;
  std::string param = config.param_name;
  if (grid.empty()) {
    // A single point at the configured budget.
    param = "B";
    grid = {static_cast<double>(config.budget_per_arm > 0
                                    ? config.budget_per_arm * arm_count(config.family)
                                    : config.budget)};
  }
  for (const std::string& v : config.variants) variant_config(v, 1);

  SweepResult out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double v = grid[g];
    FamilyParams fam = config.family;
    long budget = config.budget;
    long per_arm = config.budget_per_arm;
    if (param == "B") {
      budget = as_int(param, v);
      per_arm = 0;
    } else if (param == "B_per_K") {
      per_arm = as_int(param, v);
    } else if (param == "K") {
      fam.K = as_int(param, v);
      if (fam.family == Family::Adaptive) fam.d = fam.K - 1;
    } else if (param == "d") {
      fam.d = as_int(param, v);
    } else if (param == "delta") {
      fam.delta = v;
    } else if (param == "omega") {
      fam.omega = v;
    } else if (param == "sigma2") {
      fam.sigma2 = v;
    } else {
      throw ConfigError("unknown sweep parameter '" + param + "'");
    }
    if (per_arm > 0) budget = per_arm * arm_count(fam);

    for (const std::string& variant : config.variants) {
      McTask task;
      task.family = fam;
      task.variant = variant;
      task.budget = budget;
      task.eta = config.eta;
      task.replications = config.replications;
      task.seed = config.seed;
      task.grid_point = g;
      const auto t0 = std::chrono::steady_clock::now();
      SweepRow row;
      row.family = family_name(fam.family);
      row.variant = variant;
      row.param_name = param;
      row.param_value = v;
      row.mc = config.serial ? mc_accuracy_serial(task) : mc_accuracy(task, config.workers);
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"adaptive", "static", "sphere", "logistic",
                                                 "corner"};
  return names;
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.replications = 1000;
  c.eta = 2.0;
  if (name == "adaptive") {
    c.family.family = Family::Adaptive;
    c.family.omega = 0.1;
    c.family.sigma2 = 10.0;
    c.variants = {"gse-uniform", "gse-fwg", "gse-fwd"};
    c.param_name = "K";
    c.grid = {4, 8, 16, 32};
    c.budget_per_arm = 30;
  } else if (name == "static") {
    c.family.family = Family::Static;
    c.family.K = 16;
    c.family.sigma2 = 10.0;
    c.variants = {"gse-uniform", "gse-fwg", "static-fwg"};
    c.param_name = "delta";
    c.grid = {0.25, 0.5, 1, 2, 4, 8};
    c.budget = 320;
  } else if (name == "sphere") {
    c.family.family = Family::Sphere;
    c.family.d = 10;
    c.family.sigma2 = 10.0;
    c.variants = {"gse-uniform", "gse-fwg"};
    c.param_name = "K";
    c.grid = {8, 16, 32, 64};
    c.budget_per_arm = 20;
  } else if (name == "logistic") {
    c.family.family = Family::Logistic;
    c.family.K = 8;
    c.family.d = 10;
    c.variants = {"gse-log-fwg", "gse-fwg"};
    c.param_name = "B_per_K";
    c.grid = {25, 50, 100, 200};
  } else if (name == "corner") {
    c.family.family = Family::Corner;
    c.family.K = 16;
    c.family.sigma2 = 1.0;
    c.variants = {"gse-fwg", "static-fwg"};
    c.param_name = "B";
    c.grid = {80, 160, 320, 640};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

SweepResult run_preset(const std::string& name) { return run_sweep(preset_config(name)); }

// ---- output ----------------------------------------------------------------

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& os, const SweepResult& result, bool wall_time) {
  os << "family,variant,param_name,param_value,R,successes,accuracy,stderr,bound_delta,aborts";
  if (wall_time) os << ",wall_seconds";
  os << '\n';
  for (const SweepRow& r : result.rows) {
    os << r.family << ',' << r.variant << ',' << r.param_name << ',' << num(r.param_value) << ','
       << r.mc.replications << ',' << r.mc.successes << ',' << num(r.mc.accuracy) << ','
       << num(r.mc.stderr_) << ',' << num(r.mc.bound_delta) << ',' << r.mc.aborts;
    if (wall_time) os << ',' << num(r.wall_seconds);
    os << '\n';
  }
}

void write_json(std::ostream& os, const SweepResult& result, bool wall_time) {
  using nlohmann::json;
  auto maybe = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json rows = json::array();
  for (const SweepRow& r : result.rows) {
    json j = {{"family", r.family},
              {"variant", r.variant},
              {"param_name", r.param_name},
              {"param_value", r.param_value},
              {"R", r.mc.replications},
              {"successes", r.mc.successes},
              {"accuracy", r.mc.accuracy},
              {"stderr", r.mc.stderr_},
              {"bound_delta", maybe(r.mc.bound_delta)},
              {"aborts", r.mc.aborts}};
    if (wall_time) j["wall_seconds"] = r.wall_seconds;
    rows.push_back(std::move(j));
  }
  os << rows.dump(2) << '\n';
}

}  // namespace fbbai
