#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fbbai/gse.hpp"
#include "fbbai/instances.hpp"

namespace fbbai {

enum class Family { Adaptive, Static, Sphere, Logistic, Corner, Csv };

std::string family_name(Family f);
Family parse_family(const std::string& name);  // ConfigError if unknown

// Parameters of an instance family. Fields not used by a family are ignored.
struct FamilyParams {
  Family family = Family::Static;
  int K = 16;             // static, sphere, logistic, corner
  int d = 9;              // adaptive, sphere, logistic
  double omega = 0.1;     // adaptive
  double delta = 2.0;     // static
  std::optional<double> sigma2;  // family default when unset
  // Replace every reward by its mean (sigma^2 = 0, Bernoulli by its mean).
  bool noiseless = false;
  // Csv family: the instance to use.
  std::optional<BanditInstance> fixed;
};

bool is_randomized(const FamilyParams& p);

// Builds one instance of the family. Randomized families consume `rng`.
BanditInstance make_instance(const FamilyParams& p, Rng& rng);

// Variant names: gse-uniform, gse-fwg, gse-fwd, gse-log-uniform, gse-log-fwg,
// static-fwg.
const std::vector<std::string>& variant_names();
GseConfig variant_config(const std::string& variant, long budget, double eta = 2.0);

// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_string(const std::string& s);

// Stream seeds of replication r. The instance stream does not depend on the
// variant, so every variant sees the same sequence of random instances.
std::uint64_t reward_stream_seed(std::uint64_t master, const std::string& family,
                                 const std::string& variant, std::uint64_t grid_point,
                                 std::uint64_t r);
std::uint64_t instance_stream_seed(std::uint64_t master, const std::string& family,
                                   std::uint64_t grid_point, std::uint64_t r);

struct McTask {
  FamilyParams family;
  std::string variant = "gse-fwg";
  long budget = 0;
  double eta = 2.0;
  long replications = 1000;
  std::uint64_t seed = 0;
  std::uint64_t grid_point = 0;
  bool compute_bound = true;
  long c_min_probes = 2000;
  // Optional overrides applied to the variant's GseConfig.
  std::function<void(GseConfig&)> tweak;
};

struct McResult {
  long replications = 0;
  long successes = 0;
  long aborts = 0;
  double accuracy = 0.0;
  double stderr_ = 0.0;
  double bound_delta = 0.0;  // NaN when no bound applies
};

// R independent runs on pre-split streams, OpenMP over replications with
// `workers` threads (0: FBBAI_WORKERS or the OpenMP default). Aborted runs
// count as failures. ConfigError from a replication is rethrown.
McResult mc_accuracy(const McTask& task, int workers = 0);

// Reference implementation: the same replications in a plain loop.
McResult mc_accuracy_serial(const McTask& task);

int default_workers();

struct ExperimentConfig {
  FamilyParams family;
  std::vector<std::string> variants;
  std::string param_name;         // B, B_per_K, K, d, delta, omega
  std::vector<double> grid;
  long budget = 320;              // used unless swept or budget_per_arm > 0
  long budget_per_arm = 0;        // B = budget_per_arm * K when positive
  double eta = 2.0;
  long replications = 1000;
  std::uint64_t seed = 7;
  int workers = 0;
  bool serial = false;
};

struct SweepRow {
  std::string family;
  std::string variant;
  std::string param_name;
  double param_value = 0.0;
  McResult mc;
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// Rows ordered by grid point, then variant.
SweepResult run_sweep(const ExperimentConfig& config);

// Presets: adaptive, static, sphere, logistic, corner. ConfigError if unknown.
ExperimentConfig preset_config(const std::string& name);
const std::vector<std::string>& preset_names();
SweepResult run_preset(const std::string& name);

void write_csv(std::ostream& os, const SweepResult& result, bool wall_time = false);
void write_json(std::ostream& os, const SweepResult& result, bool wall_time = false);

}  // namespace fbbai
