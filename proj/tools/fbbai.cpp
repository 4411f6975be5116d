#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbbai/arms_io.hpp"
#include "fbbai/bounds.hpp"
#include "fbbai/design.hpp"
#include "fbbai/errors.hpp"
#include "fbbai/gse.hpp"
#include "fbbai/harness.hpp"
#include "fbbai/instances.hpp"

namespace {

using namespace fbbai;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Options shared by `run` and `sweep` that describe the instance family.
struct FamilyOptions {
  std::string family = "static";
  int K = 16;
  int d = 9;
  double omega = 0.1;
  double delta = 2.0;
  double sigma2 = std::nan("");
  bool noiseless = false;
  std::string arms;
  std::string theta;
  std::string mean = "linear";
};

void add_family_options(CLI::App* app, FamilyOptions& f) {
  app->add_option("--family", f.family, "adaptive, static, sphere, logistic, corner or csv");
  app->add_option("--K", f.K, "number of arms");
  app->add_option("--d", f.d, "feature dimension");
  app->add_option("--omega", f.omega, "disturbing-arm angle (adaptive)");
  app->add_option("--delta", f.delta, "gap of the best arm (static)");
  app->add_option("--sigma2", f.sigma2, "Gaussian noise variance");
  app->add_flag("--noiseless", f.noiseless, "replace rewards by their means");
  app->add_option("--arms", f.arms, "arm features CSV (csv family)");
  app->add_option("--theta", f.theta, "theta* vector file (csv family)");
  app->add_option("--mean", f.mean, "linear or logistic (csv family)");
}

FamilyParams to_params(const FamilyOptions& f) {
  FamilyParams p;
  p.family = parse_family(f.family);
  p.K = f.K;
  p.d = f.d;
  p.omega = f.omega;
  p.delta = f.delta;
  if (!std::isnan(f.sigma2)) p.sigma2 = f.sigma2;
  p.noiseless = f.noiseless;
  if (p.family == Family::Csv) {
    if (f.arms.empty() || f.theta.empty())
      throw ConfigError("csv family needs --arms and --theta");
    Eigen::MatrixXd x = read_arms_csv_file(f.arms);
    Eigen::VectorXd theta = read_vector_file(f.theta);
    if (f.mean == "linear") {
      p.fixed = BanditInstance::create(std::move(x), std::move(theta), std::nullopt,
                                       NoiseKind::Gaussian, p.sigma2.value_or(1.0));
    } else if (f.mean == "logistic") {
      p.fixed = BanditInstance::create(std::move(x), std::move(theta), MeanFunction::logistic(),
                                       NoiseKind::Bernoulli, 0.0);
    } else {
      throw ConfigError("--mean must be linear or logistic");
    }
  }
  return p;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad grid value '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

void emit(const SweepResult& result, const std::string& out, const std::string& format,
          bool wall_time) {
  if (format != "csv" && format != "json") throw ConfigError("--format must be csv or json");
  auto write = [&](std::ostream& os) {
    if (format == "csv") {
      write_csv(os, result, wall_time);
    } else {
      write_json(os, result, wall_time);
    }
  };
  if (out.empty() || out == "-") {
    write(std::cout);
    return;
  }
  std::ofstream file(out);
  if (!file) throw ConfigError("cannot open output file " + out);
  write(file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-budget best-arm identification with generalized successive elimination"};
  app.require_subcommand(1);

  // run
  FamilyOptions run_family;
  std::string run_variant = "gse-fwg", run_out, run_format = "csv";
  long run_budget = 320, run_budget_per_arm = 0, run_reps = 1000;
  std::uint64_t run_seed = 7;
  double run_eta = 2.0;
  int run_workers = 0;
  bool run_wall = false, run_serial = false, run_trace = false;
  CLI::App* run = app.add_subcommand("run", "Monte-Carlo accuracy of one variant");
  add_family_options(run, run_family);
  run->add_option("--variant", run_variant, "algorithm variant");
  run->add_option("--budget,--B", run_budget, "total budget B");
  run->add_option("--budget-per-arm", run_budget_per_arm, "B = value * K when set");
  run->add_option("--replications,-R", run_reps, "Monte-Carlo replications");
  run->add_option("--seed", run_seed, "master seed");
  run->add_option("--eta", run_eta, "elimination parameter");
  run->add_option("--workers", run_workers, "threads (default FBBAI_WORKERS)");
  run->add_option("--out", run_out, "output file (default stdout)");
  run->add_option("--format", run_format, "csv or json");
  run->add_flag("--wall-time", run_wall, "add a wall_seconds column");
  run->add_flag("--serial", run_serial, "use the single-threaded runner");
  run->add_flag("--trace", run_trace, "print the stage trace of replication 0 as JSON");

  // sweep
  std::string sweep_preset, sweep_out, sweep_format = "csv", sweep_grid, sweep_variants;
  long sweep_reps = 0, sweep_budget = 0;
  std::uint64_t sweep_seed = 7;
  int sweep_workers = 0, sweep_d = 0;
  bool sweep_wall = false, sweep_serial = false;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a preset experiment grid");
  sweep->add_option("--preset", sweep_preset, "adaptive, static, sphere, logistic or corner")
      ->required();
  sweep->add_option("--out", sweep_out, "output file, or a directory for <preset>.csv");
  sweep->add_option("--format", sweep_format, "csv or json");
  sweep->add_option("--replications,-R", sweep_reps, "override replications");
  sweep->add_option("--seed", sweep_seed, "master seed");
  sweep->add_option("--grid", sweep_grid, "override grid, comma separated");
  sweep->add_option("--budgets", sweep_grid, "alias of --grid for budget sweeps");
  sweep->add_option("--variants", sweep_variants, "override variants, comma separated");
  sweep->add_option("--budget", sweep_budget, "override the fixed budget");
  sweep->add_option("--d", sweep_d, "override the dimension");
  sweep->add_option("--workers", sweep_workers, "threads (default FBBAI_WORKERS)");
  sweep->add_flag("--wall-time", sweep_wall, "add a wall_seconds column");
  sweep->add_flag("--serial", sweep_serial, "use the single-threaded runner");

  // design
  std::string design_arms, design_criterion = "g";
  long design_budget = 0;
  double design_tol = 0.01;
  int design_iters = 0;
  CLI::App* design = app.add_subcommand("design", "G-optimal design of an arm set");
  design->add_option("--arms", design_arms, "arm features CSV")->required();
  design->add_option("--budget", design_budget, "round to this many pulls");
  design->add_option("--tol", design_tol, "certificate tolerance");
  design->add_option("--iterations", design_iters, "Frank-Wolfe iteration cap");
  design->add_option("--criterion", design_criterion, "g or d");

  // bound
  BoundInputs bin;
  std::string bound_model = "linear";
  double bound_norm = std::nan("");
  CLI::App* bound = app.add_subcommand("bound", "Evaluate an error bound");
  bound->add_option("--K", bin.K, "number of arms")->required();
  bound->add_option("--d", bin.d, "dimension")->required();
  bound->add_option("--eta", bin.eta, "elimination parameter");
  bound->add_option("--sigma2", bin.sigma2, "sub-Gaussian variance proxy")->required();
  bound->add_option("--delta-min", bin.delta_min, "minimum gap")->required();
  bound->add_option("--B", bin.B, "budget")->required();
  bound->add_option("--c-min", bin.c_min, "mean-function derivative lower bound (glm)");
  bound->add_option("--model", bound_model, "linear or glm");
  bound->add_option("--max-norm2", bound_norm,
                    "realized max weighted norm; evaluates the allocation-general form");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      McTask task;
      task.family = to_params(run_family);
      task.variant = run_variant;
      task.eta = run_eta;
      task.replications = run_reps;
      task.seed = run_seed;
      task.budget = run_budget;
      if (run_budget_per_arm > 0) {
        Rng probe(0);
        task.budget = run_budget_per_arm *
                      static_cast<long>(make_instance(task.family, probe).num_arms());
      }
      if (run_trace) {
        Rng irng(instance_stream_seed(run_seed, run_family.family, 0, 0));
        const BanditInstance inst = make_instance(task.family, irng);
        Rng rng(reward_stream_seed(run_seed, run_family.family, run_variant, 0, 0));
        std::cout << to_json(gse_run(inst, variant_config(run_variant, task.budget, run_eta),
                                     rng))
                  << '\n';
        return 0;
      }
      SweepRow row;
      row.family = run_family.family;
      row.variant = run_variant;
      row.param_name = "B";
      row.param_value = static_cast<double>(task.budget);
      const auto t0 = std::chrono::steady_clock::now();
      row.mc = run_serial ? mc_accuracy_serial(task) : mc_accuracy(task, run_workers);
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      emit(SweepResult{{row}}, run_out, run_format, run_wall);
    } else if (*sweep) {
      ExperimentConfig cfg = preset_config(sweep_preset);
      if (sweep_reps > 0) cfg.replications = sweep_reps;
      cfg.seed = sweep_seed;
      cfg.workers = sweep_workers;
      cfg.serial = sweep_serial;
      if (!sweep_grid.empty()) cfg.grid = parse_grid(sweep_grid);
      if (sweep->count("--budgets") > 0 && sweep->count("--grid") == 0) cfg.param_name = "B";
      if (!sweep_variants.empty()) {
        cfg.variants.clear();
        std::stringstream ss(sweep_variants);
        std::string v;
        while (std::getline(ss, v, ',')) cfg.variants.push_back(v);
      }
      if (sweep_budget > 0) {
        cfg.budget = sweep_budget;
        cfg.budget_per_arm = 0;
      }
      if (sweep_d > 0) cfg.family.d = sweep_d;
      std::string out = sweep_out;
      if (!out.empty() && std::filesystem::is_directory(out))
        out = (std::filesystem::path(out) / (sweep_preset + "." + sweep_format)).string();
      emit(run_sweep(cfg), out, sweep_format, sweep_wall);
    } else if (*design) {
      const Eigen::MatrixXd x = read_arms_csv_file(design_arms);
      const ProjectedArmSet proj = project_to_span(x);
      FwOptions fw;
      fw.tol = design_tol;
      fw.max_iterations = design_iters;
      if (design_criterion == "d") {
        fw.criterion = DesignCriterion::D;
      } else if (design_criterion != "g") {
        throw ConfigError("--criterion must be g or d");
      }
      const Design des = fw_g_optimal(proj.projected_features, fw);
      std::optional<Allocation> alloc;
      if (design_budget > 0)
        alloc = round_allocation_with_retry(design_budget, des.weights, proj.projected_features);
      std::printf("g_value,%.12g\nd_t,%zu\ncertified,%s\niterations,%d\n\n", des.g_value,
                  des.dim, des.certified ? "true" : "false", des.iterations_used);
      std::printf(alloc ? "arm,weight,count\n" : "arm,weight\n");
      for (Eigen::Index i = 0; i < des.weights.size(); ++i) {
        std::printf("%ld,%.12g", static_cast<long>(i), des.weights(i));
        if (alloc) std::printf(",%ld", alloc->counts[static_cast<std::size_t>(i)]);
        std::printf("\n");
      }
    } else if (*bound) {
      double delta;
      const bool general = !std::isnan(bound_norm);
      if (bound_model == "linear") {
        delta = general ? bound_linear_general(bin, bound_norm) : bound_linear_gopt(bin);
      } else if (bound_model == "glm") {
        delta = general ? bound_glm_general(bin, bound_norm) : bound_glm_gopt(bin);
      } else {
        throw ConfigError("--model must be linear or glm");
      }
      std::printf("%.10g\n", delta);
    }
  } catch (const ConfigError& e) {
    std::cerr << "fbbai: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "fbbai: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
