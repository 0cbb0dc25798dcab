// Experiment runner: one subcommand per study, CSV on stdout or --out.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gfm/error.hpp"
#include "gfm/harness.hpp"
#include "gfm/simworld.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitThreshold = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out;
  std::optional<int> workers;
  bool full_scale = false;
  bool check = false;
  bool no_timing = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON config overlaid on the defaults");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--trials", f.trials, "trials (worlds for lazier-bench)");
  app->add_option("--out", f.out, "CSV output path (default: stdout)");
  app->add_option("--workers", f.workers, "worker threads, 0 = OpenMP default, 1 = serial");
  app->add_flag("--full-scale", f.full_scale, "use the original study's trial counts");
  app->add_flag("--check", f.check, "exit 3 when an acceptance threshold is violated");
  app->add_flag("--no-timing", f.no_timing, "omit wall-time columns");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gfm::ConfigError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

gfm::ExperimentSpec resolve_spec(gfm::ExperimentKind kind, const CommonFlags& f) {
  gfm::ExperimentSpec spec =
      f.config.empty() ? gfm::default_spec(kind) : gfm::spec_from_json(kind, read_file(f.config));
  if (f.full_scale) gfm::apply_full_scale(spec);
  if (f.trials) spec.trials = *f.trials;
  if (f.seed) spec.base_seed = *f.seed;
  if (f.workers) spec.workers = *f.workers;
  spec.validate();
  return spec;
}

int run(gfm::ExperimentKind kind, const CommonFlags& f) {
  const auto spec = resolve_spec(kind, f);
  const auto report = gfm::run_experiment(spec);
  if (f.out.empty()) {
    report.write_csv(std::cout, !f.no_timing);
  } else {
    std::ofstream out(f.out);
    if (!out) throw gfm::ConfigError("cannot write " + f.out);
    report.write_csv(out, !f.no_timing);
  }
  if (!f.check) return kExitOk;
  const auto violations = gfm::check_report(spec, report);
  for (const auto& v : violations) std::cerr << "threshold: " << v << '\n';
  return violations.empty() ? kExitOk : kExitThreshold;
}

int fixtures(const CommonFlags& f, const std::string& verify_path) {
  if (!verify_path.empty()) {
    std::ifstream in(verify_path);
    if (!in) throw gfm::ConfigError("cannot open " + verify_path);
    const gfm::Scenario stored = gfm::read_scenario(in);
    const std::string diff = gfm::compare_scenarios(stored, gfm::generate_scenario(stored.config));
    if (!diff.empty()) {
      std::cerr << verify_path << ": " << diff << '\n';
      return kExitFailure;
    }
    std::cerr << verify_path << ": ok\n";
    return kExitOk;
  }
  auto spec = resolve_spec(gfm::ExperimentKind::kPoseOptMetrics, f);
  spec.world.seed = spec.base_seed;
  const gfm::Scenario s = gfm::generate_scenario(spec.world);
  if (f.out.empty()) {
    gfm::write_scenario(std::cout, s);
  } else {
    std::ofstream out(f.out);
    if (!out) throw gfm::ConfigError("cannot write " + f.out);
    gfm::write_scenario(out, s);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Good-feature selection and matching experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string verify_path;
  struct Sub {
    const char* name;
    const char* help;
    gfm::ExperimentKind kind;
  };
  const Sub subs[] = {
      {"pose-opt", "RMS pose error per selection metric and subset size",
       gfm::ExperimentKind::kPoseOptMetrics},
      {"lazier-bench", "lazy vs lazier greedy: error ratio and evaluation counts",
       gfm::ExperimentKind::kLazierBenchmark},
      {"matching", "active matching vs match-all", gfm::ExperimentKind::kMatchingSim},
      {"bounds", "theoretical guarantees over an epsilon grid", gfm::ExperimentKind::kBoundsCurve},
  };
  for (const auto& s : subs) add_common(app.add_subcommand(s.name, s.help), flags);
  auto* fx = app.add_subcommand("fixtures", "emit a scenario fixture, or verify one with --verify");
  add_common(fx, flags);
  fx->add_option("--verify", verify_path, "fixture file to regenerate and compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (fx->parsed()) return fixtures(flags, verify_path);
    for (const auto& s : subs) {
      if (app.got_subcommand(s.name)) return run(s.kind, flags);
    }
  } catch (const gfm::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const gfm::InvalidArgument& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
