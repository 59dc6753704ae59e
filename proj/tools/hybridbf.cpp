// Command-line front end for the hybrid beamforming benchmark harness.
//
//   hybridbf gen         generate and persist the channel dataset
//   hybridbf train       train unfolded step-size schedules per SNR point
//   hybridbf sweep       sum-rate vs. SNR over the evaluation split
//   hybridbf convergence sum-rate vs. iteration at a fixed SNR
//   hybridbf robust      true-channel rate under noisy CSI

#include <iostream>

#include <CLI11.hpp>

#include "hybridbf/bench.hpp"

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

hybridbf::ExperimentConfig make_config(const GlobalOpts& g) {
  hybridbf::ExperimentConfig cfg =
      g.config_path.empty() ? hybridbf::default_experiment_config()
                            : hybridbf::load_experiment_config(g.config_path);
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  if (g.seed_set) cfg.eval_seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid beamforming optimizer benchmark harness"};
  app.require_subcommand(1);
  app.fallthrough();  // accept the global flags after the subcommand too

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Experiment config file (JSON)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory (overrides config)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Evaluation seed (overrides config)");
  app.add_option("--threads", g.threads, "Worker threads (overrides config)");

  auto* gen = app.add_subcommand("gen", "Generate the channel dataset");
  auto* train = app.add_subcommand("train", "Train unfolded schedules");
  auto* sweep = app.add_subcommand("sweep", "Sum-rate vs. SNR sweep");
  auto* conv = app.add_subcommand("convergence", "Sum-rate per iteration");
  auto* robust = app.add_subcommand("robust", "Noisy-CSI robustness sweep");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    const hybridbf::ExperimentConfig cfg = make_config(g);
    if (gen->parsed()) hybridbf::cmd_gen(cfg);
    if (train->parsed()) hybridbf::cmd_train(cfg);
    if (sweep->parsed()) hybridbf::cmd_sweep(cfg);
    if (conv->parsed()) hybridbf::cmd_convergence(cfg);
    if (robust->parsed()) hybridbf::cmd_robust(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
