#pragma once

#include <optional>
#include <string>

#include "hybridbf/unfolding.hpp"

namespace hybridbf {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// One benchmark method row: canonical name plus per-method knobs. The label
/// distinguishes multiple presets of the same method in the CSV output.
struct MethodSpec {
  std::string name;
  std::string label;  // defaults to name
  int L = 0;          // 0 = method default
  int inner_steps = 10;
  double fixed_step = std::numeric_limits<double>::quiet_NaN();  // NaN = grid-tuned
};

struct RobustBlock {
  std::vector<double> error_var_grid = {0.0, 0.01, 0.05, 0.1, 0.2};
  double trained_error_var = 0.1;
  double snr_db = 10.0;
};

struct ExperimentConfig {
  SystemDims dims;  // P is derived per SNR point; noise_var stays fixed
  ChannelModelParams channel;
  std::string dataset_path;  // empty -> <output_dir>/dataset.bin
  int dataset_count = 1000;
  std::uint64_t dataset_seed = 1;
  double split = 0.8;  // train fraction
  std::vector<MethodSpec> methods;
  std::vector<double> snr_grid_db = {10.0};
  std::uint64_t eval_seed = 1;
  std::string output_dir = "out";

  ConstraintKind constraint_kind = ConstraintKind::UnitModulus;
  int constraint_bits = 2;        // QuantizedPhase only
  Topology topology = Topology::Fully;

  TrainConfig train;
  int train_subset = 0;  // 0 = whole train split
  int unfold_L = 10;
  RobustBlock robust;
  double convergence_snr_db = 10.0;
  std::string timing = "real";  // "real" | "none" (deterministic CSVs)
  int threads = 0;              // 0 = hardware concurrency
  std::optional<double> schedule_snr_db;  // single-schedule ablation mode

  std::string resolved_dataset_path() const;
  int resolved_threads() const;
  SystemDims dims_at_snr(double snr_db) const;
  ConstraintSet make_constraint() const;
  void validate() const;
};

ExperimentConfig default_experiment_config();
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> eval;
};

/// Disjoint train/eval index sets from a seeded shuffle of 0..count-1.
SplitIndices split_dataset(int count, double train_fraction, std::uint64_t eval_seed);

struct SweepRow {
  std::string method;
  double snr_db = 0.0;
  double mean_rate = 0.0;
  double std_rate = 0.0;
  int n_channels = 0;
  double mean_wall_time_ms = 0.0;
};

void cmd_gen(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg);
void cmd_convergence(const ExperimentConfig& cfg);
void cmd_robust(const ExperimentConfig& cfg);

}  // namespace hybridbf
