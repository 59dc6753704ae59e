#pragma once

#include <filesystem>
#include <span>

#include "hybridbf/optimizers.hpp"

namespace hybridbf {

enum class GradMode { FiniteDifference, AnalyticUnrolled };

struct TrainConfig {
  int epochs = 50;
  int batch_size = 100;
  double learn_rate = 1e-2;
  std::vector<double> loss_weights;  // empty -> omega_l = l/L
  GradMode grad_mode = GradMode::FiniteDifference;
  double fd_step = 1e-4;
  std::uint64_t seed = 0;
  double csi_error_var = 0.0;
  int threads = 1;

  void validate() const;
  /// omega_1..omega_L; defaults to l/L when loss_weights is empty.
  std::vector<double> effective_weights(int L) const;
};

enum class ScheduleKind { PgaSteps, AltminSteps };

struct TrainedSchedule {
  ScheduleKind kind = ScheduleKind::PgaSteps;
  StepSchedule schedule;  // AltminSteps: mu_A holds eta_l, mu_D is empty
  std::vector<double> train_history;  // mean training loss per epoch
  std::uint64_t config_fingerprint = 0;
  SystemDims dims;
  ConstraintKind constraint_kind = ConstraintKind::UnitModulus;
};

/// Negative weighted mean of the per-iteration PGA rates over the batch,
/// loss = -(1/|batch|) sum_channels sum_l omega_l * trace.rates[l].
/// Initialization is seeded per channel by its content hash, so the value is
/// a deterministic function of (batch, schedule). A channel whose evaluation
/// produces a non-finite rate contributes a large finite penalty instead;
/// *penalized reports whether that happened.
double unfold_loss(std::span<const ChannelRealization> batch,
                   const StepSchedule& schedule, const SystemDims& dims,
                   const ConstraintSet& constraint, const TrainConfig& config,
                   bool* penalized = nullptr);

/// Trains per-iteration PGA step sizes (2L parameters) by stochastic descent
/// on unfold_loss with central finite-difference gradients. Entries start at
/// the best fixed step from a 10-point logarithmic grid search on one batch
/// and are clamped to >= 0 after each update.
TrainedSchedule train_pga_schedule(const ChannelDataset& train_set,
                                   const SystemDims& dims,
                                   const ConstraintSet& constraint, int L,
                                   const TrainConfig& config);

/// Trains the L Riemannian step sizes of the unfolded (gradient) AltMin.
TrainedSchedule train_altmin_schedule(const ChannelDataset& train_set,
                                      const SystemDims& dims, int L,
                                      const TrainConfig& config);

/// train_pga_schedule variant for noisy CSI: every training evaluation runs
/// PGA on corrupt_csi(H, csi_error_var) while the loss rates are computed on
/// the true H. csi_error_var == 0 reduces exactly to train_pga_schedule.
TrainedSchedule train_robust_schedule(const ChannelDataset& train_set,
                                      const SystemDims& dims,
                                      const ConstraintSet& constraint, int L,
                                      const TrainConfig& config);

/// Best fixed step for plain PGA at depth L by the same 10-point log grid,
/// maximizing the mean final rate over the given channels.
double tune_fixed_step(std::span<const ChannelRealization> channels,
                       const SystemDims& dims, const ConstraintSet& constraint,
                       int L, int threads);

void save_schedule(const TrainedSchedule& s, const std::filesystem::path& path);
TrainedSchedule load_schedule(const std::filesystem::path& path);

/// Throws std::runtime_error when the schedule was trained for different
/// dimensions or another constraint kind.
void check_schedule_compatible(const TrainedSchedule& s, const SystemDims& dims,
                               ConstraintKind kind);

std::string constraint_kind_name(ConstraintKind kind);
ConstraintKind constraint_kind_from_name(std::string_view name);

}  // namespace hybridbf
