#pragma once

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridbf/objective.hpp"

namespace hybridbf {

enum class InitStrategy { RandomPhase, MatchedFilter };

/// Per-iteration step sizes for the analog (mu_A) and digital (mu_D) updates;
/// the trainable object of the unfolded optimizers.
struct StepSchedule {
  std::vector<double> mu_A;
  std::vector<double> mu_D;

  int length() const { return static_cast<int>(mu_A.size()); }
  void validate() const;
  static StepSchedule constant(int L, double mu);
};

struct OptimizerConfig {
  int L = 10;
  InitStrategy init_strategy = InitStrategy::RandomPhase;
  bool record_trace = true;
  std::uint64_t seed = 0;
};

/// Sum-rate after initialization (index 0) and after each iteration.
struct RateTrace {
  std::vector<double> rates;
};

/// Hook for auditing every recorded iterate (constraint/power feasibility).
struct IterateObserver {
  virtual ~IterateObserver() = default;
  virtual void on_iterate(const AnalogPrecoder& A, const DigitalPrecoder& D,
                          int iteration) = 0;
};

/// Random-phase: A = exp(j theta) masked+projected. Matched-filter: A is the
/// projection of the top-K eigenvectors of the frequency-averaged channel
/// Gram. Either way D_f is the least-squares fit to the fully digital
/// reference, power-projected.
HybridPrecoder init_precoders(const ChannelRealization& H, const SystemDims& dims,
                              const ConstraintSet& constraint, InitStrategy strategy,
                              std::uint64_t seed);

/// D_f = pinv(A) W_target_f, then power projection. Throws on rank-deficient A.
DigitalPrecoder digital_ls(const AnalogPrecoder& A, const std::vector<CMat>& W_target,
                           double P);

struct OptimizeResult {
  HybridPrecoder precoder;
  RateTrace trace;
};

/// Projected gradient ascent on the sum-rate with externally supplied step
/// sizes (no line search). When H_eval is given, the trace rates (and only
/// they) are computed against it; gradients and initialization use H.
OptimizeResult pga(const ChannelRealization& H, const SystemDims& dims,
                   const ConstraintSet& constraint, const StepSchedule& schedule,
                   const OptimizerConfig& config, IterateObserver* observer = nullptr,
                   const ChannelRealization* H_eval = nullptr,
                   const HybridPrecoder* warm_init = nullptr);

/// Phase-extraction alternating minimization of ||W_opt - A D||_F against the
/// fully digital reference. Rounds that would increase the factorization
/// residual are rejected (monotone safeguard). Requires UnitModulus or
/// QuantizedPhase constraints.
OptimizeResult pe_altmin(const ChannelRealization& H, const FullyDigitalPrecoder& W_opt,
                         const SystemDims& dims, const ConstraintSet& constraint,
                         int rounds, std::uint64_t seed,
                         IterateObserver* observer = nullptr);

/// Euclidean gradient of sum_f ||W_f - A D_f||_F^2 projected onto the tangent
/// space of the complex-circle manifold at A: R = E - Re(E .* conj(A)) .* A.
CMat circle_riemannian_gradient(const std::vector<CMat>& W_opt, const CMat& A,
                                const std::vector<CMat>& D);

/// Riemannian alternating minimization over the complex-circle manifold:
/// LS digital step, then inner_steps backtracking steepest-descent steps on A.
/// Fully connected unit-modulus only. objective_trace, when given, records
/// the factorization objective after every accepted inner step.
OptimizeResult mo_altmin(const ChannelRealization& H, const FullyDigitalPrecoder& W_opt,
                         const SystemDims& dims, int outer_rounds, int inner_steps,
                         std::uint64_t seed, IterateObserver* observer = nullptr,
                         std::vector<double>* objective_trace = nullptr);

/// One Riemannian step per round with a fixed step size eta_l (the unfolded
/// flavor of mo_altmin; no backtracking). Matched-filter initialization.
OptimizeResult gradient_altmin(const ChannelRealization& H,
                               const FullyDigitalPrecoder& W_opt,
                               const SystemDims& dims, const std::vector<double>& etas,
                               IterateObserver* observer = nullptr);

enum class Method {
  Pga,
  PeAltmin,
  MoAltmin,
  FullyDigital,
  UnfoldedPga,
  UnfoldedAltmin,
};

Method method_from_name(std::string_view name);  // throws on unknown name
std::string method_name(Method m);

struct MethodParams {
  int L = 0;          // 0 = method default (pga 200, altmin 50, unfolded: schedule length)
  int inner_steps = 10;                          // mo_altmin
  double fixed_step = std::numeric_limits<double>::quiet_NaN();  // classical pga
  const StepSchedule* schedule = nullptr;        // unfolded_pga
  const std::vector<double>* etas = nullptr;     // unfolded_altmin
  InitStrategy init_strategy = InitStrategy::RandomPhase;
  std::uint64_t seed = 0;  // combined with the channel content hash
};

struct MethodResult {
  std::vector<CMat> effective;  // W_f, M x N
  RateTrace trace;
};

/// Uniform dispatch for the benchmark harness. fully_digital returns a
/// length-1 trace. Throws on unknown method or missing trained schedule.
MethodResult run_method(Method method, const ChannelRealization& H,
                        const SystemDims& dims, const ConstraintSet& constraint,
                        const MethodParams& params, IterateObserver* observer = nullptr,
                        const ChannelRealization* H_eval = nullptr);

}  // namespace hybridbf
