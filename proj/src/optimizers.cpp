#include "hybridbf/optimizers.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "hybridbf/rng.hpp"

namespace hybridbf {

void StepSchedule::validate() const {
  if (mu_A.empty() || mu_A.size() != mu_D.size())
    throw std::invalid_argument("StepSchedule: mu_A and mu_D must be equal length >= 1");
  for (double v : mu_A)
    if (!std::isfinite(v)) throw std::invalid_argument("StepSchedule: non-finite mu_A");
  for (double v : mu_D)
    if (!std::isfinite(v)) throw std::invalid_argument("StepSchedule: non-finite mu_D");
}

StepSchedule StepSchedule::constant(int L, double mu) {
  StepSchedule s;
  s.mu_A.assign(L, mu);
  s.mu_D.assign(L, mu);
  return s;
}

namespace {

CMat random_phase_matrix(int M, int K, std::uint64_t seed) {
  Rng rng(seed);
  CMat A(M, K);
  for (Eigen::Index j = 0; j < K; ++j)
    for (Eigen::Index i = 0; i < M; ++i) {
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      A(i, j) = Complex{std::cos(theta), std::sin(theta)};
    }
  return A;
}

// Least-squares digital solve without the power projection. Moore-Penrose
// semantics: rank-deficient A yields the minimal-norm solution (the analog
// matrix extracted from a single-active-user reference is structurally
// rank-1, which is fine for the altmin updates).
std::vector<CMat> pinv_solve(const CMat& A, const std::vector<CMat>& W_target) {
  Eigen::CompleteOrthogonalDecomposition<CMat> cod(A);
  std::vector<CMat> D;
  D.reserve(W_target.size());
  for (const CMat& Wf : W_target) D.push_back(cod.solve(Wf));
  return D;
}

// Strict variant for digital_ls, whose contract rejects rank-deficient A.
std::vector<CMat> ls_solve(const CMat& A, const std::vector<CMat>& W_target) {
  Eigen::CompleteOrthogonalDecomposition<CMat> cod(A);
  if (cod.rank() < A.cols())
    throw std::runtime_error("digital_ls: rank-deficient analog precoder");
  std::vector<CMat> D;
  D.reserve(W_target.size());
  for (const CMat& Wf : W_target) D.push_back(cod.solve(Wf));
  return D;
}

bool usable_candidate(const CMat& A, const std::vector<CMat>& D) {
  for (const CMat& Df : D)
    if ((A * Df).norm() == 0.0) return false;
  return true;
}

std::vector<CMat> compose_all(const HybridPrecoder& hp) {
  std::vector<CMat> W;
  W.reserve(hp.digital.D.size());
  for (const CMat& Df : hp.digital.D) W.push_back(hp.analog.A * Df);
  return W;
}

double snapshot_rate(const ChannelRealization& H, const AnalogPrecoder& A,
                     const std::vector<CMat>& D_raw, double P, double noise_var,
                     HybridPrecoder* out = nullptr, IterateObserver* observer = nullptr,
                     int iteration = 0) {
  HybridPrecoder hp{A, project_power(A, DigitalPrecoder{D_raw}, P)};
  const double r = sum_rate(H, compose_all(hp), noise_var);
  if (observer) observer->on_iterate(hp.analog, hp.digital, iteration);
  if (out) *out = std::move(hp);
  return r;
}

double residual_norm(const std::vector<CMat>& W_opt, const CMat& A,
                     const std::vector<CMat>& D) {
  double s = 0.0;
  for (std::size_t f = 0; f < W_opt.size(); ++f) s += (W_opt[f] - A * D[f]).squaredNorm();
  return std::sqrt(s);
}

CMat matched_filter_directions(const ChannelRealization& H, int K) {
  const Eigen::Index M = H.H[0].cols();
  CMat gram = CMat::Zero(M, M);
  for (const CMat& Hf : H.H) gram += Hf.adjoint() * Hf;
  gram /= static_cast<double>(H.H.size());
  Eigen::SelfAdjointEigenSolver<CMat> eig(gram);
  CMat A(M, K);
  // Eigen sorts ascending; dominant direction goes in column 0.
  for (int k = 0; k < K; ++k) A.col(k) = eig.eigenvectors().col(M - 1 - k);
  return A;
}

}  // namespace

HybridPrecoder init_precoders(const ChannelRealization& H, const SystemDims& dims,
                              const ConstraintSet& constraint, InitStrategy strategy,
                              std::uint64_t seed) {
  dims.validate();
  CMat raw = strategy == InitStrategy::RandomPhase
                 ? random_phase_matrix(dims.M, dims.K, seed)
                 : matched_filter_directions(H, dims.K);
  AnalogPrecoder A = project_analog(raw, constraint);
  auto [W_zf, rep] = fully_digital_reference(H, dims.P, dims.noise_var);
  return HybridPrecoder{A, digital_ls(A, W_zf.W, dims.P)};
}

DigitalPrecoder digital_ls(const AnalogPrecoder& A, const std::vector<CMat>& W_target,
                           double P) {
  return project_power(A, DigitalPrecoder{ls_solve(A.A, W_target)}, P);
}

OptimizeResult pga(const ChannelRealization& H, const SystemDims& dims,
                   const ConstraintSet& constraint, const StepSchedule& schedule,
                   const OptimizerConfig& config, IterateObserver* observer,
                   const ChannelRealization* H_eval, const HybridPrecoder* warm_init) {
  schedule.validate();
  if (schedule.length() != config.L)
    throw std::invalid_argument("pga: schedule length must equal config.L");
  const ChannelRealization& He = H_eval ? *H_eval : H;

  HybridPrecoder hp = warm_init ? *warm_init
                                : init_precoders(H, dims, constraint,
                                                 config.init_strategy, config.seed);
  OptimizeResult out;
  if (config.record_trace) out.trace.rates.push_back(sum_rate(He, compose_all(hp), dims.noise_var));
  if (observer) observer->on_iterate(hp.analog, hp.digital, 0);

  for (int l = 0; l < config.L; ++l) {
    const RateGradient g = rate_gradient(H, hp.analog, hp.digital, dims.noise_var);
    bool finite = g.G_A.allFinite();
    for (const CMat& Gd : g.G_D) finite = finite && Gd.allFinite();
    if (!finite)
      throw std::runtime_error("pga: non-finite gradient (divergent step sizes)");
    hp.analog = project_analog(hp.analog.A + schedule.mu_A[l] * g.G_A, constraint);
    for (std::size_t f = 0; f < hp.digital.D.size(); ++f)
      hp.digital.D[f] += schedule.mu_D[l] * g.G_D[f];
    hp.digital = project_power(hp.analog, hp.digital, dims.P);
    if (config.record_trace || l == config.L - 1)
      out.trace.rates.push_back(sum_rate(He, compose_all(hp), dims.noise_var));
    if (observer) observer->on_iterate(hp.analog, hp.digital, l + 1);
  }
  out.precoder = std::move(hp);
  return out;
}

OptimizeResult pe_altmin(const ChannelRealization& H, const FullyDigitalPrecoder& W_opt,
                         const SystemDims& dims, const ConstraintSet& constraint,
                         int rounds, std::uint64_t seed, IterateObserver* observer) {
  if (constraint.kind != ConstraintKind::UnitModulus &&
      constraint.kind != ConstraintKind::QuantizedPhase)
    throw std::invalid_argument("pe_altmin: needs UnitModulus or QuantizedPhase");
  if (rounds < 0) throw std::invalid_argument("pe_altmin: negative round count");
  const int F = static_cast<int>(W_opt.W.size());

  AnalogPrecoder A = project_analog(random_phase_matrix(dims.M, dims.K, seed), constraint);
  std::vector<CMat> D(F, CMat::Identity(dims.K, dims.N));
  double resid = residual_norm(W_opt.W, A.A, D);

  OptimizeResult out;
  out.trace.rates.push_back(snapshot_rate(H, A, D, dims.P, dims.noise_var,
                                          &out.precoder, observer, 0));
  int restarts = 0;
  for (int l = 1; l <= rounds; ++l) {
    CMat S = CMat::Zero(dims.M, dims.K);
    for (int f = 0; f < F; ++f) S.noalias() += W_opt.W[f] * D[f].adjoint();
    AnalogPrecoder A_cand = project_analog(S, constraint);
    std::vector<CMat> D_cand = pinv_solve(A_cand.A, W_opt.W);
    while (!usable_candidate(A_cand.A, D_cand)) {
      if (++restarts > 3)
        throw std::runtime_error("pe_altmin: analog precoder stayed degenerate");
      A_cand = project_analog(
          random_phase_matrix(dims.M, dims.K, hash_combine(seed, restarts)), constraint);
      D_cand = pinv_solve(A_cand.A, W_opt.W);
    }
    const double resid_cand = residual_norm(W_opt.W, A_cand.A, D_cand);
    // Safeguard: a round that would increase the factorization residual is a
    // no-op (the raw phase-extraction step is not guaranteed to descend).
    if (resid_cand <= resid) {
      A = std::move(A_cand);
      D = std::move(D_cand);
      resid = resid_cand;
    }
    out.trace.rates.push_back(snapshot_rate(H, A, D, dims.P, dims.noise_var,
                                            &out.precoder, observer, l));
  }
  return out;
}

namespace {

double mo_objective(const std::vector<CMat>& W_opt, const CMat& A,
                    const std::vector<CMat>& D) {
  double s = 0.0;
  for (std::size_t f = 0; f < W_opt.size(); ++f) s += (W_opt[f] - A * D[f]).squaredNorm();
  return s;
}

CMat retract_unit_modulus(const CMat& X, const ConstraintSet& um) {
  return project_analog(X, um).A;
}

}  // namespace

CMat circle_riemannian_gradient(const std::vector<CMat>& W_opt, const CMat& A,
                                const std::vector<CMat>& D) {
  CMat E = CMat::Zero(A.rows(), A.cols());
  for (std::size_t f = 0; f < W_opt.size(); ++f)
    E.noalias() += -2.0 * (W_opt[f] - A * D[f]) * D[f].adjoint();
  // Tangent-space projection of the Euclidean gradient.
  return E - (E.cwiseProduct(A.conjugate())).real().cast<Complex>().cwiseProduct(A);
}

OptimizeResult mo_altmin(const ChannelRealization& H, const FullyDigitalPrecoder& W_opt,
                         const SystemDims& dims, int outer_rounds, int inner_steps,
                         std::uint64_t seed, IterateObserver* observer,
                         std::vector<double>* objective_trace) {
  const ConstraintSet um = ConstraintSet::unit_modulus(dims.M, dims.K);
  const int F = static_cast<int>(W_opt.W.size());
  if (F == 0) throw std::invalid_argument("mo_altmin: empty reference precoder");

  AnalogPrecoder A = project_analog(random_phase_matrix(dims.M, dims.K, seed), um);
  std::vector<CMat> D = pinv_solve(A.A, W_opt.W);

  OptimizeResult out;
  out.trace.rates.push_back(snapshot_rate(H, A, D, dims.P, dims.noise_var,
                                          &out.precoder, observer, 0));
  for (int l = 1; l <= outer_rounds; ++l) {
    if (objective_trace) objective_trace->push_back(mo_objective(W_opt.W, A.A, D));
    for (int s = 0; s < inner_steps; ++s) {
      const double f0 = mo_objective(W_opt.W, A.A, D);
      const CMat R = circle_riemannian_gradient(W_opt.W, A.A, D);
      double eta = 1.0;
      bool accepted = false;
      for (int t = 0; t < 30; ++t) {
        CMat A_cand = retract_unit_modulus(A.A - eta * R, um);
        const double f_cand = mo_objective(W_opt.W, A_cand, D);
        if (f_cand < f0) {
          A.A = std::move(A_cand);
          if (objective_trace) objective_trace->push_back(f_cand);
          accepted = true;
          break;
        }
        eta *= 0.5;
      }
      if (!accepted) break;  // stationary for this round's D
    }
    D = pinv_solve(A.A, W_opt.W);
    out.trace.rates.push_back(snapshot_rate(H, A, D, dims.P, dims.noise_var,
                                            &out.precoder, observer, l));
  }
  return out;
}

OptimizeResult gradient_altmin(const ChannelRealization& H,
                               const FullyDigitalPrecoder& W_opt,
                               const SystemDims& dims, const std::vector<double>& etas,
                               IterateObserver* observer) {
  const ConstraintSet um = ConstraintSet::unit_modulus(dims.M, dims.K);
  AnalogPrecoder A = project_analog(matched_filter_directions(H, dims.K), um);
  std::vector<CMat> D = pinv_solve(A.A, W_opt.W);

  OptimizeResult out;
  out.trace.rates.push_back(snapshot_rate(H, A, D, dims.P, dims.noise_var,
                                          &out.precoder, observer, 0));
  for (std::size_t l = 0; l < etas.size(); ++l) {
    const CMat R = circle_riemannian_gradient(W_opt.W, A.A, D);
    A.A = retract_unit_modulus(A.A - etas[l] * R, um);
    D = pinv_solve(A.A, W_opt.W);
    out.trace.rates.push_back(snapshot_rate(H, A, D, dims.P, dims.noise_var,
                                            &out.precoder, observer,
                                            static_cast<int>(l + 1)));
  }
  return out;
}

Method method_from_name(std::string_view name) {
  if (name == "pga") return Method::Pga;
  if (name == "pe_altmin") return Method::PeAltmin;
  if (name == "mo_altmin") return Method::MoAltmin;
  if (name == "fully_digital") return Method::FullyDigital;
  if (name == "unfolded_pga") return Method::UnfoldedPga;
  if (name == "unfolded_altmin") return Method::UnfoldedAltmin;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Pga: return "pga";
    case Method::PeAltmin: return "pe_altmin";
    case Method::MoAltmin: return "mo_altmin";
    case Method::FullyDigital: return "fully_digital";
    case Method::UnfoldedPga: return "unfolded_pga";
    case Method::UnfoldedAltmin: return "unfolded_altmin";
  }
  throw std::logic_error("method_name: unknown enum value");
}

MethodResult run_method(Method method, const ChannelRealization& H,
                        const SystemDims& dims, const ConstraintSet& constraint,
                        const MethodParams& params, IterateObserver* observer,
                        const ChannelRealization* H_eval) {
  const std::uint64_t seed = hash_combine(H.content_hash(), params.seed);
  MethodResult res;
  switch (method) {
    case Method::FullyDigital: {
      auto [fd, rep] = fully_digital_reference(H, dims.P, dims.noise_var);
      res.effective = std::move(fd.W);
      const double rate = H_eval ? sum_rate(*H_eval, res.effective, dims.noise_var)
                                 : rep.sum_rate;
      res.trace.rates = {rate};
      return res;
    }
    case Method::Pga:
    case Method::UnfoldedPga: {
      StepSchedule sched;
      if (params.schedule) {
        sched = *params.schedule;
      } else if (method == Method::UnfoldedPga) {
        throw std::invalid_argument("run_method: unfolded_pga needs a trained schedule");
      } else {
        if (!std::isfinite(params.fixed_step))
          throw std::invalid_argument("run_method: pga needs fixed_step or a schedule");
        sched = StepSchedule::constant(params.L > 0 ? params.L : 200, params.fixed_step);
      }
      OptimizerConfig cfg;
      cfg.L = sched.length();
      cfg.init_strategy = params.init_strategy;
      cfg.seed = seed;
      OptimizeResult r = pga(H, dims, constraint, sched, cfg, observer, H_eval);
      res.effective.reserve(r.precoder.digital.D.size());
      for (std::size_t f = 0; f < r.precoder.digital.D.size(); ++f)
        res.effective.push_back(compose(r.precoder, static_cast<int>(f)));
      res.trace = std::move(r.trace);
      return res;
    }
    case Method::PeAltmin:
    case Method::MoAltmin:
    case Method::UnfoldedAltmin: {
      auto [W_opt, rep] = fully_digital_reference(H, dims.P, dims.noise_var);
      OptimizeResult r;
      if (method == Method::PeAltmin) {
        r = pe_altmin(H, W_opt, dims, constraint, params.L > 0 ? params.L : 50, seed,
                      observer);
      } else if (method == Method::MoAltmin) {
        r = mo_altmin(H, W_opt, dims, params.L > 0 ? params.L : 50, params.inner_steps,
                      seed, observer);
      } else {
        if (!params.etas)
          throw std::invalid_argument(
              "run_method: unfolded_altmin needs a trained step schedule");
        r = gradient_altmin(H, W_opt, dims, *params.etas, observer);
      }
      res.effective.reserve(r.precoder.digital.D.size());
      for (std::size_t f = 0; f < r.precoder.digital.D.size(); ++f)
        res.effective.push_back(compose(r.precoder, static_cast<int>(f)));
      // Altmin traces are computed on H; for corrupted-CSI runs only the
      // final true-channel rate matters.
      if (H_eval)
        r.trace.rates.back() = sum_rate(*H_eval, res.effective, dims.noise_var);
      res.trace = std::move(r.trace);
      return res;
    }
  }
  throw std::invalid_argument("run_method: unknown method");
}

}  // namespace hybridbf
