#include "hybridbf/unfolding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "hybridbf/parallel.hpp"
#include "hybridbf/rng.hpp"

namespace hybridbf {

namespace {

constexpr double kPenaltyLoss = 1e6;

// 10-point logarithmic step grid shared by schedule initialization and
// classical fixed-step tuning.
std::vector<double> step_grid() {
  std::vector<double> g(10);
  for (int i = 0; i < 10; ++i) g[i] = std::pow(10.0, -3.0 + 5.0 * i / 9.0);
  return g;
}

// Everything needed to evaluate one channel's contribution without repeating
// work across the finite-difference probes of a batch: the channel the
// optimizer sees (corrupted for robust training), the true channel the rates
// are measured on, the frozen initialization, and the cached ZF reference.
// The optimizer channel is held by value: contexts move around in vectors,
// so no member may point at a sibling member.
struct EvalContext {
  const ChannelRealization* H_true = nullptr;
  ChannelRealization corrupted;  // used only when robust
  bool robust = false;
  HybridPrecoder init;           // PGA only
  FullyDigitalPrecoder W_opt;    // altmin only

  const ChannelRealization& opt_channel() const { return robust ? corrupted : *H_true; }
};

EvalContext make_pga_context(const ChannelRealization& H, const SystemDims& dims,
                             const ConstraintSet& constraint, double error_var,
                             std::uint64_t corrupt_seed) {
  EvalContext ctx;
  ctx.H_true = &H;
  if (error_var > 0.0) {
    ctx.corrupted = corrupt_csi(H, error_var, corrupt_seed);
    ctx.robust = true;
  }
  const ChannelRealization& H_opt = ctx.opt_channel();
  const std::uint64_t init_seed = hash_combine(H_opt.content_hash(), 0);
  ctx.init =
      init_precoders(H_opt, dims, constraint, InitStrategy::RandomPhase, init_seed);
  return ctx;
}

EvalContext make_altmin_context(const ChannelRealization& H, const SystemDims& dims) {
  EvalContext ctx;
  ctx.H_true = &H;
  ctx.W_opt = fully_digital_reference(H, dims.P, dims.noise_var).first;
  return ctx;
}

// Weighted per-iteration rate sum for one channel; non-finite evaluations
// collapse to a large finite penalty.
double weighted_rates(const EvalContext& ctx, ScheduleKind kind,
                      const std::vector<double>& x, const SystemDims& dims,
                      const ConstraintSet& constraint,
                      const std::vector<double>& weights, bool* penalized) {
  const int L = static_cast<int>(weights.size());
  try {
    RateTrace trace;
    if (kind == ScheduleKind::PgaSteps) {
      StepSchedule s;
      s.mu_A.assign(x.begin(), x.begin() + L);
      s.mu_D.assign(x.begin() + L, x.end());
      OptimizerConfig cfg;
      cfg.L = L;
      cfg.record_trace = true;
      trace = pga(ctx.opt_channel(), dims, constraint, s, cfg, nullptr,
                  ctx.robust ? ctx.H_true : nullptr, &ctx.init)
                  .trace;
    } else {
      trace = gradient_altmin(*ctx.H_true, ctx.W_opt, dims, x).trace;
    }
    double acc = 0.0;
    for (int l = 1; l <= L; ++l) acc += weights[l - 1] * trace.rates[l];
    if (!std::isfinite(acc)) throw std::runtime_error("non-finite rate");
    return acc;
  } catch (const std::exception&) {
    if (penalized) *penalized = true;
    return -kPenaltyLoss;
  }
}

double batch_loss(const std::vector<EvalContext>& ctxs, ScheduleKind kind,
                  const std::vector<double>& x, const SystemDims& dims,
                  const ConstraintSet& constraint,
                  const std::vector<double>& weights, int threads,
                  bool* penalized = nullptr) {
  std::vector<double> contrib(ctxs.size(), 0.0);
  std::atomic<bool> pen{false};
  parallel_for(static_cast<int>(ctxs.size()), threads, [&](int i) {
    bool p = false;
    contrib[i] = weighted_rates(ctxs[i], kind, x, dims, constraint, weights, &p);
    if (p) pen = true;
  });
  double sum = 0.0;
  for (double c : contrib) sum += c;  // fixed reduction order
  if (penalized) *penalized = pen.load();
  return -sum / static_cast<double>(ctxs.size());
}

std::uint64_t dataset_identity(const std::vector<ChannelRealization>& chans) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const ChannelRealization& c : chans) {
    const std::uint64_t ch = c.content_hash();
    h = fnv1a64(&ch, sizeof(ch), h);
  }
  return h;
}

std::uint64_t fingerprint_of(const TrainConfig& cfg, const SystemDims& dims,
                             ConstraintKind kind, int L, ScheduleKind skind,
                             std::uint64_t data_id) {
  nlohmann::json j{
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"learn_rate", cfg.learn_rate},
      {"loss_weights", cfg.loss_weights},
      {"fd_step", cfg.fd_step},
      {"seed", cfg.seed},
      {"csi_error_var", cfg.csi_error_var},
      {"L", L},
      {"schedule_kind", skind == ScheduleKind::PgaSteps ? "pga" : "altmin"},
      {"constraint", constraint_kind_name(kind)},
      {"dims", {dims.M, dims.K, dims.N, dims.F, dims.P, dims.noise_var}},
  };
  const std::string bytes = j.dump();
  return hash_combine(fnv1a64(bytes.data(), bytes.size()), data_id);
}

TrainedSchedule train_core(const ChannelDataset& train_set, const SystemDims& dims,
                           const ConstraintSet& constraint, int L,
                           const TrainConfig& config, ScheduleKind kind,
                           double error_var) {
  if (train_set.realizations.empty())
    throw std::invalid_argument("train: empty dataset");
  if (L < 1) throw std::invalid_argument("train: L must be >= 1");
  config.validate();
  if (config.grad_mode == GradMode::AnalyticUnrolled)
    throw std::invalid_argument(
        "train: analytic-unrolled gradient mode is not built; use finite-difference");
  const std::vector<double> weights = config.effective_weights(L);
  const int nparams = kind == ScheduleKind::PgaSteps ? 2 * L : L;
  const auto& chans = train_set.realizations;
  const int n = static_cast<int>(chans.size());

  auto make_contexts = [&](const std::vector<int>& idx, int epoch, int batch) {
    std::vector<EvalContext> ctxs(idx.size());
    parallel_for(static_cast<int>(idx.size()), config.threads, [&](int i) {
      const ChannelRealization& H = chans[idx[i]];
      if (kind == ScheduleKind::PgaSteps) {
        const std::uint64_t cseed = hash_combine(
            hash_combine(config.seed, 0x6b72707463ull),  // corruption stream
            hash_combine(static_cast<std::uint64_t>(epoch) * 1000003ull + batch,
                         static_cast<std::uint64_t>(idx[i])));
        ctxs[i] = make_pga_context(H, dims, constraint, error_var, cseed);
      } else {
        ctxs[i] = make_altmin_context(H, dims);
      }
    });
    return ctxs;
  };

  auto epoch_order = [&](int epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(gen() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
    return order;
  };

  // Initialization: best fixed step over a 10-point log grid on one batch,
  // so training commences from a valid operating point.
  const std::vector<int> order0 = epoch_order(0);
  const std::vector<int> batch0(order0.begin(),
                                order0.begin() + std::min(config.batch_size, n));
  const std::vector<EvalContext> ctxs0 = make_contexts(batch0, 0, 0);
  double mu0 = 0.0, best_loss = std::numeric_limits<double>::infinity();
  for (double mu : step_grid()) {
    const std::vector<double> x(nparams, mu);
    const double loss = batch_loss(ctxs0, kind, x, dims, constraint, weights,
                                   config.threads);
    if (loss < best_loss) {
      best_loss = loss;
      mu0 = mu;
    }
  }
  std::vector<double> x(nparams, mu0);
  // Step sizes live on very different scales depending on SNR and dims (the
  // grid winner can be O(1e-2) or O(1e2)), so the descent operates in units
  // of the initialization scale: probes and updates are proportional to mu0.
  const double scale = std::max(mu0, 1e-12);
  const double probe = config.fd_step * std::max(1.0, scale);
  const double step_gain = config.learn_rate * scale * scale;

  TrainedSchedule out;
  out.kind = kind;
  out.dims = dims;
  out.constraint_kind = constraint.kind;
  out.config_fingerprint =
      fingerprint_of(config, dims, constraint.kind, L, kind, dataset_identity(chans));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = epoch == 0 ? order0 : epoch_order(epoch);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch_size, ++batches) {
      const int stop = std::min(start + config.batch_size, n);
      const std::vector<int> idx(order.begin() + start, order.begin() + stop);
      const std::vector<EvalContext> ctxs = make_contexts(idx, epoch, batches);

      const double f0 =
          batch_loss(ctxs, kind, x, dims, constraint, weights, config.threads);
      if (!std::isfinite(f0))
        throw std::runtime_error(
            "train: non-finite batch loss persisted after penalty handling "
            "(epoch " + std::to_string(epoch) + ")");
      epoch_loss += f0;

      if (config.learn_rate > 0.0) {
        std::vector<double> grad(nparams);
        for (int i = 0; i < nparams; ++i) {
          std::vector<double> xp = x, xm = x;
          xp[i] += probe;
          xm[i] -= probe;
          const double fp =
              batch_loss(ctxs, kind, xp, dims, constraint, weights, config.threads);
          const double fm =
              batch_loss(ctxs, kind, xm, dims, constraint, weights, config.threads);
          grad[i] = (fp - fm) / (2.0 * probe);
        }
        for (int i = 0; i < nparams; ++i)
          x[i] = std::max(0.0, x[i] - step_gain * grad[i]);
      }
    }
    out.train_history.push_back(epoch_loss / std::max(batches, 1));
  }

  if (kind == ScheduleKind::PgaSteps) {
    out.schedule.mu_A.assign(x.begin(), x.begin() + L);
    out.schedule.mu_D.assign(x.begin() + L, x.end());
  } else {
    out.schedule.mu_A = x;
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: negative epochs");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learn_rate >= 0.0) || !std::isfinite(learn_rate))
    throw std::invalid_argument("TrainConfig: bad learn_rate");
  if (!(fd_step > 0.0)) throw std::invalid_argument("TrainConfig: fd_step must be > 0");
  if (csi_error_var < 0.0)
    throw std::invalid_argument("TrainConfig: negative csi_error_var");
  if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
}

std::vector<double> TrainConfig::effective_weights(int L) const {
  std::vector<double> w = loss_weights;
  if (w.empty()) {
    w.resize(L);
    for (int l = 1; l <= L; ++l) w[l - 1] = static_cast<double>(l) / L;
  }
  if (static_cast<int>(w.size()) != L)
    throw std::invalid_argument("TrainConfig: loss_weights length must equal L");
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0) throw std::invalid_argument("TrainConfig: negative loss weight");
    if (i > 0 && w[i] < w[i - 1])
      throw std::invalid_argument("TrainConfig: loss_weights must be non-decreasing");
    sum += w[i];
  }
  if (!(sum > 0.0) || !(w.back() > 0.0))
    throw std::invalid_argument("TrainConfig: loss_weights must end positive");
  return w;
}

double unfold_loss(std::span<const ChannelRealization> batch,
                   const StepSchedule& schedule, const SystemDims& dims,
                   const ConstraintSet& constraint, const TrainConfig& config,
                   bool* penalized) {
  if (batch.empty()) throw std::invalid_argument("unfold_loss: empty batch");
  schedule.validate();
  const int L = schedule.length();
  const std::vector<double> weights = config.effective_weights(L);
  std::vector<double> x;
  x.reserve(2 * L);
  x.insert(x.end(), schedule.mu_A.begin(), schedule.mu_A.end());
  x.insert(x.end(), schedule.mu_D.begin(), schedule.mu_D.end());

  std::vector<EvalContext> ctxs(batch.size());
  parallel_for(static_cast<int>(batch.size()), config.threads, [&](int i) {
    ctxs[i] = make_pga_context(batch[i], dims, constraint, 0.0, 0);
  });
  return batch_loss(ctxs, ScheduleKind::PgaSteps, x, dims, constraint, weights,
                    config.threads, penalized);
}

TrainedSchedule train_pga_schedule(const ChannelDataset& train_set,
                                   const SystemDims& dims,
                                   const ConstraintSet& constraint, int L,
                                   const TrainConfig& config) {
  return train_core(train_set, dims, constraint, L, config, ScheduleKind::PgaSteps,
                    0.0);
}

TrainedSchedule train_altmin_schedule(const ChannelDataset& train_set,
                                      const SystemDims& dims, int L,
                                      const TrainConfig& config) {
  const ConstraintSet um = ConstraintSet::unit_modulus(dims.M, dims.K);
  return train_core(train_set, dims, um, L, config, ScheduleKind::AltminSteps, 0.0);
}

TrainedSchedule train_robust_schedule(const ChannelDataset& train_set,
                                      const SystemDims& dims,
                                      const ConstraintSet& constraint, int L,
                                      const TrainConfig& config) {
  return train_core(train_set, dims, constraint, L, config, ScheduleKind::PgaSteps,
                    config.csi_error_var);
}

double tune_fixed_step(std::span<const ChannelRealization> channels,
                       const SystemDims& dims, const ConstraintSet& constraint,
                       int L, int threads) {
  if (channels.empty()) throw std::invalid_argument("tune_fixed_step: no channels");
  std::vector<EvalContext> ctxs(channels.size());
  parallel_for(static_cast<int>(channels.size()), threads, [&](int i) {
    ctxs[i] = make_pga_context(channels[i], dims, constraint, 0.0, 0);
  });
  // Final-rate objective: weights (0, .., 0, 1).
  std::vector<double> weights(L, 0.0);
  weights.back() = 1.0;
  double best_mu = 0.0, best = std::numeric_limits<double>::infinity();
  for (double mu : step_grid()) {
    const std::vector<double> x(2 * L, mu);
    const double loss =
        batch_loss(ctxs, ScheduleKind::PgaSteps, x, dims, constraint, weights, threads);
    if (loss < best) {
      best = loss;
      best_mu = mu;
    }
  }
  return best_mu;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

std::string constraint_kind_name(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::UnitModulus: return "unit_modulus";
    case ConstraintKind::QuantizedPhase: return "quantized_phase";
    case ConstraintKind::VectorModulatorCodebook: return "vector_modulator";
    case ConstraintKind::LorentzianDMA: return "lorentzian_dma";
  }
  throw std::logic_error("constraint_kind_name: unknown kind");
}

ConstraintKind constraint_kind_from_name(std::string_view name) {
  if (name == "unit_modulus") return ConstraintKind::UnitModulus;
  if (name == "quantized_phase") return ConstraintKind::QuantizedPhase;
  if (name == "vector_modulator") return ConstraintKind::VectorModulatorCodebook;
  if (name == "lorentzian_dma") return ConstraintKind::LorentzianDMA;
  throw std::invalid_argument("unknown constraint kind: " + std::string(name));
}

void save_schedule(const TrainedSchedule& s, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = s.kind == ScheduleKind::PgaSteps ? "pga" : "altmin";
  j["L"] = s.schedule.mu_A.size();
  j["mu_a"] = s.schedule.mu_A;
  j["mu_d"] = s.schedule.mu_D;
  j["dims"] = {{"M", s.dims.M}, {"K", s.dims.K}, {"N", s.dims.N},
               {"F", s.dims.F}, {"P", s.dims.P}, {"noise_var", s.dims.noise_var}};
  j["constraint_kind"] = constraint_kind_name(s.constraint_kind);
  j["fingerprint"] = hex64(s.config_fingerprint);
  j["train_history"] = s.train_history;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_schedule: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

TrainedSchedule load_schedule(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_schedule: cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_schedule: corrupted file " + path.string() + ": " +
                             e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw std::runtime_error("unsupported schedule format version");
    TrainedSchedule s;
    s.kind = j.at("kind").get<std::string>() == "altmin" ? ScheduleKind::AltminSteps
                                                         : ScheduleKind::PgaSteps;
    s.schedule.mu_A = j.at("mu_a").get<std::vector<double>>();
    s.schedule.mu_D = j.at("mu_d").get<std::vector<double>>();
    const auto& d = j.at("dims");
    s.dims.M = d.at("M").get<int>();
    s.dims.K = d.at("K").get<int>();
    s.dims.N = d.at("N").get<int>();
    s.dims.F = d.at("F").get<int>();
    s.dims.P = d.at("P").get<double>();
    s.dims.noise_var = d.at("noise_var").get<double>();
    s.constraint_kind = constraint_kind_from_name(j.at("constraint_kind").get<std::string>());
    s.config_fingerprint = parse_hex64(j.at("fingerprint").get<std::string>());
    s.train_history = j.at("train_history").get<std::vector<double>>();
    const std::size_t L = j.at("L").get<std::size_t>();
    if (s.schedule.mu_A.size() != L ||
        (s.kind == ScheduleKind::PgaSteps && s.schedule.mu_D.size() != L))
      throw std::runtime_error("schedule length mismatch");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_schedule: corrupted file " + path.string() + ": " +
                             e.what());
  }
}

void check_schedule_compatible(const TrainedSchedule& s, const SystemDims& dims,
                               ConstraintKind kind) {
  if (s.dims.M != dims.M || s.dims.K != dims.K || s.dims.N != dims.N ||
      s.dims.F != dims.F)
    throw std::runtime_error(
        "schedule/run dimension mismatch: schedule (M,K,N,F)=(" +
        std::to_string(s.dims.M) + "," + std::to_string(s.dims.K) + "," +
        std::to_string(s.dims.N) + "," + std::to_string(s.dims.F) + ") vs run (" +
        std::to_string(dims.M) + "," + std::to_string(dims.K) + "," +
        std::to_string(dims.N) + "," + std::to_string(dims.F) + ")");
  if (s.constraint_kind != kind)
    throw std::runtime_error("schedule/run constraint kind mismatch: " +
                             constraint_kind_name(s.constraint_kind) + " vs " +
                             constraint_kind_name(kind));
}

}  // namespace hybridbf
