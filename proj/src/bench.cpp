#include "hybridbf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "hybridbf/parallel.hpp"
#include "hybridbf/rng.hpp"

namespace hybridbf {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dims"] = {{"M", c.dims.M}, {"K", c.dims.K}, {"N", c.dims.N},
               {"F", c.dims.F}, {"noise_var", c.dims.noise_var}};
  j["channel"] = {{"carrier_hz", c.channel.carrier_hz},
                  {"bandwidth_hz", c.channel.bandwidth_hz},
                  {"n_clusters", c.channel.n_clusters},
                  {"rays_per_cluster", c.channel.rays_per_cluster},
                  {"angle_spread_rad", c.channel.angle_spread_rad},
                  {"delay_spread_s", c.channel.delay_spread_s}};
  j["dataset"] = {{"path", c.dataset_path}, {"count", c.dataset_count},
                  {"seed", c.dataset_seed}};
  j["split"] = c.split;
  json methods = json::array();
  for (const MethodSpec& m : c.methods) {
    json jm{{"name", m.name}, {"label", m.label}, {"L", m.L},
            {"inner_steps", m.inner_steps}};
    if (std::isfinite(m.fixed_step)) jm["fixed_step"] = m.fixed_step;
    methods.push_back(jm);
  }
  j["methods"] = methods;
  j["snr_grid_db"] = c.snr_grid_db;
  j["eval_seed"] = c.eval_seed;
  j["output_dir"] = c.output_dir;
  j["constraint"] = {{"kind", constraint_kind_name(c.constraint_kind)},
                     {"bits", c.constraint_bits},
                     {"topology", c.topology == Topology::Fully ? "fully" : "partially"}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learn_rate", c.train.learn_rate},
                {"loss_weights", c.train.loss_weights},
                {"grad_mode", c.train.grad_mode == GradMode::FiniteDifference
                                  ? "finite-difference"
                                  : "analytic-unrolled"},
                {"fd_step", c.train.fd_step},
                {"seed", c.train.seed},
                {"csi_error_var", c.train.csi_error_var}};
  j["train_subset"] = c.train_subset;
  j["unfold_L"] = c.unfold_L;
  j["robust"] = {{"error_var_grid", c.robust.error_var_grid},
                 {"trained_error_var", c.robust.trained_error_var},
                 {"snr_db", c.robust.snr_db}};
  j["convergence_snr_db"] = c.convergence_snr_db;
  j["timing"] = c.timing;
  j["threads"] = c.threads;
  if (c.schedule_snr_db) j["schedule_snr_db"] = *c.schedule_snr_db;
  return j;
}

}  // namespace

std::string ExperimentConfig::resolved_dataset_path() const {
  if (!dataset_path.empty()) return dataset_path;
  return (std::filesystem::path(output_dir) / "dataset.bin").string();
}

int ExperimentConfig::resolved_threads() const {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

SystemDims ExperimentConfig::dims_at_snr(double snr_db) const {
  SystemDims d = dims;
  d.P = d.noise_var * std::pow(10.0, snr_db / 10.0);
  return d;
}

ConstraintSet ExperimentConfig::make_constraint() const {
  switch (constraint_kind) {
    case ConstraintKind::UnitModulus:
      return ConstraintSet::unit_modulus(dims.M, dims.K, topology);
    case ConstraintKind::QuantizedPhase:
      return ConstraintSet::quantized_phase(dims.M, dims.K, constraint_bits, topology);
    case ConstraintKind::LorentzianDMA:
      return ConstraintSet::lorentzian_dma(dims.M, dims.K, topology);
    case ConstraintKind::VectorModulatorCodebook:
      throw std::invalid_argument(
          "config: vector_modulator benchmarks need an explicit codebook; "
          "not supported via config files");
  }
  throw std::logic_error("make_constraint: unknown kind");
}

void ExperimentConfig::validate() const {
  SystemDims d = dims;
  d.P = 1.0;  // P is derived; validate the rest
  d.validate();
  channel.validate();
  if (channel.M != dims.M || channel.N != dims.N || channel.F != dims.F)
    throw std::invalid_argument("config: channel M/N/F must match dims");
  if (split < 0.0 || split >= 1.0)
    throw std::invalid_argument("config: split must lie in [0, 1)");
  if (timing != "real" && timing != "none")
    throw std::invalid_argument("config: timing must be 'real' or 'none'");
  if (dataset_count < 1) throw std::invalid_argument("config: dataset count must be >= 1");
  if (unfold_L < 1) throw std::invalid_argument("config: unfold_L must be >= 1");
  for (const MethodSpec& m : methods) method_from_name(m.name);
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.dims = SystemDims{12, 4, 4, 16, 1.0, 1.0};
  c.channel = ChannelModelParams{};  // module defaults
  c.methods = {{"fully_digital", "fully_digital", 0, 10, NAN},
               {"mo_altmin", "mo_altmin", 50, 10, NAN},
               {"pe_altmin", "pe_altmin", 50, 10, NAN},
               {"pga", "pga", 200, 10, NAN},
               {"unfolded_pga", "unfolded_pga", 0, 10, NAN},
               {"unfolded_altmin", "unfolded_altmin", 0, 10, NAN}};
  c.snr_grid_db = {10.0};
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: parse error in " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = default_experiment_config();
  try {
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      if (d.contains("M")) c.dims.M = d["M"].get<int>();
      if (d.contains("K")) c.dims.K = d["K"].get<int>();
      if (d.contains("N")) c.dims.N = d["N"].get<int>();
      if (d.contains("F")) c.dims.F = d["F"].get<int>();
      if (d.contains("noise_var")) c.dims.noise_var = d["noise_var"].get<double>();
    }
    c.channel.M = c.dims.M;
    c.channel.N = c.dims.N;
    c.channel.F = c.dims.F;
    if (j.contains("channel")) {
      const auto& ch = j["channel"];
      if (ch.contains("carrier_hz")) c.channel.carrier_hz = ch["carrier_hz"].get<double>();
      if (ch.contains("bandwidth_hz"))
        c.channel.bandwidth_hz = ch["bandwidth_hz"].get<double>();
      if (ch.contains("n_clusters")) c.channel.n_clusters = ch["n_clusters"].get<int>();
      if (ch.contains("rays_per_cluster"))
        c.channel.rays_per_cluster = ch["rays_per_cluster"].get<int>();
      if (ch.contains("angle_spread_rad"))
        c.channel.angle_spread_rad = ch["angle_spread_rad"].get<double>();
      if (ch.contains("delay_spread_s"))
        c.channel.delay_spread_s = ch["delay_spread_s"].get<double>();
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      if (d.contains("path")) c.dataset_path = d["path"].get<std::string>();
      if (d.contains("count")) c.dataset_count = d["count"].get<int>();
      if (d.contains("seed")) c.dataset_seed = d["seed"].get<std::uint64_t>();
    }
    if (j.contains("split")) c.split = j["split"].get<double>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& jm : j["methods"]) {
        MethodSpec m;
        m.name = jm.at("name").get<std::string>();
        m.label = jm.contains("label") ? jm["label"].get<std::string>() : m.name;
        if (jm.contains("L")) m.L = jm["L"].get<int>();
        if (jm.contains("inner_steps")) m.inner_steps = jm["inner_steps"].get<int>();
        if (jm.contains("fixed_step")) m.fixed_step = jm["fixed_step"].get<double>();
        c.methods.push_back(std::move(m));
      }
    }
    if (j.contains("snr_grid_db"))
      c.snr_grid_db = j["snr_grid_db"].get<std::vector<double>>();
    if (j.contains("eval_seed")) c.eval_seed = j["eval_seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("constraint")) {
      const auto& cc = j["constraint"];
      if (cc.contains("kind"))
        c.constraint_kind = constraint_kind_from_name(cc["kind"].get<std::string>());
      if (cc.contains("bits")) c.constraint_bits = cc["bits"].get<int>();
      if (cc.contains("topology"))
        c.topology = cc["topology"].get<std::string>() == "partially"
                         ? Topology::Partially
                         : Topology::Fully;
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      if (t.contains("epochs")) c.train.epochs = t["epochs"].get<int>();
      if (t.contains("batch_size")) c.train.batch_size = t["batch_size"].get<int>();
      if (t.contains("learn_rate")) c.train.learn_rate = t["learn_rate"].get<double>();
      if (t.contains("loss_weights"))
        c.train.loss_weights = t["loss_weights"].get<std::vector<double>>();
      if (t.contains("grad_mode"))
        c.train.grad_mode = t["grad_mode"].get<std::string>() == "analytic-unrolled"
                                ? GradMode::AnalyticUnrolled
                                : GradMode::FiniteDifference;
      if (t.contains("fd_step")) c.train.fd_step = t["fd_step"].get<double>();
      if (t.contains("seed")) c.train.seed = t["seed"].get<std::uint64_t>();
      if (t.contains("csi_error_var"))
        c.train.csi_error_var = t["csi_error_var"].get<double>();
    }
    if (j.contains("train_subset")) c.train_subset = j["train_subset"].get<int>();
    if (j.contains("unfold_L")) c.unfold_L = j["unfold_L"].get<int>();
    if (j.contains("robust")) {
      const auto& r = j["robust"];
      if (r.contains("error_var_grid"))
        c.robust.error_var_grid = r["error_var_grid"].get<std::vector<double>>();
      if (r.contains("trained_error_var"))
        c.robust.trained_error_var = r["trained_error_var"].get<double>();
      if (r.contains("snr_db")) c.robust.snr_db = r["snr_db"].get<double>();
    }
    if (j.contains("convergence_snr_db"))
      c.convergence_snr_db = j["convergence_snr_db"].get<double>();
    if (j.contains("timing")) c.timing = j["timing"].get<std::string>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("schedule_snr_db"))
      c.schedule_snr_db = j["schedule_snr_db"].get<double>();
  } catch (const json::exception& e) {
    throw std::runtime_error("config: bad field in " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string bytes = config_to_json(cfg).dump();
  return fnv1a64(bytes.data(), bytes.size());
}

SplitIndices split_dataset(int count, double train_fraction, std::uint64_t eval_seed) {
  if (count < 1) throw std::invalid_argument("split_dataset: empty dataset");
  if (train_fraction < 0.0 || train_fraction >= 1.0)
    throw std::invalid_argument("split_dataset: train fraction must be in [0, 1)");
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(eval_seed);
  for (int i = count - 1; i > 0; --i) {
    const int j = static_cast<int>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  const int n_train = static_cast<int>(std::llround(train_fraction * count));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.eval.assign(order.begin() + n_train, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.eval.begin(), s.eval.end());
  return s;
}

namespace {

struct RunContext {
  const ExperimentConfig* cfg = nullptr;
  ChannelDataset dataset;
  SplitIndices split;
  std::uint64_t ds_fingerprint = 0;
  std::map<std::string, std::string> schedule_fingerprints;
  // (label, snr) -> tuned fixed step for classical pga
  std::map<std::pair<std::string, long long>, double> tuned_steps;
};

long long snr_key(double snr_db) { return std::llround(snr_db * 1000.0); }

std::string snr_token(double snr_db) { return fmt_double(snr_db); }

RunContext open_run(const ExperimentConfig& cfg, bool need_dataset = true) {
  cfg.validate();
  RunContext rc;
  rc.cfg = &cfg;
  std::filesystem::create_directories(cfg.output_dir);
  if (need_dataset) {
    const std::string path = cfg.resolved_dataset_path();
    if (!std::filesystem::exists(path))
      throw std::runtime_error("dataset missing at " + path + "; run `gen` first");
    rc.dataset = load_dataset(path);
    rc.ds_fingerprint = dataset_fingerprint(rc.dataset);
    rc.split = split_dataset(static_cast<int>(rc.dataset.realizations.size()),
                             cfg.split, cfg.eval_seed);
  }
  return rc;
}

std::vector<const ChannelRealization*> pick(const ChannelDataset& ds,
                                            const std::vector<int>& idx, int limit = 0) {
  std::vector<const ChannelRealization*> out;
  const int n = limit > 0 ? std::min<int>(limit, idx.size()) : static_cast<int>(idx.size());
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(&ds.realizations[idx[i]]);
  return out;
}

std::vector<ChannelRealization> copy_channels(const ChannelDataset& ds,
                                              const std::vector<int>& idx,
                                              int limit = 0) {
  std::vector<ChannelRealization> out;
  const int n = limit > 0 ? std::min<int>(limit, idx.size()) : static_cast<int>(idx.size());
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(ds.realizations[idx[i]]);
  return out;
}

std::filesystem::path schedule_path(const ExperimentConfig& cfg, const std::string& id) {
  return std::filesystem::path(cfg.output_dir) / "schedules" / (id + ".json");
}

std::string schedule_id(const std::string& method, double snr_db) {
  return method + "_snr" + snr_token(snr_db);
}

double schedule_lookup_snr(const ExperimentConfig& cfg, double snr_db) {
  return cfg.schedule_snr_db ? *cfg.schedule_snr_db : snr_db;
}

TrainedSchedule load_checked_schedule(RunContext& rc, const std::string& id,
                                      const SystemDims& dims, ConstraintKind kind,
                                      ScheduleKind expect) {
  const std::filesystem::path p = schedule_path(*rc.cfg, id);
  if (!std::filesystem::exists(p))
    throw std::runtime_error("missing trained schedule " + p.string() +
                             "; run `train` first");
  TrainedSchedule s = load_schedule(p);
  if (s.kind != expect)
    throw std::runtime_error("schedule " + id + " has the wrong kind");
  // P may differ in the single-schedule ablation mode; M/K/N/F and the
  // constraint kind must match.
  check_schedule_compatible(s, dims, kind);
  rc.schedule_fingerprints[id] = hex64(s.config_fingerprint);
  return s;
}

double tuned_step_for(RunContext& rc, const std::string& label, double snr_db, int L) {
  const auto key = std::make_pair(label, snr_key(snr_db));
  const auto it = rc.tuned_steps.find(key);
  if (it != rc.tuned_steps.end()) return it->second;
  const ExperimentConfig& cfg = *rc.cfg;
  const SystemDims dims = cfg.dims_at_snr(snr_db);
  const ConstraintSet constraint = cfg.make_constraint();
  const std::vector<ChannelRealization> tune_batch = copy_channels(
      rc.dataset, rc.split.train, std::min(cfg.train.batch_size, 32));
  if (tune_batch.empty())
    throw std::runtime_error("pga step tuning needs a non-empty train split");
  const double mu = tune_fixed_step(tune_batch, dims, constraint, L,
                                    cfg.resolved_threads());
  rc.tuned_steps[key] = mu;
  return mu;
}

struct ResolvedMethod {
  Method method;
  MethodParams params;
  // Owned storage the params point into.
  std::shared_ptr<TrainedSchedule> schedule;
  std::shared_ptr<StepSchedule> fixed;
};

ResolvedMethod resolve_method(RunContext& rc, const MethodSpec& spec, double snr_db) {
  const ExperimentConfig& cfg = *rc.cfg;
  const SystemDims dims = cfg.dims_at_snr(snr_db);
  ResolvedMethod r;
  r.method = method_from_name(spec.name);
  r.params.L = spec.L;
  r.params.inner_steps = spec.inner_steps;
  switch (r.method) {
    case Method::Pga: {
      const int L = spec.L > 0 ? spec.L : 200;
      r.params.L = L;
      r.params.fixed_step = std::isfinite(spec.fixed_step)
                                ? spec.fixed_step
                                : tuned_step_for(rc, spec.label, snr_db, L);
      break;
    }
    case Method::UnfoldedPga: {
      const double s_snr = schedule_lookup_snr(cfg, snr_db);
      r.schedule = std::make_shared<TrainedSchedule>(load_checked_schedule(
          rc, schedule_id("unfolded_pga", s_snr), dims, cfg.constraint_kind,
          ScheduleKind::PgaSteps));
      r.params.schedule = &r.schedule->schedule;
      break;
    }
    case Method::UnfoldedAltmin: {
      const double s_snr = schedule_lookup_snr(cfg, snr_db);
      r.schedule = std::make_shared<TrainedSchedule>(load_checked_schedule(
          rc, schedule_id("unfolded_altmin", s_snr), dims, ConstraintKind::UnitModulus,
          ScheduleKind::AltminSteps));
      r.params.etas = &r.schedule->schedule.mu_A;
      break;
    }
    default:
      break;
  }
  return r;
}

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  double mean_ms = 0.0;
  int n = 0;
};

EvalStats eval_stats(const std::vector<double>& rates, const std::vector<double>& ms,
                     bool real_timing) {
  EvalStats s;
  s.n = static_cast<int>(rates.size());
  if (s.n == 0) return s;
  s.mean = std::accumulate(rates.begin(), rates.end(), 0.0) / s.n;
  double var = 0.0;
  for (double r : rates) var += (r - s.mean) * (r - s.mean);
  s.stddev = s.n > 1 ? std::sqrt(var / (s.n - 1)) : 0.0;
  s.mean_ms = real_timing && !ms.empty()
                  ? std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size()
                  : 0.0;
  return s;
}

// Evaluates one (method, dims) cell over the given channels; per-channel
// results land in index order so the reduction is thread-count independent.
EvalStats evaluate_cell(RunContext& rc, const ResolvedMethod& rm, const SystemDims& dims,
                        const std::vector<const ChannelRealization*>& channels,
                        std::vector<RateTrace>* traces = nullptr,
                        double corrupt_var = 0.0, std::uint64_t corrupt_stream = 0) {
  const ExperimentConfig& cfg = *rc.cfg;
  const ConstraintSet constraint = cfg.make_constraint();
  const int n = static_cast<int>(channels.size());
  std::vector<double> rates(n), ms(n);
  if (traces) traces->assign(n, RateTrace{});
  const bool real_timing = cfg.timing == "real";
  parallel_for(n, cfg.resolved_threads(), [&](int i) {
    const ChannelRealization& H = *channels[i];
    const auto t0 = std::chrono::steady_clock::now();
    MethodResult res;
    if (corrupt_var > 0.0) {
      const ChannelRealization Hc =
          corrupt_csi(H, corrupt_var, hash_combine(corrupt_stream, H.content_hash()));
      res = run_method(rm.method, Hc, dims, constraint, rm.params, nullptr, &H);
    } else {
      res = run_method(rm.method, H, dims, constraint, rm.params);
    }
    const auto t1 = std::chrono::steady_clock::now();
    rates[i] = res.trace.rates.back();
    ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (traces) (*traces)[i] = std::move(res.trace);
  });
  return eval_stats(rates, ms, real_timing);
}

void write_manifest(const RunContext& rc, const std::string& command,
                    const std::vector<std::string>& outputs) {
  const ExperimentConfig& cfg = *rc.cfg;
  json j;
  j["command"] = command;
  j["toolkit_version"] = kToolkitVersion;
  j["timestamp_utc"] = utc_timestamp();
  j["config_hash"] = hex64(config_hash(cfg));
  j["dataset_fingerprint"] = hex64(rc.ds_fingerprint);
  json fps = json::object();
  for (const auto& [id, fp] : rc.schedule_fingerprints) fps[id] = fp;
  j["schedule_fingerprints"] = fps;
  j["split"] = {{"train", rc.split.train}, {"eval", rc.split.eval}};
  j["outputs"] = outputs;
  const auto path =
      std::filesystem::path(cfg.output_dir) / (command + "_manifest.json");
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

std::ofstream open_csv(const ExperimentConfig& cfg, const std::string& name,
                       const std::string& header) {
  const auto path = std::filesystem::path(cfg.output_dir) / name;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << header << "\n";
  return os;
}

}  // namespace

void cmd_gen(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  const ChannelDataset ds =
      generate_dataset(cfg.channel, cfg.dataset_count, cfg.dataset_seed);
  const std::string path = cfg.resolved_dataset_path();
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  save_dataset(ds, path);
  const std::uint64_t fp = dataset_fingerprint(ds);
  std::cout << "dataset " << path << " count=" << ds.realizations.size()
            << " fingerprint=" << hex64(fp) << "\n";
  RunContext rc;
  rc.cfg = &cfg;
  rc.ds_fingerprint = fp;
  rc.split = split_dataset(cfg.dataset_count, cfg.split, cfg.eval_seed);
  write_manifest(rc, "gen", {path});
}

void cmd_train(const ExperimentConfig& cfg) {
  RunContext rc = open_run(cfg);
  if (rc.split.train.empty())
    throw std::runtime_error("cmd_train: train fraction 0 leaves nothing to train on");
  std::filesystem::create_directories(std::filesystem::path(cfg.output_dir) / "schedules");

  ChannelDataset train_set;
  train_set.params = rc.dataset.params;
  train_set.seed = rc.dataset.seed;
  train_set.realizations = copy_channels(rc.dataset, rc.split.train, cfg.train_subset);

  TrainConfig tc = cfg.train;
  tc.threads = cfg.resolved_threads();

  struct HistoryRow {
    std::string id;
    int epoch;
    double loss;
  };
  std::vector<HistoryRow> history;
  std::vector<std::string> outputs;

  auto record = [&](const std::string& id, const TrainedSchedule& s) {
    const auto path = schedule_path(cfg, id);
    save_schedule(s, path);
    rc.schedule_fingerprints[id] = hex64(s.config_fingerprint);
    outputs.push_back(path.string());
    for (std::size_t e = 0; e < s.train_history.size(); ++e)
      history.push_back({id, static_cast<int>(e), s.train_history[e]});
    std::cout << "trained " << id << " -> " << path.string() << "\n";
  };

  std::vector<double> train_snrs = cfg.snr_grid_db;
  if (cfg.schedule_snr_db) train_snrs = {*cfg.schedule_snr_db};

  // Only train what the configured method list (or the robust experiment)
  // will actually load.
  const auto wants = [&](const char* name) {
    return std::any_of(cfg.methods.begin(), cfg.methods.end(),
                       [&](const MethodSpec& m) { return m.name == name; });
  };
  const bool want_pga = wants("unfolded_pga") || cfg.robust.trained_error_var > 0.0;
  const bool want_altmin = wants("unfolded_altmin");

  const ConstraintSet constraint = cfg.make_constraint();
  for (double snr : train_snrs) {
    const SystemDims dims = cfg.dims_at_snr(snr);
    TrainConfig nominal = tc;
    nominal.csi_error_var = 0.0;
    if (want_pga)
      record(schedule_id("unfolded_pga", snr),
             train_pga_schedule(train_set, dims, constraint, cfg.unfold_L, nominal));
    if (want_altmin)
      record(schedule_id("unfolded_altmin", snr),
             train_altmin_schedule(train_set, dims, cfg.unfold_L, nominal));
  }

  if (cfg.robust.trained_error_var > 0.0) {
    const double snr = cfg.robust.snr_db;
    const SystemDims dims = cfg.dims_at_snr(snr);
    // The robust A/B needs a nominal counterpart at the same SNR.
    const std::string nominal_id = schedule_id("unfolded_pga", schedule_lookup_snr(cfg, snr));
    if (!std::filesystem::exists(schedule_path(cfg, nominal_id))) {
      TrainConfig nominal = tc;
      nominal.csi_error_var = 0.0;
      record(nominal_id,
             train_pga_schedule(train_set, dims, constraint, cfg.unfold_L, nominal));
    }
    TrainConfig robust = tc;
    robust.csi_error_var = cfg.robust.trained_error_var;
    record(schedule_id("unfolded_pga_robust", snr),
           train_robust_schedule(train_set, dims, constraint, cfg.unfold_L, robust));
  }

  std::ofstream os = open_csv(cfg, "train_history.csv", "schedule_id,epoch,loss");
  for (const HistoryRow& r : history)
    os << r.id << "," << r.epoch << "," << fmt_double(r.loss) << "\n";
  outputs.push_back((std::filesystem::path(cfg.output_dir) / "train_history.csv").string());
  write_manifest(rc, "train", outputs);
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg) {
  RunContext rc = open_run(cfg);
  const auto eval_channels = pick(rc.dataset, rc.split.eval);
  if (eval_channels.empty()) throw std::runtime_error("cmd_sweep: empty eval split");

  std::vector<MethodSpec> methods = cfg.methods;
  const bool has_fd = std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) {
    return m.name == "fully_digital";
  });
  if (!has_fd)
    methods.insert(methods.begin(), MethodSpec{"fully_digital", "fully_digital", 0, 10, NAN});

  std::vector<SweepRow> rows;
  for (double snr : cfg.snr_grid_db) {
    const SystemDims dims = cfg.dims_at_snr(snr);
    for (const MethodSpec& spec : methods) {
      const ResolvedMethod rm = resolve_method(rc, spec, snr);
      const EvalStats s = evaluate_cell(rc, rm, dims, eval_channels);
      rows.push_back({spec.label, snr, s.mean, s.stddev, s.n, s.mean_ms});
      std::cout << "sweep " << spec.label << " snr=" << snr_token(snr)
                << " mean_rate=" << fmt_double(s.mean) << "\n";
    }
  }

  std::ofstream os = open_csv(cfg, "sweep.csv",
                              "method,snr_db,mean_rate,std_rate,n_channels,mean_wall_time_ms");
  for (const SweepRow& r : rows)
    os << r.method << "," << fmt_double(r.snr_db) << "," << fmt_double(r.mean_rate)
       << "," << fmt_double(r.std_rate) << "," << r.n_channels << ","
       << fmt_double(r.mean_wall_time_ms) << "\n";
  write_manifest(rc, "sweep",
                 {(std::filesystem::path(cfg.output_dir) / "sweep.csv").string()});
  return rows;
}

void cmd_convergence(const ExperimentConfig& cfg) {
  RunContext rc = open_run(cfg);
  const auto eval_channels = pick(rc.dataset, rc.split.eval);
  if (eval_channels.empty()) throw std::runtime_error("cmd_convergence: empty eval split");
  const double snr = cfg.convergence_snr_db;
  const SystemDims dims = cfg.dims_at_snr(snr);

  std::ofstream os = open_csv(cfg, "convergence.csv", "method,iteration,mean_rate");
  for (const MethodSpec& spec : cfg.methods) {
    const ResolvedMethod rm = resolve_method(rc, spec, snr);
    std::vector<RateTrace> traces;
    evaluate_cell(rc, rm, dims, eval_channels, &traces);
    std::size_t len = 0;
    for (const RateTrace& t : traces) len = std::max(len, t.rates.size());
    for (std::size_t it = 0; it < len; ++it) {
      double mean = 0.0;
      for (const RateTrace& t : traces) mean += t.rates[std::min(it, t.rates.size() - 1)];
      mean /= traces.size();
      os << spec.label << "," << it << "," << fmt_double(mean) << "\n";
    }
  }
  write_manifest(rc, "convergence",
                 {(std::filesystem::path(cfg.output_dir) / "convergence.csv").string()});
}

void cmd_robust(const ExperimentConfig& cfg) {
  RunContext rc = open_run(cfg);
  const auto eval_channels = pick(rc.dataset, rc.split.eval);
  if (eval_channels.empty()) throw std::runtime_error("cmd_robust: empty eval split");
  const RobustBlock& rb = cfg.robust;
  if (std::none_of(rb.error_var_grid.begin(), rb.error_var_grid.end(),
                   [](double v) { return v == 0.0; }))
    throw std::invalid_argument("cmd_robust: error_var grid must include 0");
  const double snr = rb.snr_db;
  const SystemDims dims = cfg.dims_at_snr(snr);

  // The robust comparison trio: classical PGA, the nominal unfolded schedule,
  // and the schedule trained under matched CSI noise. PGA/unfolded specs come
  // from the config when present so the error_var=0 rows match cmd_sweep.
  auto spec_for = [&](const std::string& name) {
    for (const MethodSpec& m : cfg.methods)
      if (m.name == name && m.label == name) return m;
    return MethodSpec{name, name, 0, 10, NAN};
  };
  std::vector<std::pair<std::string, MethodSpec>> specs;
  specs.emplace_back("pga", spec_for("pga"));
  specs.emplace_back("unfolded_pga", spec_for("unfolded_pga"));
  specs.emplace_back("unfolded_pga_robust",
                     MethodSpec{"unfolded_pga", "unfolded_pga_robust", 0, 10, NAN});

  std::ofstream os = open_csv(cfg, "robust.csv", "method,error_var,mean_true_rate");
  for (double ev : rb.error_var_grid) {
    for (auto& [label, spec] : specs) {
      ResolvedMethod rm;
      if (label == "unfolded_pga_robust") {
        rm.method = Method::UnfoldedPga;
        rm.schedule = std::make_shared<TrainedSchedule>(load_checked_schedule(
            rc, schedule_id("unfolded_pga_robust", snr), dims, cfg.constraint_kind,
            ScheduleKind::PgaSteps));
        rm.params.schedule = &rm.schedule->schedule;
      } else {
        rm = resolve_method(rc, spec, snr);
      }
      // Corruption seeds depend only on (eval_seed, error_var, channel), so
      // every method sees the same corrupted CSI (paired comparison).
      const std::uint64_t stream =
          hash_combine(cfg.eval_seed, fnv1a64(&ev, sizeof(ev)));
      const EvalStats s = evaluate_cell(rc, rm, dims, eval_channels, nullptr, ev, stream);
      os << label << "," << fmt_double(ev) << "," << fmt_double(s.mean) << "\n";
      std::cout << "robust " << label << " error_var=" << fmt_double(ev)
                << " mean_true_rate=" << fmt_double(s.mean) << "\n";
    }
  }
  write_manifest(rc, "robust",
                 {(std::filesystem::path(cfg.output_dir) / "robust.csv").string()});
}

}  // namespace hybridbf
