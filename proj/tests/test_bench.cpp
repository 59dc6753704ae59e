#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "hybridbf/bench.hpp"

using namespace hybridbf;
namespace fs = std::filesystem;

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      t.rows.push_back(cells);
    }
  }
  return t;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c = default_experiment_config();
  c.dims = SystemDims{8, 2, 2, 4, 1.0, 1.0};
  c.channel.M = 8;
  c.channel.N = 2;
  c.channel.F = 4;  // module-default scattering (3 clusters)
  c.dataset_count = 30;
  c.dataset_seed = 5;
  c.split = 0.8;
  c.methods = {{"fully_digital", "fully_digital", 0, 10, NAN},
               {"pe_altmin", "pe_altmin", 10, 10, NAN},
               {"mo_altmin", "mo_altmin", 10, 4, NAN},
               {"pga", "pga", 20, 10, NAN},
               {"pga", "pga_small", 30, 10, 1e-3},
               {"unfolded_pga", "unfolded_pga", 0, 10, NAN},
               {"unfolded_altmin", "unfolded_altmin", 0, 10, NAN}};
  c.snr_grid_db = {10.0};
  c.eval_seed = 99;
  c.output_dir = out.string();
  c.train.epochs = 2;
  c.train.batch_size = 8;
  c.train.threads = 2;
  c.unfold_L = 3;
  c.robust.error_var_grid = {0.0, 0.05};
  c.robust.trained_error_var = 0.05;
  c.robust.snr_db = 10.0;
  c.convergence_snr_db = 10.0;
  c.timing = "none";
  c.threads = 2;
  return c;
}

double cell_d(const CsvTable& t, std::size_t row, std::size_t col) {
  return std::stod(t.rows[row][col]);
}

}  // namespace

TEST_CASE("config validation and json loading") {
  const fs::path dir = fs::temp_directory_path() / "hbf_cfg_test";
  fs::create_directories(dir);
  ExperimentConfig c = tiny_config(dir / "out");

  SUBCASE("defaults mirror the benchmark setup") {
    const ExperimentConfig d = default_experiment_config();
    CHECK(d.dims.M == 12);
    CHECK(d.dims.N == 4);
    CHECK(d.dims.F == 16);
    CHECK(d.dataset_count == 1000);
    CHECK(d.unfold_L == 10);
    CHECK(d.channel.carrier_hz == doctest::Approx(30e9));
    std::vector<std::string> names;
    for (const auto& m : d.methods) names.push_back(m.name);
    CHECK(names == std::vector<std::string>{"fully_digital", "mo_altmin", "pe_altmin",
                                            "pga", "unfolded_pga", "unfolded_altmin"});
  }
  SUBCASE("round-trips through a config file") {
    nlohmann::json j;
    j["dims"] = {{"M", 8}, {"K", 2}, {"N", 2}, {"F", 4}};
    j["dataset"] = {{"count", 12}, {"seed", 3}};
    j["split"] = 0.5;
    j["snr_grid_db"] = {0.0, 10.0};
    j["train"] = {{"epochs", 7}, {"batch_size", 4}};
    j["timing"] = "none";
    const fs::path p = dir / "cfg.json";
    std::ofstream(p) << j.dump();
    const ExperimentConfig got = load_experiment_config(p);
    CHECK(got.dims.K == 2);
    CHECK(got.channel.M == 8);  // channel dims follow dims
    CHECK(got.dataset_count == 12);
    CHECK(got.split == 0.5);
    CHECK(got.snr_grid_db == std::vector<double>{0.0, 10.0});
    CHECK(got.train.epochs == 7);
    CHECK(config_hash(got) == config_hash(got));
  }
  SUBCASE("invalid fields rejected") {
    ExperimentConfig bad = c;
    bad.split = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.timing = "fast";
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.dataset_count = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.methods.push_back({"mystery", "mystery", 0, 10, NAN});
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
  SUBCASE("snr realizes the power grid") {
    CHECK(c.dims_at_snr(10.0).P == doctest::Approx(10.0));
    CHECK(c.dims_at_snr(-3.0).P == doctest::Approx(std::pow(10.0, -0.3)));
  }
  fs::remove_all(dir);
}

TEST_CASE("split_dataset hygiene") {
  const SplitIndices s = split_dataset(30, 0.8, 99);
  CHECK(s.train.size() == 24);
  CHECK(s.eval.size() == 6);
  std::vector<bool> seen(30, false);
  for (int i : s.train) {
    CHECK_FALSE(seen[i]);
    seen[i] = true;
  }
  for (int i : s.eval) {
    CHECK_FALSE(seen[i]);
    seen[i] = true;
  }
  const SplitIndices again = split_dataset(30, 0.8, 99);
  CHECK(again.train == s.train);
  const SplitIndices other = split_dataset(30, 0.8, 100);
  CHECK(other.train != s.train);
  CHECK_THROWS_AS(split_dataset(30, 1.0, 1), std::invalid_argument);
}

TEST_CASE("end-to-end pipeline on a tiny rig") {
  const fs::path dir = fs::temp_directory_path() / "hbf_bench_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const ExperimentConfig cfg = tiny_config(dir);

  SUBCASE("commands demand their inputs") {
    CHECK_THROWS_WITH_AS(cmd_sweep(cfg), doctest::Contains("run `gen` first"),
                         std::runtime_error);
  }

  cmd_gen(cfg);
  const fs::path ds_path = cfg.resolved_dataset_path();
  REQUIRE(fs::exists(ds_path));

  SUBCASE("gen is reproducible byte-for-byte") {
    const std::string first = slurp(ds_path);
    cmd_gen(cfg);
    CHECK(slurp(ds_path) == first);
  }

  SUBCASE("sweep without schedules reports the missing input") {
    CHECK_THROWS_WITH_AS(cmd_sweep(cfg), doctest::Contains("missing trained schedule"),
                         std::runtime_error);
  }

  SUBCASE("train fraction zero is an error") {
    ExperimentConfig none = cfg;
    none.split = 0.0;
    CHECK_THROWS_AS(cmd_train(none), std::runtime_error);
  }

  cmd_train(cfg);
  REQUIRE(fs::exists(dir / "schedules" / "unfolded_pga_snr10.json"));
  REQUIRE(fs::exists(dir / "schedules" / "unfolded_altmin_snr10.json"));
  REQUIRE(fs::exists(dir / "schedules" / "unfolded_pga_robust_snr10.json"));

  SUBCASE("training history has epochs rows per schedule") {
    const CsvTable hist = read_csv(dir / "train_history.csv");
    CHECK(hist.header == std::vector<std::string>{"schedule_id", "epoch", "loss"});
    std::map<std::string, int> rows;
    for (const auto& r : hist.rows) rows[r[0]]++;
    CHECK(rows["unfolded_pga_snr10"] == cfg.train.epochs);
    CHECK(rows["unfolded_altmin_snr10"] == cfg.train.epochs);
    CHECK(rows["unfolded_pga_robust_snr10"] == cfg.train.epochs);
  }

  const std::vector<SweepRow> rows = cmd_sweep(cfg);
  const CsvTable sweep = read_csv(dir / "sweep.csv");

  SUBCASE("sweep rows are consistent and bounded by the reference") {
    CHECK(sweep.header ==
          std::vector<std::string>{"method", "snr_db", "mean_rate", "std_rate",
                                   "n_channels", "mean_wall_time_ms"});
    REQUIRE(sweep.rows.size() == cfg.methods.size());
    double fd_rate = -1.0;
    for (std::size_t i = 0; i < sweep.rows.size(); ++i)
      if (sweep.rows[i][0] == "fully_digital") fd_rate = cell_d(sweep, i, 2);
    REQUIRE(fd_rate > 0.0);
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
      CHECK(cell_d(sweep, i, 2) <= fd_rate + 1e-6);
      CHECK(cell_d(sweep, i, 2) >= 0.0);
      CHECK(std::stoi(sweep.rows[i][4]) == 6);
      CHECK(cell_d(sweep, i, 5) == 0.0);  // timing: none
    }
  }

  SUBCASE("pipeline outputs are byte-identical across reruns") {
    const std::string sweep_bytes = slurp(dir / "sweep.csv");
    cmd_sweep(cfg);
    CHECK(slurp(dir / "sweep.csv") == sweep_bytes);
  }

  cmd_convergence(cfg);
  const CsvTable conv = read_csv(dir / "convergence.csv");

  SUBCASE("convergence trace shape and iteration-0 consistency") {
    std::map<std::string, std::vector<double>> by_method;
    for (const auto& r : conv.rows)
      by_method[r[0]].push_back(std::stod(r[2]));
    CHECK(by_method["unfolded_pga"].size() == cfg.unfold_L + 1);
    CHECK(by_method["fully_digital"].size() == 1);
    CHECK(by_method["pga"].size() == 21);
    // shared init strategy and per-channel seeding -> identical iteration 0
    CHECK(by_method["pga"][0] ==
          doctest::Approx(by_method["unfolded_pga"][0]).epsilon(1e-12));
    // the small-step preset ascends monotonically
    const auto& small = by_method["pga_small"];
    REQUIRE(small.size() == 31);
    for (std::size_t i = 1; i < small.size(); ++i)
      CHECK(small[i] >= small[i - 1] - 1e-9);
  }

  cmd_robust(cfg);
  const CsvTable rob = read_csv(dir / "robust.csv");

  SUBCASE("robust error_var=0 rows equal the sweep at the same SNR") {
    std::map<std::string, double> sweep_at;
    for (std::size_t i = 0; i < sweep.rows.size(); ++i)
      sweep_at[sweep.rows[i][0]] = cell_d(sweep, i, 2);
    int checked = 0;
    for (const auto& r : rob.rows) {
      if (std::stod(r[1]) != 0.0) continue;
      if (sweep_at.count(r[0])) {
        CHECK(std::stod(r[2]) == doctest::Approx(sweep_at[r[0]]).epsilon(1e-9));
        ++checked;
      }
    }
    CHECK(checked == 2);  // pga and unfolded_pga
  }

  SUBCASE("robust grid must include zero") {
    ExperimentConfig bad = cfg;
    bad.robust.error_var_grid = {0.05};
    CHECK_THROWS_AS(cmd_robust(bad), std::invalid_argument);
  }

  SUBCASE("single-schedule ablation reuses one schedule across SNR points") {
    ExperimentConfig abl = cfg;
    abl.output_dir = (dir / "ablation").string();
    abl.dataset_path = ds_path.string();  // reuse the generated dataset
    abl.snr_grid_db = {5.0, 10.0};
    abl.schedule_snr_db = 10.0;
    abl.robust.trained_error_var = 0.0;
    cmd_train(abl);
    CHECK(fs::exists(dir / "ablation" / "schedules" / "unfolded_pga_snr10.json"));
    CHECK_FALSE(fs::exists(dir / "ablation" / "schedules" / "unfolded_pga_snr5.json"));
    const std::vector<SweepRow> ar = cmd_sweep(abl);
    int unfolded_rows = 0;
    for (const SweepRow& r : ar)
      if (r.method == "unfolded_pga") ++unfolded_rows;
    CHECK(unfolded_rows == 2);  // both SNR points served by the single schedule
  }

  SUBCASE("manifests record the run inputs") {
    for (const char* name : {"gen_manifest.json", "train_manifest.json",
                             "sweep_manifest.json", "convergence_manifest.json",
                             "robust_manifest.json"}) {
      const fs::path p = dir / name;
      REQUIRE(fs::exists(p));
      nlohmann::json j;
      std::ifstream(p) >> j;
      CHECK(j.contains("config_hash"));
      CHECK(j.contains("dataset_fingerprint"));
      CHECK(j.contains("toolkit_version"));
      CHECK(j.contains("timestamp_utc"));
      CHECK(j["split"]["train"].size() == 24);
      CHECK(j["split"]["eval"].size() == 6);
    }
    nlohmann::json j;
    std::ifstream(dir / "sweep_manifest.json") >> j;
    CHECK(j["schedule_fingerprints"].size() >= 2);
  }

  fs::remove_all(dir);
}
