#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hybridbf/channel.hpp"
#include "hybridbf/rng.hpp"

using namespace hybridbf;

namespace {

bool identical(const ChannelRealization& a, const ChannelRealization& b) {
  if (a.H.size() != b.H.size()) return false;
  for (std::size_t f = 0; f < a.H.size(); ++f)
    if (a.H[f] != b.H[f]) return false;
  return true;
}

ChannelModelParams small_params() {
  ChannelModelParams p;
  p.M = 8;
  p.N = 2;
  p.F = 4;
  return p;
}

std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("steering vector") {
  const CVec a = steering_vector(4, 0.0);
  for (int m = 0; m < 4; ++m) CHECK(std::abs(a(m) - Complex{1.0, 0.0}) < 1e-15);

  const CVec b = steering_vector(2, M_PI / 2.0);
  CHECK(std::abs(b(0) - Complex{1.0, 0.0}) < 1e-15);
  CHECK(std::abs(b(1) - Complex{-1.0, 0.0}) < 1e-12);

  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const CVec v = steering_vector(7, rng.uniform(-M_PI, M_PI));
    for (int m = 0; m < 7; ++m) CHECK(std::abs(std::abs(v(m)) - 1.0) < 1e-14);
  }

  CHECK_THROWS_AS(steering_vector(0, 0.0), std::invalid_argument);
}

TEST_CASE("single-path channel structure") {
  ChannelModelParams p = small_params();
  p.n_clusters = 1;
  p.rays_per_cluster = 1;
  p.angle_spread_rad = 0.0;
  p.delay_spread_s = 0.0;
  const ChannelRealization ch = generate_channel(p, 99);
  // One boresight-free path: every row is alpha * a(phi)^H, so entries share
  // a common modulus and all bins coincide.
  for (int f = 1; f < p.F; ++f) CHECK((ch.H[f] - ch.H[0]).norm() < 1e-14);
  for (int u = 0; u < p.N; ++u) {
    const double mag = std::abs(ch.H[0](u, 0));
    for (int m = 1; m < p.M; ++m)
      CHECK(std::abs(ch.H[0](u, m)) == doctest::Approx(mag).epsilon(1e-12));
  }
}

TEST_CASE("channel normalization (Monte-Carlo oracle)") {
  const ChannelModelParams p = small_params();  // default 3 clusters, 5 rays
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i < 1300; ++i) {
    const ChannelRealization ch = generate_channel(p, derive_seed(500, i));
    for (const CMat& Hf : ch.H)
      for (int u = 0; u < p.N; ++u) {
        acc += Hf.row(u).squaredNorm();
        ++count;
      }
  }
  CHECK(count >= 10000);
  const double mean = acc / count;
  CHECK(mean >= 0.97 * p.M);
  CHECK(mean <= 1.03 * p.M);
}

TEST_CASE("frequency selectivity") {
  ChannelModelParams p = small_params();
  SUBCASE("zero delay spread -> flat") {
    p.delay_spread_s = 0.0;
    const ChannelRealization ch = generate_channel(p, 42);
    for (int u = 0; u < p.N; ++u) {
      const auto h1 = ch.H[0].row(u), hF = ch.H[p.F - 1].row(u);
      const double corr = std::abs((h1 * hF.adjoint())(0, 0)) / (h1.norm() * hF.norm());
      CHECK(std::abs(corr - 1.0) < 1e-9);
    }
  }
  SUBCASE("positive delay spread -> selective") {
    double corr_sum = 0.0;
    int n = 0;
    for (int i = 0; i < 50; ++i) {
      const ChannelRealization ch = generate_channel(p, derive_seed(7000, i));
      for (int u = 0; u < p.N; ++u) {
        const auto h1 = ch.H[0].row(u), hF = ch.H[p.F - 1].row(u);
        corr_sum += std::abs((h1 * hF.adjoint())(0, 0)) / (h1.norm() * hF.norm());
        ++n;
      }
    }
    CHECK(corr_sum / n < 1.0 - 1e-3);
  }
}

TEST_CASE("determinism and counter-based dataset seeding") {
  const ChannelModelParams p = small_params();
  CHECK(identical(generate_channel(p, 1234), generate_channel(p, 1234)));

  const ChannelDataset a = generate_dataset(p, 3, 7);
  const ChannelDataset b = generate_dataset(p, 6, 7);
  CHECK(identical(a.realizations[1], b.realizations[1]));
  CHECK(identical(a.realizations[2], b.realizations[2]));

  const ChannelDataset c = generate_dataset(p, 3, 8);
  CHECK_FALSE(identical(a.realizations[0], c.realizations[0]));

  CHECK_THROWS_AS(generate_dataset(p, 0, 7), std::invalid_argument);
}

TEST_CASE("corrupt_csi") {
  const ChannelModelParams p = small_params();
  const ChannelRealization ch = generate_channel(p, 5);

  SUBCASE("zero variance is exact identity") {
    CHECK(identical(corrupt_csi(ch, 0.0, 9), ch));
  }
  SUBCASE("same seed, same corruption") {
    CHECK(identical(corrupt_csi(ch, 0.1, 9), corrupt_csi(ch, 0.1, 9)));
    CHECK_FALSE(identical(corrupt_csi(ch, 0.1, 9), corrupt_csi(ch, 0.1, 10)));
  }
  SUBCASE("empirical variance (Monte-Carlo oracle)") {
    const double var = 0.04;
    double acc = 0.0;
    long n = 0;
    for (int i = 0; i < 1600; ++i) {
      const ChannelRealization noisy = corrupt_csi(ch, var, derive_seed(100, i));
      for (std::size_t f = 0; f < ch.H.size(); ++f) {
        const CMat E = noisy.H[f] - ch.H[f];
        acc += E.squaredNorm();
        n += E.size();
      }
    }
    CHECK(n >= 100000);
    const double emp = acc / n;
    CHECK(emp >= 0.97 * var);
    CHECK(emp <= 1.03 * var);
  }
  SUBCASE("negative variance rejected") {
    CHECK_THROWS_AS(corrupt_csi(ch, -0.1, 1), std::invalid_argument);
  }
}

TEST_CASE("dataset persistence round-trips losslessly") {
  const ChannelModelParams p = small_params();
  const ChannelDataset ds = generate_dataset(p, 4, 77);
  const auto path = tmp_file("hbf_test_dataset.bin");
  save_dataset(ds, path);
  const ChannelDataset back = load_dataset(path);
  CHECK(back.seed == ds.seed);
  CHECK(back.params.M == p.M);
  CHECK(back.params.delay_spread_s == p.delay_spread_s);
  REQUIRE(back.realizations.size() == ds.realizations.size());
  for (std::size_t i = 0; i < ds.realizations.size(); ++i)
    CHECK(identical(back.realizations[i], ds.realizations[i]));
  CHECK(dataset_fingerprint(back) == dataset_fingerprint(ds));
  std::filesystem::remove(path);
}

TEST_CASE("malformed dataset files are rejected") {
  const ChannelModelParams p = small_params();
  const ChannelDataset ds = generate_dataset(p, 2, 1);
  const auto path = tmp_file("hbf_test_dataset2.bin");
  save_dataset(ds, path);

  SUBCASE("truncated") {
    const auto sz = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, sz / 2);
    CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  }
  SUBCASE("wrong magic") {
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.write("NOTMAGIC", 8);
    fs.close();
    CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  }
  SUBCASE("version mismatch") {
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.seekp(8);
    const std::uint32_t bad = 999;
    fs.write(reinterpret_cast<const char*>(&bad), sizeof(bad));
    fs.close();
    CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  }
  std::filesystem::remove(path);
}
