#include "hybridbf/channel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hybridbf/rng.hpp"

namespace hybridbf {

namespace {
constexpr char kMagic[8] = {'H', 'B', 'F', 'D', 'S', 'E', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

void ChannelModelParams::validate() const {
  if (M <= 0 || N <= 0 || F <= 0)
    throw std::invalid_argument("ChannelModelParams: M, N, F must be positive");
  if (n_clusters < 1 || rays_per_cluster < 1)
    throw std::invalid_argument("ChannelModelParams: need >= 1 cluster and ray");
  if (!(carrier_hz > 0.0) || !(bandwidth_hz > 0.0))
    throw std::invalid_argument("ChannelModelParams: carrier/bandwidth must be positive");
  if (angle_spread_rad < 0.0 || delay_spread_s < 0.0)
    throw std::invalid_argument("ChannelModelParams: spreads must be non-negative");
}

std::uint64_t ChannelRealization::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const CMat& Hf : H) {
    h = fnv1a64(Hf.data(), sizeof(Complex) * static_cast<std::size_t>(Hf.size()), h);
  }
  return h;
}

CVec steering_vector(int M, double phi_rad) {
  if (M < 1) throw std::invalid_argument("steering_vector: M must be >= 1");
  CVec a(M);
  const double s = std::sin(phi_rad);
  for (int m = 0; m < M; ++m) {
    const double t = M_PI * m * s;
    a(m) = Complex{std::cos(t), std::sin(t)};
  }
  return a;
}

double bin_frequency_hz(const ChannelModelParams& p, int f) {
  if (p.F == 1) return 0.0;
  return -0.5 * p.bandwidth_hz +
         p.bandwidth_hz * static_cast<double>(f) / static_cast<double>(p.F - 1);
}

ChannelRealization generate_channel(const ChannelModelParams& params,
                                    std::uint64_t rng_seed) {
  params.validate();
  Rng rng(rng_seed);
  const int M = params.M, N = params.N, F = params.F;
  const int C = params.n_clusters, R = params.rays_per_cluster;

  ChannelRealization out;
  out.H.assign(F, CMat::Zero(N, M));

  // Unit-norm steering inside the sum so that E[||h_{u,f}||^2] = M.
  const double scale = std::sqrt(static_cast<double>(M) / (C * R)) /
                       std::sqrt(static_cast<double>(M));
  for (int u = 0; u < N; ++u) {
    for (int c = 0; c < C; ++c) {
      const double phi = rng.uniform(-M_PI / 2.0, M_PI / 2.0);
      const double tau = rng.exponential(params.delay_spread_s);
      for (int p = 0; p < R; ++p) {
        const Complex alpha = rng.cgaussian();
        const double delta = params.angle_spread_rad * rng.gaussian();
        const CVec a = steering_vector(M, phi + delta);
        for (int f = 0; f < F; ++f) {
          const double phase = -2.0 * M_PI * tau * bin_frequency_hz(params, f);
          const Complex g = scale * alpha * Complex{std::cos(phase), std::sin(phase)};
          // row u += g * a^H
          for (int m = 0; m < M; ++m) out.H[f](u, m) += g * std::conj(a(m));
        }
      }
    }
  }
  return out;
}

ChannelDataset generate_dataset(const ChannelModelParams& params, int count,
                                std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  params.validate();
  ChannelDataset ds;
  ds.params = params;
  ds.seed = seed;
  ds.realizations.reserve(count);
  for (int i = 0; i < count; ++i)
    ds.realizations.push_back(
        generate_channel(params, derive_seed(seed, static_cast<std::uint64_t>(i))));
  return ds;
}

ChannelRealization corrupt_csi(const ChannelRealization& H, double error_var,
                               std::uint64_t rng_seed) {
  if (error_var < 0.0)
    throw std::invalid_argument("corrupt_csi: negative error variance");
  if (error_var == 0.0) return H;
  Rng rng(rng_seed);
  const double s = std::sqrt(error_var);
  ChannelRealization out;
  out.H.reserve(H.H.size());
  for (const CMat& Hf : H.H) {
    CMat E(Hf.rows(), Hf.cols());
    for (Eigen::Index j = 0; j < E.cols(); ++j)
      for (Eigen::Index i = 0; i < E.rows(); ++i) E(i, j) = s * rng.cgaussian();
    out.H.push_back(Hf + E);
  }
  return out;
}

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("dataset file truncated");
  return v;
}

void serialize_dataset(std::ostream& os, const ChannelDataset& ds) {
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kFormatVersion);
  write_pod(os, static_cast<std::uint32_t>(ds.params.M));
  write_pod(os, static_cast<std::uint32_t>(ds.params.N));
  write_pod(os, static_cast<std::uint32_t>(ds.params.F));
  write_pod(os, ds.params.carrier_hz);
  write_pod(os, ds.params.bandwidth_hz);
  write_pod(os, static_cast<std::uint32_t>(ds.params.n_clusters));
  write_pod(os, static_cast<std::uint32_t>(ds.params.rays_per_cluster));
  write_pod(os, ds.params.angle_spread_rad);
  write_pod(os, ds.params.delay_spread_s);
  write_pod(os, ds.seed);
  write_pod(os, static_cast<std::uint64_t>(ds.realizations.size()));
  for (const ChannelRealization& ch : ds.realizations) {
    for (const CMat& Hf : ch.H) {
      // (realization, f, row, column) order, interleaved (re, im) f64.
      for (Eigen::Index r = 0; r < Hf.rows(); ++r)
        for (Eigen::Index c = 0; c < Hf.cols(); ++c) {
          write_pod(os, Hf(r, c).real());
          write_pod(os, Hf(r, c).imag());
        }
    }
  }
}

}  // namespace

void save_dataset(const ChannelDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path.string());
  serialize_dataset(os, ds);
  if (!os) throw std::runtime_error("save_dataset: write failed for " + path.string());
}

ChannelDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_dataset: bad magic header");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kFormatVersion)
    throw std::runtime_error("load_dataset: unsupported format version " +
                             std::to_string(version));
  ChannelDataset ds;
  ds.params.M = static_cast<int>(read_pod<std::uint32_t>(is));
  ds.params.N = static_cast<int>(read_pod<std::uint32_t>(is));
  ds.params.F = static_cast<int>(read_pod<std::uint32_t>(is));
  ds.params.carrier_hz = read_pod<double>(is);
  ds.params.bandwidth_hz = read_pod<double>(is);
  ds.params.n_clusters = static_cast<int>(read_pod<std::uint32_t>(is));
  ds.params.rays_per_cluster = static_cast<int>(read_pod<std::uint32_t>(is));
  ds.params.angle_spread_rad = read_pod<double>(is);
  ds.params.delay_spread_s = read_pod<double>(is);
  ds.params.validate();
  ds.seed = read_pod<std::uint64_t>(is);
  const auto count = read_pod<std::uint64_t>(is);
  ds.realizations.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    ChannelRealization ch;
    ch.H.reserve(ds.params.F);
    for (int f = 0; f < ds.params.F; ++f) {
      CMat Hf(ds.params.N, ds.params.M);
      for (Eigen::Index r = 0; r < Hf.rows(); ++r)
        for (Eigen::Index c = 0; c < Hf.cols(); ++c) {
          const double re = read_pod<double>(is);
          const double im = read_pod<double>(is);
          Hf(r, c) = Complex{re, im};
        }
      ch.H.push_back(std::move(Hf));
    }
    ds.realizations.push_back(std::move(ch));
  }
  return ds;
}

std::uint64_t dataset_fingerprint(const ChannelDataset& ds) {
  std::ostringstream os(std::ios::binary);
  serialize_dataset(os, ds);
  const std::string bytes = os.str();
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace hybridbf
