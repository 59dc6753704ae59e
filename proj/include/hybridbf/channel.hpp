#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hybridbf/core.hpp"

namespace hybridbf {

/// Clustered geometric (Saleh-Valenzuela style) wideband mmWave channel
/// model. Each user sees n_clusters clusters of rays_per_cluster rays;
/// cluster delays induce the frequency selectivity across the F bins.
struct ChannelModelParams {
  int M = 12;
  int N = 4;
  int F = 16;
  double carrier_hz = 30e9;
  double bandwidth_hz = 100e6;
  int n_clusters = 3;
  int rays_per_cluster = 5;
  double angle_spread_rad = 0.1;
  double delay_spread_s = 30e-9;

  void validate() const;
};

/// One coherence block: H[f] is N x M, row u = user u's channel at bin f.
struct ChannelRealization {
  std::vector<CMat> H;

  /// Stable FNV-1a hash of the raw sample bytes; used to derive per-channel
  /// initialization seeds so results do not depend on dataset ordering.
  std::uint64_t content_hash() const;
};

struct ChannelDataset {
  ChannelModelParams params;
  std::uint64_t seed = 0;
  std::vector<ChannelRealization> realizations;
};

/// Unnormalized half-wavelength ULA steering vector, a_m = exp(j*pi*m*sin phi).
CVec steering_vector(int M, double phi_rad);

/// Baseband frequency of bin f on the inclusive grid spanning
/// [-bandwidth/2, +bandwidth/2] (0 when F == 1).
double bin_frequency_hz(const ChannelModelParams& p, int f);

ChannelRealization generate_channel(const ChannelModelParams& params,
                                    std::uint64_t rng_seed);

/// Realization i is generated from derive_seed(seed, i); content is therefore
/// independent of generation order.
ChannelDataset generate_dataset(const ChannelModelParams& params, int count,
                                std::uint64_t seed);

/// Adds i.i.d. circularly-symmetric complex Gaussian noise of the given
/// entry variance. error_var == 0 returns the input bit-exactly.
ChannelRealization corrupt_csi(const ChannelRealization& H, double error_var,
                               std::uint64_t rng_seed);

void save_dataset(const ChannelDataset& ds, const std::filesystem::path& path);
ChannelDataset load_dataset(const std::filesystem::path& path);

/// FNV-1a 64-bit fingerprint of the dataset's serialized content.
std::uint64_t dataset_fingerprint(const ChannelDataset& ds);

}  // namespace hybridbf
