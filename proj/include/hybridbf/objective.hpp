#pragma once

#include <utility>
#include <vector>

#include "hybridbf/channel.hpp"
#include "hybridbf/core.hpp"

namespace hybridbf {

struct RateReport {
  double sum_rate = 0.0;                // log-det objective, bits/s/Hz
  std::vector<double> per_user_rate;    // interference-as-noise rates
  double min_sinr_db = 0.0;
};

/// Unconstrained per-subcarrier reference precoders with ||W_f||_F^2 = P.
struct FullyDigitalPrecoder {
  std::vector<CMat> W;
};

/// R = (1/F) sum_f log2 det(I_N + (1/noise_var) H_f W_f W_f^H H_f^H),
/// evaluated through a Cholesky factorization of the Hermitian Gram form.
double sum_rate(const ChannelRealization& H, const std::vector<CMat>& W,
                double noise_var);

struct RateGradient {
  CMat G_A;                 // M x K, masked by the connectivity mask
  std::vector<CMat> G_D;    // F of K x N
};

/// Conjugate-Wirtinger gradients of sum_rate w.r.t. A and D_f at W_f = A D_f.
/// The real directional derivative along a perturbation dX is 2 Re<G, dX>.
RateGradient rate_gradient(const ChannelRealization& H, const AnalogPrecoder& A,
                           const DigitalPrecoder& D, double noise_var);

/// Per-user SINR rates (interference treated as noise) plus the worst SINR;
/// the sum_rate field repeats the log-det objective, not the SINR-rate sum.
RateReport per_user_report(const ChannelRealization& H, const std::vector<CMat>& W,
                           double noise_var);

/// p_i = max(nu - 1/g_i, 0) with nu chosen so sum p_i = P.
/// Throws std::invalid_argument on all-zero gains.
std::vector<double> waterfill(const std::vector<double>& gains, double P);

/// Zero-forcing directions (unit-norm columns of H^H (H H^H)^{-1}) with
/// water-filled powers, normalized to ||W_f||_F^2 = P per subcarrier.
std::pair<FullyDigitalPrecoder, RateReport> fully_digital_reference(
    const ChannelRealization& H, double P, double noise_var);

}  // namespace hybridbf
