#include "hybridbf/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace hybridbf {

namespace {

constexpr double kLn2 = 0.6931471805599453;

// log2 det(I + T T^H / noise_var) via Cholesky; the argument is Hermitian
// positive definite by construction, so LLT cannot fail.
double log2det_capacity(const CMat& T, double noise_var) {
  const Eigen::Index N = T.rows();
  CMat C = CMat::Identity(N, N) + (T * T.adjoint()) / noise_var;
  Eigen::LLT<CMat> llt(C);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sum_rate: Cholesky failed on non-finite input");
  double ld = 0.0;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < N; ++i) ld += std::log(L(i, i).real());
  return 2.0 * ld / kLn2;
}

}  // namespace

double sum_rate(const ChannelRealization& H, const std::vector<CMat>& W,
                double noise_var) {
  if (!(noise_var > 0.0))
    throw std::invalid_argument("sum_rate: noise_var must be positive");
  if (H.H.size() != W.size())
    throw std::invalid_argument("sum_rate: subcarrier count mismatch");
  const int F = static_cast<int>(H.H.size());
  double r = 0.0;
  for (int f = 0; f < F; ++f) {
    if (!W[f].allFinite())
      throw std::invalid_argument("sum_rate: non-finite precoder");
    r += log2det_capacity(H.H[f] * W[f], noise_var);
  }
  return r / F;
}

RateGradient rate_gradient(const ChannelRealization& H, const AnalogPrecoder& A,
                           const DigitalPrecoder& D, double noise_var) {
  const int F = static_cast<int>(H.H.size());
  if (static_cast<int>(D.D.size()) != F)
    throw std::invalid_argument("rate_gradient: subcarrier count mismatch");
  const Eigen::Index M = A.A.rows(), K = A.A.cols();
  const Eigen::Index N = H.H[0].rows();

  RateGradient g;
  g.G_A = CMat::Zero(M, K);
  g.G_D.reserve(F);
  const double scale = 1.0 / (F * noise_var * kLn2);
  for (int f = 0; f < F; ++f) {
    const CMat W = A.A * D.D[f];
    const CMat T = H.H[f] * W;  // N x N
    CMat C = CMat::Identity(N, N) + (T * T.adjoint()) / noise_var;
    // I + PSD is positive definite; the solve is always well posed.
    const CMat X = Eigen::LLT<CMat>(C).solve(T);
    const CMat G = scale * (H.H[f].adjoint() * X);  // M x N
    g.G_D.push_back(A.A.adjoint() * G);
    g.G_A.noalias() += G * D.D[f].adjoint();
  }
  const BoolMask& mask = A.constraint.connectivity;
  for (Eigen::Index j = 0; j < K; ++j)
    for (Eigen::Index i = 0; i < M; ++i)
      if (!mask(i, j)) g.G_A(i, j) = Complex{0.0, 0.0};
  return g;
}

RateReport per_user_report(const ChannelRealization& H, const std::vector<CMat>& W,
                           double noise_var) {
  const int F = static_cast<int>(H.H.size());
  const Eigen::Index N = H.H[0].rows();
  RateReport rep;
  rep.per_user_rate.assign(N, 0.0);
  double min_sinr = std::numeric_limits<double>::infinity();
  for (int f = 0; f < F; ++f) {
    const CMat T = H.H[f] * W[f];  // T(u, v) = h_u . w_v
    for (Eigen::Index u = 0; u < N; ++u) {
      const double sig = std::norm(T(u, u));
      double interf = 0.0;
      for (Eigen::Index v = 0; v < N; ++v)
        if (v != u) interf += std::norm(T(u, v));
      const double sinr = sig / (interf + noise_var);
      rep.per_user_rate[u] += std::log2(1.0 + sinr) / F;
      min_sinr = std::min(min_sinr, sinr);
    }
  }
  rep.min_sinr_db = 10.0 * std::log10(min_sinr);
  rep.sum_rate = sum_rate(H, W, noise_var);
  return rep;
}

std::vector<double> waterfill(const std::vector<double>& gains, double P) {
  if (!(P > 0.0)) throw std::invalid_argument("waterfill: P must be positive");
  const int n = static_cast<int>(gains.size());
  std::vector<int> active;
  for (int i = 0; i < n; ++i) {
    if (gains[i] < 0.0) throw std::invalid_argument("waterfill: negative gain");
    if (gains[i] > 0.0) active.push_back(i);
  }
  if (active.empty()) throw std::invalid_argument("waterfill: all gains are zero");

  // Sorted closed form: with inverse gains a_i ascending, the water level for
  // k active channels is nu = (P + sum_{i<=k} a_i)/k; take the largest k with
  // nu > a_k.
  std::sort(active.begin(), active.end(),
            [&](int i, int j) { return 1.0 / gains[i] < 1.0 / gains[j]; });
  std::vector<double> p(n, 0.0);
  double prefix = 0.0;
  std::vector<double> prefix_sums(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    prefix += 1.0 / gains[active[k]];
    prefix_sums[k] = prefix;
  }
  for (std::size_t k = active.size(); k >= 1; --k) {
    const double nu = (P + prefix_sums[k - 1]) / static_cast<double>(k);
    if (nu > 1.0 / gains[active[k - 1]]) {
      for (std::size_t i = 0; i < k; ++i)
        p[active[i]] = nu - 1.0 / gains[active[i]];
      return p;
    }
  }
  // Unreachable: k = 1 always satisfies nu = P + a_1 > a_1 for P > 0.
  throw std::logic_error("waterfill: no feasible water level");
}

std::pair<FullyDigitalPrecoder, RateReport> fully_digital_reference(
    const ChannelRealization& H, double P, double noise_var) {
  const int F = static_cast<int>(H.H.size());
  const Eigen::Index N = H.H[0].rows(), M = H.H[0].cols();
  if (N > M)
    throw std::invalid_argument("fully_digital_reference: needs N <= M");
  FullyDigitalPrecoder fd;
  fd.W.reserve(F);
  for (int f = 0; f < F; ++f) {
    const CMat& Hf = H.H[f];
    CMat gram = Hf * Hf.adjoint();  // N x N
    Eigen::LLT<CMat> llt(gram);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("fully_digital_reference: rank-deficient channel");
    CMat W0 = Hf.adjoint() * llt.solve(CMat::Identity(N, N));  // H W0 = I
    std::vector<double> g(N);
    for (Eigen::Index u = 0; u < N; ++u) {
      const double cn = W0.col(u).norm();
      if (!(cn > 0.0) || !std::isfinite(cn))
        throw std::runtime_error("fully_digital_reference: degenerate ZF column");
      W0.col(u) /= cn;
      g[static_cast<std::size_t>(u)] = 1.0 / (cn * cn * noise_var);
    }
    const std::vector<double> p = waterfill(g, P);
    for (Eigen::Index u = 0; u < N; ++u)
      W0.col(u) *= std::sqrt(p[static_cast<std::size_t>(u)]);
    W0 *= std::sqrt(P) / W0.norm();
    fd.W.push_back(std::move(W0));
  }
  RateReport rep = per_user_report(H, fd.W, noise_var);
  return {std::move(fd), std::move(rep)};
}

}  // namespace hybridbf
