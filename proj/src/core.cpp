#include "hybridbf/core.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hybridbf {

void SystemDims::validate() const {
  if (M <= 0 || K <= 0 || N <= 0 || F <= 0)
    throw std::invalid_argument("SystemDims: M, K, N, F must be positive");
  if (K > M) throw std::invalid_argument("SystemDims: K must not exceed M");
  if (N > M) throw std::invalid_argument("SystemDims: N must not exceed M");
  if (!(P > 0.0)) throw std::invalid_argument("SystemDims: P must be positive");
  if (!(noise_var > 0.0))
    throw std::invalid_argument("SystemDims: noise_var must be positive");
}

BoolMask connectivity_mask(int M, int K, Topology topology) {
  if (M <= 0 || K <= 0 || K > M)
    throw std::invalid_argument("connectivity_mask: need 0 < K <= M");
  BoolMask mask(M, K);
  if (topology == Topology::Fully) {
    mask.setConstant(true);
    return mask;
  }
  if (M % K != 0)
    throw std::invalid_argument(
        "connectivity_mask: partially connected requires K to divide M (M=" +
        std::to_string(M) + ", K=" + std::to_string(K) + ")");
  mask.setConstant(false);
  const int block = M / K;
  for (int k = 0; k < K; ++k)
    for (int r = 0; r < block; ++r) mask(k * block + r, k) = true;
  return mask;
}

ConstraintSet ConstraintSet::unit_modulus(int M, int K, Topology t) {
  ConstraintSet c;
  c.kind = ConstraintKind::UnitModulus;
  c.connectivity = connectivity_mask(M, K, t);
  return c;
}

ConstraintSet ConstraintSet::quantized_phase(int M, int K, int bits, Topology t) {
  ConstraintSet c;
  c.kind = ConstraintKind::QuantizedPhase;
  c.bits = bits;
  c.connectivity = connectivity_mask(M, K, t);
  c.validate();
  return c;
}

ConstraintSet ConstraintSet::vector_modulator(int M, int K,
                                              std::vector<Complex> codebook,
                                              Topology t) {
  ConstraintSet c;
  c.kind = ConstraintKind::VectorModulatorCodebook;
  c.codebook = std::move(codebook);
  c.connectivity = connectivity_mask(M, K, t);
  c.validate();
  return c;
}

ConstraintSet ConstraintSet::lorentzian_dma(int M, int K, Topology t) {
  ConstraintSet c;
  c.kind = ConstraintKind::LorentzianDMA;
  c.connectivity = connectivity_mask(M, K, t);
  return c;
}

void ConstraintSet::validate() const {
  if (kind == ConstraintKind::QuantizedPhase && bits < 1)
    throw std::invalid_argument("ConstraintSet: QuantizedPhase needs bits >= 1");
  if (kind == ConstraintKind::VectorModulatorCodebook && codebook.empty())
    throw std::invalid_argument("ConstraintSet: empty vector-modulator codebook");
  if (connectivity.size() > 0) {
    for (Eigen::Index r = 0; r < connectivity.rows(); ++r)
      if (!connectivity.row(r).any())
        throw std::invalid_argument(
            "ConstraintSet: connectivity mask has an all-zero row (unfed antenna)");
  }
}

namespace {

// Grid value for quantized-phase index b, recomputed identically everywhere
// so index-snapped projections are bit-stable.
inline Complex phase_grid_value(int b, int bits) {
  const double theta = 2.0 * M_PI * static_cast<double>(b) /
                       static_cast<double>(1 << bits);
  return {std::cos(theta), std::sin(theta)};
}

inline Complex project_unit_modulus(Complex w) {
  const double a = std::abs(w);
  if (a == 0.0) return {1.0, 0.0};
  if (std::abs(a - 1.0) <= kFeasibilityTol) return w;  // already feasible
  return w / a;
}

inline Complex project_quantized(Complex w, int bits) {
  const int n = 1 << bits;
  const double step = 2.0 * M_PI / n;
  double theta = std::arg(w);  // w == 0 -> 0 -> grid index 0
  if (theta < 0.0) theta += 2.0 * M_PI;
  const int k0 = std::min(static_cast<int>(theta / step), n - 1);
  // Two bracketing candidates; equal distances resolve to the lower index,
  // matching an exhaustive first-minimum scan.
  const int cand[2] = {k0, (k0 + 1) % n};
  int best = cand[0];
  double best_d = std::abs(w - phase_grid_value(cand[0], bits));
  const double d1 = std::abs(w - phase_grid_value(cand[1], bits));
  if (d1 < best_d || (d1 == best_d && cand[1] < best)) {
    best = cand[1];
  }
  return phase_grid_value(best, bits);
}

inline Complex project_codebook(Complex w, const std::vector<Complex>& cb) {
  std::size_t best = 0;
  double best_d = std::abs(w - cb[0]);
  for (std::size_t i = 1; i < cb.size(); ++i) {
    const double d = std::abs(w - cb[i]);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return cb[best];
}

// Circle {(j + e^{jt})/2}: center j/2, radius 1/2. Radial projection; the
// center maps to the t=0 point (1+j)/2.
inline Complex project_lorentzian(Complex w) {
  const Complex center{0.0, 0.5};
  const Complex d = w - center;
  const double a = std::abs(d);
  if (a == 0.0) return {0.5, 0.5};
  if (std::abs(a - 0.5) <= kFeasibilityTol) return w;
  return center + 0.5 * (d / a);
}

}  // namespace

Complex ConstraintSet::project_entry(Complex w) const {
  switch (kind) {
    case ConstraintKind::UnitModulus:
      return project_unit_modulus(w);
    case ConstraintKind::QuantizedPhase:
      return project_quantized(w, bits);
    case ConstraintKind::VectorModulatorCodebook:
      if (codebook.empty())
        throw std::invalid_argument("project_entry: empty codebook");
      return project_codebook(w, codebook);
    case ConstraintKind::LorentzianDMA:
      return project_lorentzian(w);
  }
  throw std::logic_error("project_entry: unknown constraint kind");
}

double ConstraintSet::entry_distance(Complex w) const {
  return std::abs(w - project_entry(w));
}

AnalogPrecoder project_analog(const CMat& W_raw, const ConstraintSet& c) {
  c.validate();
  if (!W_raw.allFinite())
    throw std::invalid_argument("project_analog: non-finite input");
  if (W_raw.rows() != c.connectivity.rows() || W_raw.cols() != c.connectivity.cols())
    throw std::invalid_argument("project_analog: shape does not match mask");
  AnalogPrecoder out;
  out.constraint = c;
  out.A.resize(W_raw.rows(), W_raw.cols());
  for (Eigen::Index j = 0; j < W_raw.cols(); ++j)
    for (Eigen::Index i = 0; i < W_raw.rows(); ++i)
      out.A(i, j) = c.connectivity(i, j) ? c.project_entry(W_raw(i, j))
                                         : Complex{0.0, 0.0};
  return out;
}

DigitalPrecoder project_power(const AnalogPrecoder& A, const DigitalPrecoder& D,
                              double P) {
  if (!(P > 0.0)) throw std::invalid_argument("project_power: P must be positive");
  DigitalPrecoder out;
  out.D.reserve(D.D.size());
  const double target = std::sqrt(P);
  for (std::size_t f = 0; f < D.D.size(); ++f) {
    const double norm = (A.A * D.D[f]).norm();
    if (norm == 0.0)
      throw std::runtime_error("project_power: zero effective precoder at subcarrier " +
                               std::to_string(f));
    out.D.push_back(D.D[f] * (target / norm));
  }
  return out;
}

CMat compose(const HybridPrecoder& h, int f) {
  if (f < 0 || static_cast<std::size_t>(f) >= h.digital.D.size())
    throw std::out_of_range("compose: subcarrier index out of range");
  return h.analog.A * h.digital.D[static_cast<std::size_t>(f)];
}

}  // namespace hybridbf
