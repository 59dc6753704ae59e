#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace hybridbf {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Feasible-set snap tolerance: an entry within this distance of the
/// feasible set is treated as already feasible (matches the AnalogPrecoder
/// invariant and makes continuous projections exactly idempotent).
inline constexpr double kFeasibilityTol = 1e-12;

/// System dimensions and power budget for one benchmark configuration.
/// M antennas, K RF chains, N single-antenna users, F subcarriers,
/// P transmit power per subcarrier (linear), noise_var per-user noise power.
struct SystemDims {
  int M = 0;
  int K = 0;
  int N = 0;
  int F = 1;
  double P = 1.0;
  double noise_var = 1.0;

  void validate() const;
  double snr_db() const { return 10.0 * std::log10(P / noise_var); }
};

enum class ConstraintKind {
  UnitModulus,
  QuantizedPhase,
  VectorModulatorCodebook,
  LorentzianDMA,
};

enum class Topology { Fully, Partially };

/// All-ones for fully connected; contiguous M/K-row blocks per chain for
/// partially connected. Throws std::invalid_argument if K does not divide M
/// in the partially connected case.
BoolMask connectivity_mask(int M, int K, Topology topology);

/// Per-entry feasible set of the analog hardware plus the antenna/chain
/// connectivity mask. Entries outside the mask are forced to zero.
struct ConstraintSet {
  ConstraintKind kind = ConstraintKind::UnitModulus;
  int bits = 0;                    // QuantizedPhase: grid {e^{j2пb/2^B}}
  std::vector<Complex> codebook;   // VectorModulatorCodebook
  BoolMask connectivity;

  static ConstraintSet unit_modulus(int M, int K, Topology t = Topology::Fully);
  static ConstraintSet quantized_phase(int M, int K, int bits,
                                       Topology t = Topology::Fully);
  static ConstraintSet vector_modulator(int M, int K, std::vector<Complex> codebook,
                                        Topology t = Topology::Fully);
  static ConstraintSet lorentzian_dma(int M, int K, Topology t = Topology::Fully);

  void validate() const;

  /// Euclidean-nearest feasible value for one entry (mask ignored).
  Complex project_entry(Complex w) const;

  /// Euclidean distance from w to the per-entry feasible set.
  double entry_distance(Complex w) const;

  int rows() const { return static_cast<int>(connectivity.rows()); }
  int cols() const { return static_cast<int>(connectivity.cols()); }
};

/// Hardware-constrained analog precoder A (M x K), shared by all subcarriers.
struct AnalogPrecoder {
  CMat A;
  ConstraintSet constraint;
};

/// Per-subcarrier digital precoders D_f (K x N), f = 0..F-1.
struct DigitalPrecoder {
  std::vector<CMat> D;
};

struct HybridPrecoder {
  AnalogPrecoder analog;
  DigitalPrecoder digital;
};

/// Entrywise Euclidean nearest-point projection onto the constraint set;
/// masked-out entries are set to exactly zero. Ties break toward the lower
/// grid/codebook index (and toward 1+0j / (1+j)/2 for the continuous kinds).
AnalogPrecoder project_analog(const CMat& W_raw, const ConstraintSet& c);

/// Scales every D_f so that ||A*D_f||_F^2 == P (equality projection).
/// Throws std::runtime_error if some A*D_f is zero.
DigitalPrecoder project_power(const AnalogPrecoder& A, const DigitalPrecoder& D,
                              double P);

/// Effective precoder W_f = A * D_f. Throws std::out_of_range on bad f.
CMat compose(const HybridPrecoder& h, int f);

}  // namespace hybridbf
