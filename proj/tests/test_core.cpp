#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hybridbf/core.hpp"
#include "hybridbf/rng.hpp"

using namespace hybridbf;

namespace {

bool bit_equal(Complex a, Complex b) {
  return a.real() == b.real() && a.imag() == b.imag();
}

// Independent nearest-point oracle: first strict minimum over a candidate set.
Complex nearest_of(Complex w, const std::vector<Complex>& candidates) {
  std::size_t best = 0;
  double best_d = std::abs(w - candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double d = std::abs(w - candidates[i]);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return candidates[best];
}

Complex random_complex(Rng& rng, double scale = 2.0) {
  return Complex{rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
}

}  // namespace

TEST_CASE("SystemDims validation") {
  SystemDims d{12, 4, 4, 16, 10.0, 1.0};
  CHECK_NOTHROW(d.validate());
  CHECK(d.snr_db() == doctest::Approx(10.0));
  SystemDims bad = d;
  bad.K = 13;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.noise_var = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("connectivity masks") {
  const BoolMask part = connectivity_mask(4, 2, Topology::Partially);
  // rows 1-2 feed chain 1, rows 3-4 feed chain 2
  CHECK(part(0, 0));
  CHECK(part(1, 0));
  CHECK(part(2, 1));
  CHECK(part(3, 1));
  CHECK_FALSE(part(0, 1));
  CHECK_FALSE(part(3, 0));

  const BoolMask full = connectivity_mask(2, 2, Topology::Fully);
  CHECK(full.all());

  CHECK_THROWS_AS(connectivity_mask(3, 2, Topology::Partially), std::invalid_argument);
}

TEST_CASE("project_analog entry examples") {
  const ConstraintSet um = ConstraintSet::unit_modulus(1, 1);
  const AnalogPrecoder p = project_analog(CMat::Constant(1, 1, Complex{3.0, 4.0}), um);
  CHECK(p.A(0, 0).real() == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(p.A(0, 0).imag() == doctest::Approx(0.8).epsilon(1e-12));

  const ConstraintSet qp = ConstraintSet::quantized_phase(1, 1, 1);
  const AnalogPrecoder q = project_analog(CMat::Constant(1, 1, Complex{-2.0, 0.1}), qp);
  CHECK(q.A(0, 0).real() == doctest::Approx(-1.0));
  CHECK(std::abs(q.A(0, 0).imag()) < 1e-12);

  const ConstraintSet lo = ConstraintSet::lorentzian_dma(1, 1);
  const AnalogPrecoder l = project_analog(CMat::Constant(1, 1, Complex{1.0, 0.5}), lo);
  CHECK(l.A(0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(l.A(0, 0).imag() == doctest::Approx(0.5).epsilon(1e-12));

  // 0 already lies on the Lorentzian circle (theta = 3pi/2)
  const AnalogPrecoder z = project_analog(CMat::Zero(1, 1), lo);
  CHECK(std::abs(z.A(0, 0)) < 1e-15);

  CHECK_THROWS_AS(ConstraintSet::vector_modulator(1, 1, {}), std::invalid_argument);
}

TEST_CASE("projection ties and mask zeroing") {
  const ConstraintSet um = ConstraintSet::unit_modulus(1, 1);
  CHECK(bit_equal(um.project_entry({0.0, 0.0}), {1.0, 0.0}));

  const ConstraintSet lo = ConstraintSet::lorentzian_dma(1, 1);
  CHECK(bit_equal(lo.project_entry({0.0, 0.5}), {0.5, 0.5}));  // center -> theta = 0

  ConstraintSet part = ConstraintSet::unit_modulus(4, 2, Topology::Partially);
  CMat W = CMat::Constant(4, 2, Complex{1.0, 1.0});
  const AnalogPrecoder p = project_analog(W, part);
  CHECK(p.A(0, 1) == Complex{0.0, 0.0});
  CHECK(p.A(3, 0) == Complex{0.0, 0.0});
  CHECK(std::abs(std::abs(p.A(0, 0)) - 1.0) < 1e-15);

  CHECK_THROWS_AS(project_analog(CMat::Constant(1, 1, Complex{NAN, 0.0}), um),
                  std::invalid_argument);
}

TEST_CASE("projection idempotence is exact for all kinds") {
  Rng rng(7);
  std::vector<Complex> cb;
  for (int i = 0; i < 9; ++i) cb.push_back(random_complex(rng));
  const std::vector<ConstraintSet> kinds = {
      ConstraintSet::unit_modulus(1, 1),
      ConstraintSet::quantized_phase(1, 1, 3),
      ConstraintSet::vector_modulator(1, 1, cb),
      ConstraintSet::lorentzian_dma(1, 1),
  };
  for (const ConstraintSet& c : kinds) {
    for (int t = 0; t < 500; ++t) {
      const Complex w = random_complex(rng, 3.0);
      const Complex p1 = c.project_entry(w);
      const Complex p2 = c.project_entry(p1);
      CHECK(bit_equal(p1, p2));
    }
  }
}

TEST_CASE("discrete projections match exhaustive search") {
  Rng rng(11);
  for (int bits = 1; bits <= 6; ++bits) {
    std::vector<Complex> grid;
    for (int b = 0; b < (1 << bits); ++b)
      grid.push_back(std::polar(1.0, 2.0 * M_PI * b / (1 << bits)));
    const ConstraintSet c = ConstraintSet::quantized_phase(1, 1, bits);
    for (int t = 0; t < 300; ++t) {
      const Complex w = random_complex(rng, 2.5);
      const Complex got = c.project_entry(w);
      const Complex want = nearest_of(w, grid);
      CHECK(std::abs(got - want) < 1e-15);
    }
  }
  // codebooks up to 64 entries
  for (int size : {1, 2, 17, 64}) {
    std::vector<Complex> cb;
    for (int i = 0; i < size; ++i) cb.push_back(random_complex(rng));
    const ConstraintSet c = ConstraintSet::vector_modulator(1, 1, cb);
    for (int t = 0; t < 300; ++t) {
      const Complex w = random_complex(rng, 2.5);
      CHECK(bit_equal(c.project_entry(w), nearest_of(w, cb)));
    }
  }
}

TEST_CASE("continuous projections beat random feasible points") {
  Rng rng(13);
  const ConstraintSet um = ConstraintSet::unit_modulus(1, 1);
  const ConstraintSet lo = ConstraintSet::lorentzian_dma(1, 1);
  for (int t = 0; t < 20; ++t) {
    const Complex w = random_complex(rng, 2.0);
    const double d_um = std::abs(w - um.project_entry(w));
    const double d_lo = std::abs(w - lo.project_entry(w));
    for (int s = 0; s < 10000; ++s) {
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      const Complex on_circle = std::polar(1.0, theta);
      const Complex on_lorentz = Complex{0.0, 0.5} + 0.5 * std::polar(1.0, theta);
      CHECK(std::abs(w - on_circle) >= d_um - 1e-9);
      CHECK(std::abs(w - on_lorentz) >= d_lo - 1e-9);
    }
  }
}

TEST_CASE("feasibility invariant after projection") {
  Rng rng(17);
  const ConstraintSet c = ConstraintSet::quantized_phase(6, 3, 2, Topology::Partially);
  CMat W(6, 3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 6; ++i) W(i, j) = random_complex(rng);
  const AnalogPrecoder p = project_analog(W, c);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 6; ++i) {
      if (c.connectivity(i, j))
        CHECK(c.entry_distance(p.A(i, j)) <= 1e-12);
      else
        CHECK(p.A(i, j) == Complex{0.0, 0.0});
    }
}

TEST_CASE("project_power examples and invariant") {
  // scalar: A = I (1x1), D = [2], P = 1 -> D = [1]
  AnalogPrecoder A{CMat::Identity(1, 1), ConstraintSet::unit_modulus(1, 1)};
  DigitalPrecoder D{{CMat::Constant(1, 1, Complex{2.0, 0.0})}};
  const DigitalPrecoder scaled = project_power(A, D, 1.0);
  CHECK(scaled.D[0](0, 0).real() == doctest::Approx(1.0));

  // already at the right power -> unchanged
  DigitalPrecoder unit{{CMat::Constant(1, 1, Complex{1.0, 0.0})}};
  const DigitalPrecoder same = project_power(A, unit, 1.0);
  CHECK(bit_equal(same.D[0](0, 0), unit.D[0](0, 0)));

  // orthonormal analog columns: ||A D||_F = ||D||_F
  Rng rng(23);
  CMat Q = CMat::Random(4, 2);
  const Eigen::HouseholderQR<CMat> qr(Q);
  CMat ortho = qr.householderQ() * CMat::Identity(4, 2);
  AnalogPrecoder Ao{ortho, ConstraintSet::unit_modulus(4, 2)};
  CMat D1(2, 2);
  D1 << Complex{2.0, 0.0}, 0, 0, 0;
  const DigitalPrecoder half = project_power(Ao, DigitalPrecoder{{D1}}, 1.0);
  CHECK((half.D[0] - D1 / 2.0).norm() < 1e-12);

  // power equality within 1e-9 relative on random inputs
  for (int t = 0; t < 50; ++t) {
    CMat Ar(5, 3), Dr(3, 2);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 5; ++i) Ar(i, j) = random_complex(rng);
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 3; ++i) Dr(i, j) = random_complex(rng);
    AnalogPrecoder Ra{Ar, ConstraintSet::unit_modulus(5, 3)};
    const double P = 2.5;
    const DigitalPrecoder out = project_power(Ra, DigitalPrecoder{{Dr}}, P);
    const double e = (Ra.A * out.D[0]).squaredNorm();
    CHECK(std::abs(e - P) / P <= 1e-9);
  }

  DigitalPrecoder zero{{CMat::Zero(1, 1)}};
  CHECK_THROWS_AS(project_power(A, zero, 1.0), std::runtime_error);
}

TEST_CASE("compose") {
  HybridPrecoder h;
  h.analog = AnalogPrecoder{CMat::Identity(2, 2), ConstraintSet::unit_modulus(2, 2)};
  h.digital = DigitalPrecoder{{CMat::Identity(2, 2)}};
  CHECK((compose(h, 0) - CMat::Identity(2, 2)).norm() == 0.0);
  CHECK_THROWS_AS(compose(h, 1), std::out_of_range);
  CHECK_THROWS_AS(compose(h, -1), std::out_of_range);

  HybridPrecoder g;
  g.analog = AnalogPrecoder{CMat::Ones(2, 1), ConstraintSet::unit_modulus(2, 1)};
  g.digital = DigitalPrecoder{{CMat::Constant(1, 1, Complex{2.0, 0.0})}};
  const CMat W = compose(g, 0);
  CHECK(W(0, 0).real() == doctest::Approx(2.0));
  CHECK(W(1, 0).real() == doctest::Approx(2.0));
}

TEST_CASE("mask invariant: masked analog entries contribute zero") {
  const ConstraintSet part = ConstraintSet::unit_modulus(4, 2, Topology::Partially);
  Rng rng(31);
  CMat W(4, 2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 4; ++i) W(i, j) = random_complex(rng);
  HybridPrecoder h;
  h.analog = project_analog(W, part);
  h.digital = DigitalPrecoder{{CMat::Identity(2, 2)}};
  const CMat eff = compose(h, 0);
  CHECK(eff(0, 1) == Complex{0.0, 0.0});  // row 0 only feeds chain 0
  CHECK(eff(3, 0) == Complex{0.0, 0.0});
}
