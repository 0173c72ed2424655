#include <gtest/gtest.h>

#include <cmath>

#include "qfl/fields.hpp"

using namespace qfl;

namespace {

constexpr double kPi = 3.14159265358979323846;

TEST(Fields, Hydrogen1sPointValues) {
  const double r = 1.7;
  const PointFields f = point_fields(hydrogen_ns(1), Config{0.0, 0.0, r}, 0.0);
  EXPECT_NEAR(f.rho, std::exp(-2 * r) / kPi, 1e-15);
  EXPECT_NEAR(f.u_minus[2], 1.0, 1e-13);  // -grad rho / (2 rho) = +r-hat
  EXPECT_NEAR(f.u_minus[0], 0.0, 1e-14);
  EXPECT_NEAR(f.K_u, 0.5, 1e-13);
  EXPECT_NEAR(f.Q, 1 / r - 0.5, 1e-12);
  EXPECT_NEAR(f.U, -1 / r, 1e-14);
  EXPECT_NEAR(f.E_S, -0.5, 1e-12);
  EXPECT_NEAR(f.E_theta, 0.0, 1e-14);
  EXPECT_NEAR(f.rho_t, 0.0, 1e-15);
}

TEST(Fields, PlaneWaveVelocity) {
  const PointFields f = point_fields(ring_1d(3, 2 * kPi), Config{0.4}, 0.2);
  EXPECT_NEAR(f.v[0], 3.0, 1e-13);
  EXPECT_NEAR(f.u_minus[0], 0.0, 1e-13);
  EXPECT_NEAR(f.K_v, 4.5, 1e-12);
}

TEST(Fields, BoxPressureIsMinusQuarterLaplacian) {
  // rho = (2/pi) sin^2 x, lap rho = (4/pi) cos 2x
  const double x = 0.8;
  const PointFields f = point_fields(box_1d(1, kPi), Config{x}, 0.0);
  EXPECT_NEAR(f.P_u[0], -std::cos(2 * x) / kPi, 1e-13);
}

TEST(Fields, NodeThrows) { EXPECT_THROW(point_fields(box_1d(2, kPi), Config{0.0}, 0.0), std::domain_error); }

TEST(Fields, ComplexMomentumIsVPlusIU) {
  const AnalyticState s = gaussian_packet(0.2, 0.6, 1.1);
  const Config x{0.9};
  const PointFields f = point_fields(s, x, 0.5);
  const auto p = momentum_complex(s, x, 0.5);
  EXPECT_NEAR(p[0].real(), f.v[0], 1e-12);
  EXPECT_NEAR(p[0].imag(), f.u_minus[0], 1e-12);
}

TEST(Fields, TimeSideEnergiesOfSuperposition) {
  const AnalyticState s = superpose({box_1d(1, kPi), box_1d(2, kPi)}, {Cx(std::sqrt(0.5)), Cx(std::sqrt(0.5))});
  const Config x{1.0};
  const auto [es, et] = energies_time_side(s, x, 0.3);
  const PointFields f = point_fields(s, x, 0.3);
  EXPECT_NEAR(es, -f.S_t, 1e-12);
  EXPECT_NEAR(et, 0.5 * f.rho_t / f.rho, 1e-12);
}

TEST(Fields, GridVelocityMatchesPointValues) {
  const AnalyticState s = gaussian_packet(0.0, 0.8, 0.7);
  const GridPtr g = share(Grid::cartesian({Axis::bounded(401, -3.0, 3.0)}));
  const PolarPair polar = polar_decompose(sample_psi(s, g, 0.0));
  const VectorField u = velocity_u(polar.rho, Sign::minus, 0);
  const VectorField v = velocity_v(polar.S, 0);
  const double h = g->step();
  for (std::size_t i = 10; i + 10 < g->size(); i += 37) {
    const PointFields f = point_fields(s, g->point(i), 0.0);
    EXPECT_NEAR(u.at(i, 0), f.u_minus[0], 20 * h * h * (1 + f.u_minus[0] * f.u_minus[0]));
    EXPECT_NEAR(v.at(i, 0), f.v[0], 20 * h * h * (1 + f.v[0] * f.v[0]));
  }
}

TEST(Fields, SpinVelocityIsTangential) {
  const GridPtr g = share(Grid::radial_log(400, 0.01, 10.0));
  const PolarPair polar = polar_decompose(sample_psi(hydrogen_ns(1), g, 0.0));
  const VectorField w = velocity_spin(polar.rho, Sign::plus);
  for (std::size_t i = 5; i + 5 < g->size(); ++i) {
    EXPECT_NEAR(w.at(i, 0), 0.0, 1e-12);
    // Differencing in ln r: the relative error is about h^2 (1 + 4 r^2) / 6.
    const double h = g->log_step(), r = g->radius(i);
    EXPECT_NEAR(std::abs(w.at(i, 1)), 1.0, h * h * (1 + 4 * r * r));
  }
}

TEST(Fields, QuantumPotentialOnGrid) {
  const GridPtr g = share(Grid::radial_log(400, 1e-3, 20.0));
  const PolarPair polar = polar_decompose(sample_psi(hydrogen_ns(1), g, 0.0));
  const ScalarField Q = quantum_potential(polar.R);
  for (std::size_t i = 20; i + 20 < g->size(); i += 40) {
    const double r = g->radius(i);
    EXPECT_NEAR(Q[i], 1 / r - 0.5, 1e-3 * (1 / r + 1));
  }
}

TEST(Fields, PressureVFromFrames) {
  const AnalyticState s = superpose({box_1d(1, kPi), box_1d(2, kPi)}, {Cx(0.6), Cx(0.8)});
  const GridPtr g = share(Grid::cartesian({Axis::bounded(101, 0.0, kPi)}));
  const double t = 0.5, dt = 1e-4;
  const ScalarField exact = pressure_v(s, g, t);
  const ScalarField fd = pressure_v(polar_decompose(sample_psi(s, g, t - dt)).rho,
                                    polar_decompose(sample_psi(s, g, t + dt)).rho, dt);
  for (std::size_t i = 0; i < g->size(); ++i) EXPECT_NEAR(fd[i], exact[i], 1e-7);
}

TEST(Fields, BundleColumnsAndConsistency) {
  const GridPtr g = share(Grid::radial_log(60, 0.05, 10.0));
  const FieldBundle fb = bundle(hydrogen_ns(1), g, 0.0);
  const auto cols = fb.columns();
  bool has_rho = false, has_q = false;
  for (const auto& c : cols) has_rho |= c.name == "rho", has_q |= c.name == "Q";
  EXPECT_TRUE(has_rho);
  EXPECT_TRUE(has_q);
  for (std::size_t i = 0; i < g->size(); ++i) EXPECT_NEAR(fb.Q[i], fb.K_u[i] + fb.P_u[0][i] / fb.rho[i], 1e-9);
}

TEST(Fields, ComplexPressureAnalyticVsGrid) {
  const AnalyticState s = gaussian_packet(0.0, 0.9, 1.0);
  const GridPtr g = share(Grid::cartesian({Axis::bounded(301, -3.0, 3.0)}));
  const ComplexField a = pressure_complex(s, g, 0.2, Provenance::analytic);
  const ComplexField n = pressure_complex(s, g, 0.2, Provenance::grid);
  for (std::size_t i = 5; i + 5 < g->size(); i += 29) EXPECT_LT(std::abs(a[i] - n[i]), 1e-2);
}

}  // namespace
