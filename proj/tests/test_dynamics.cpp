#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qfl/dynamics.hpp"

using namespace qfl;

namespace {

constexpr double kPi = 3.14159265358979323846;

double radius(const Config& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

TEST(Dynamics, VelocityNamesRoundTrip) {
  for (auto k : {VelocityKind::u_minus, VelocityKind::u_plus, VelocityKind::v, VelocityKind::u_spin,
                 VelocityKind::w_sum})
    EXPECT_EQ(parse_velocity_kind(to_string(k)), k);
  EXPECT_THROW(parse_velocity_kind("u_sideways"), std::invalid_argument);
}

TEST(Dynamics, UMinusDriftsOutwardAtUnitSpeed) {
  const Trajectory tr = integrate_trajectory(hydrogen_ns(1), Config{0.5, 0.0, 0.0}, VelocityKind::u_minus, 0.05, 40);
  EXPECT_EQ(tr.termination, Termination::max_steps);
  for (std::size_t i = 0; i < tr.points.size(); ++i) EXPECT_NEAR(radius(tr.points[i]), 0.5 + tr.times[i], 1e-12);
}

TEST(Dynamics, UPlusMovesInward) {
  const Trajectory tr = integrate_trajectory(hydrogen_ns(1), Config{2.0, 0.0, 0.0}, VelocityKind::u_plus, 0.1, 5);
  EXPECT_NEAR(radius(tr.points.back()), 1.5, 1e-12);
}

TEST(Dynamics, SpinOrbitIsCircular) {
  const double period = 2 * kPi;
  const Trajectory tr =
      integrate_trajectory(hydrogen_ns(1), Config{1.0, 0.0, 0.0}, VelocityKind::u_spin, period / 500, 500);
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    EXPECT_NEAR(radius(tr.points[i]), 1.0, 1e-9);
    EXPECT_NEAR(tr.speed[i], 1.0, 1e-9);
    EXPECT_LT(std::abs(tr.div_mass_flux[i]), 1e-10);
  }
  EXPECT_NEAR(tr.points.back()[0], 1.0, 1e-8);
  EXPECT_NEAR(tr.points.back()[1], 0.0, 1e-8);
}

TEST(Dynamics, SpinSignReversesOrbit) {
  TrajectoryOptions o;
  o.velocity.spin_sign = Sign::minus;
  const Trajectory a = integrate_trajectory(hydrogen_ns(1), Config{1, 0, 0}, VelocityKind::u_spin, 0.1, 3);
  const Trajectory b = integrate_trajectory(hydrogen_ns(1), Config{1, 0, 0}, VelocityKind::u_spin, 0.1, 3, 0.0, o);
  EXPECT_NEAR(a.points.back()[1], -b.points.back()[1], 1e-14);
}

TEST(Dynamics, SpinNeedsOneBody3D) {
  EXPECT_THROW(flow_at(box_1d(1, kPi), Config{1.0}, 0.0, VelocityKind::u_spin), std::invalid_argument);
}

TEST(Dynamics, PhaseVelocityWrapsOnRing) {
  const double L = 2.0;
  const Trajectory tr = integrate_trajectory(ring_1d(1, L), Config{1.5}, VelocityKind::v, 0.1, 10);
  // v = 2 pi / L; one unit of time later the point has wrapped.
  const double expected = std::fmod(1.5 + 2 * kPi / L * 1.0, L);
  EXPECT_NEAR(tr.points.back()[0], expected, 1e-12);
  EXPECT_GE(tr.points.back()[0], 0.0);
  EXPECT_LT(tr.points.back()[0], L);
}

TEST(Dynamics, StopsAtNodeOrWall) {
  const Trajectory tr = integrate_trajectory(box_1d(1, kPi), Config{0.5}, VelocityKind::u_minus, 0.01, 10000);
  EXPECT_NE(tr.termination, Termination::max_steps);
  EXPECT_LT(tr.times.back(), 100.0);
}

TEST(Dynamics, RejectsBadInput) {
  EXPECT_THROW(integrate_trajectory(hydrogen_ns(1), Config{1, 0, 0}, VelocityKind::v, 0.0, 10), std::invalid_argument);
  EXPECT_THROW(integrate_trajectory(box_1d(1, kPi), Config{4.0}, VelocityKind::v, 0.1, 10), std::invalid_argument);
  EXPECT_THROW(integrate_trajectory(box_1d(2, kPi), Config{0.0}, VelocityKind::v, 0.1, 10),
               std::invalid_argument);
}

TEST(Dynamics, ParallelMatchesSerial) {
  std::vector<TrajectorySpec> specs;
  for (int i = 0; i < 6; ++i) {
    TrajectorySpec s;
    s.seed = Config{0.5 + 0.3 * i, 0.1 * i, 0.0};
    s.kind = i % 2 ? VelocityKind::u_spin : VelocityKind::u_minus;
    s.steps = 30;
    specs.push_back(s);
  }
  const auto a = integrate_trajectories(hydrogen_ns(2), specs, 1);
  const auto b = integrate_trajectories(hydrogen_ns(2), specs, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::ostringstream x, y;
    a[i].write_csv(x);
    b[i].write_csv(y);
    EXPECT_EQ(x.str(), y.str());
  }
}

TEST(Dynamics, WSumNotesCrossTerm) {
  const Trajectory tr =
      integrate_trajectory(gaussian_packet(0.0, 0.7, 1.2), Config{0.3}, VelocityKind::w_sum, 0.01, 5);
  EXPECT_FALSE(tr.notes.empty());
  const FlowSample f = flow_at(gaussian_packet(0.0, 0.7, 1.2), Config{0.3}, 0.0, VelocityKind::w_sum);
  EXPECT_NE(f.u_dot_v, 0.0);
}

TEST(Dynamics, MassFluxSeriesFollowsTrajectory) {
  const AnalyticState s = hydrogen_ns(1);
  const Trajectory tr = integrate_trajectory(s, Config{1, 0, 0}, VelocityKind::u_spin, 0.1, 10);
  const MassFluxSeries m = mass_flux_along(tr, s);
  EXPECT_EQ(m.times.size(), tr.times.size());
  for (double d : m.div_mass_flux) EXPECT_LT(std::abs(d), 1e-12);
}

TEST(Dynamics, ConservationOfTwoModeBox) {
  const std::vector<AnalyticState> comps{box_1d(1, kPi), box_1d(3, kPi)};
  const std::vector<Cx> coeffs{Cx(0.6), Cx(0.0, 0.8)};
  const std::vector<double> times{0.0, 0.25, 0.5, 1.0};
  const GridPtr g = share(Grid::cartesian({Axis::bounded(401, 0.0, kPi)}));
  const ConservationSeries cs = conservation_experiment(comps, coeffs, times, g, 2);
  const double expected = 0.36 * 0.5 + 0.64 * 4.5;
  EXPECT_NEAR(cs.expected_E_S, expected, 1e-12);
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_NEAR(cs.E_S_avg[k], expected, 1e-8);
    EXPECT_NEAR(cs.E_theta_avg[k], 0.0, 1e-8);
    EXPECT_LT(cs.closed_form_gap[k], 1e-10);
  }
  EXPECT_TRUE(cs.norm_ok());
  EXPECT_TRUE(cs.to_json().contains("E_S_avg"));
}

TEST(Dynamics, ConservationRejectsUnnormalisedCoefficients) {
  const GridPtr g = share(Grid::cartesian({Axis::bounded(101, 0.0, kPi)}));
  EXPECT_THROW(conservation_experiment({box_1d(1, kPi), box_1d(2, kPi)}, {Cx(1), Cx(1)}, {0.0}, g),
               std::invalid_argument);
}

}  // namespace
