#include <gtest/gtest.h>

#include <cmath>

#include "qfl/states.hpp"

using namespace qfl;

namespace {

constexpr double kPi = 3.14159265358979323846;

TEST(States, Hydrogen1sMatchesClosedForm) {
  const AnalyticState s = hydrogen_ns(1);
  for (double r : {0.1, 1.0, 3.7}) {
    const Cx psi = s.psi(Config{0.0, r, 0.0}, 0.0);
    EXPECT_NEAR(psi.real(), std::exp(-r) / std::sqrt(kPi), 1e-14);
    EXPECT_NEAR(psi.imag(), 0.0, 1e-14);
  }
  ASSERT_TRUE(s.energy());
  EXPECT_DOUBLE_EQ(*s.energy(), -0.5);
  EXPECT_EQ(s.config_dim(), 3);
}

TEST(States, Hydrogen2sHasNodeAtTwo) {
  const AnalyticState s = hydrogen_ns(2);
  EXPECT_NEAR(std::abs(s.psi(Config{2.0, 0.0, 0.0}, 0.0)), 0.0, 1e-15);
  // (1/(4 sqrt(2 pi))) (2 - r) e^{-r/2}
  const double r = 0.5;
  EXPECT_NEAR(s.psi(Config{r, 0.0, 0.0}, 0.0).real(), (2 - r) * std::exp(-r / 2) / (4 * std::sqrt(2 * kPi)), 1e-14);
}

TEST(States, HydrogenRejectsUnsupportedN) { EXPECT_THROW(hydrogen_ns(4), std::invalid_argument); }

TEST(States, BoxModeEvolvesWithPhase) {
  const double L = 2.0, t = 0.4;
  const AnalyticState s = box_1d(3, L);
  const double E = 9 * kPi * kPi / (2 * L * L);
  EXPECT_NEAR(*s.energy(), E, 1e-12);
  const double x = 0.3;
  const Cx expected = std::sqrt(2 / L) * std::sin(3 * kPi * x / L) * std::exp(Cx(0, -E * t));
  EXPECT_LT(std::abs(s.psi(Config{x}, t) - expected), 1e-14);
}

TEST(States, TimeDerivativeIsMinusIEPsi) {
  const AnalyticState s = harmonic_1d(2, 1.5);
  const Config x{0.7};
  const Cx lhs = s.dpsi_dt(x, 0.3);
  const Cx rhs = Cx(0, -*s.energy()) * s.psi(x, 0.3);
  EXPECT_LT(std::abs(lhs - rhs), 1e-13);
  EXPECT_NEAR(*s.energy(), 1.5 * 2.5, 1e-14);
}

TEST(States, RingModeHasUniformDensity) {
  const AnalyticState s = ring_1d(2, 3.0);
  EXPECT_TRUE(s.domain().periodic);
  EXPECT_NEAR(std::norm(s.psi(Config{0.1}, 0.0)), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(std::norm(s.psi(Config{2.2}, 0.5)), 1.0 / 3.0, 1e-14);
}

TEST(States, SuperpositionIsLinear) {
  const AnalyticState a = box_1d(1, kPi), b = box_1d(2, kPi);
  const Cx ca(0.6), cb(0.0, 0.8);
  const AnalyticState s = superpose({a, b}, {ca, cb});
  const Config x{1.1};
  EXPECT_LT(std::abs(s.psi(x, 0.9) - (ca * a.psi(x, 0.9) + cb * b.psi(x, 0.9))), 1e-14);
  EXPECT_FALSE(s.energy());
  EXPECT_EQ(s.components().size(), 2u);
}

TEST(States, SuperpositionRejectsMismatchedDomains) {
  EXPECT_THROW(superpose({box_1d(1, 1.0), box_1d(1, 2.0)}, {Cx(1), Cx(1)}), std::invalid_argument);
}

TEST(States, PerturbationChangesDensityByRelativeDelta) {
  const AnalyticState base = hydrogen_ns(1);
  const AnalyticState p = perturb_density(base, 1e-3, Config{0, 0, 0}, 0.5);
  const Config centre{1e-9, 0, 0};
  EXPECT_NEAR(std::norm(p.psi(centre, 0.0)) / std::norm(base.psi(centre, 0.0)), 1.001, 1e-8);
  const Config far{6.0, 0, 0};
  EXPECT_NEAR(std::norm(p.psi(far, 0.0)) / std::norm(base.psi(far, 0.0)), 1.0, 1e-12);
  EXPECT_FALSE(p.exact_solution());
}

TEST(States, TwoBodyBoxIsProduct) {
  const double L = kPi;
  const AnalyticState s = box_2body(1, 2, L);
  EXPECT_EQ(s.n_bodies(), 2);
  EXPECT_EQ(s.dim_per_body(), 1);
  const Config x{0.4, 1.3};
  const double expected = (2 / L) * std::sin(0.4) * std::sin(2 * 1.3);
  EXPECT_NEAR(std::abs(s.psi(x, 0.0)), std::abs(expected), 1e-14);
  EXPECT_NEAR(*s.energy(), 0.5 + 2.0, 1e-12);
}

TEST(States, GradientsAgreeWithDifferences) {
  const AnalyticState s = random_smooth_state(5, 2, true);
  const Config x{0.3, -0.2};
  const auto g = s.grad_psi(x, 0.0);
  const double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    Config xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Cx fd = (s.psi(xp, 0.0) - s.psi(xm, 0.0)) / (2 * h);
    EXPECT_LT(std::abs(fd - g[k]), 1e-8);
  }
}

TEST(States, RandomStatesAreReproducible) {
  const Config x{0.2, 0.1, -0.4};
  EXPECT_EQ(random_smooth_state(9, 3, true).psi(x, 0.0), random_smooth_state(9, 3, true).psi(x, 0.0));
  EXPECT_NE(random_smooth_state(9, 3, true).psi(x, 0.0), random_smooth_state(10, 3, true).psi(x, 0.0));
}

TEST(States, ParseStateCatalog) {
  EXPECT_EQ(parse_state("hydrogen_1s").label(), "hydrogen_1s");
  const AnalyticState box = parse_state("box:k=2,L=pi");
  EXPECT_NEAR(*box.energy(), 2.0, 1e-12);
  const AnalyticState sup = parse_state("superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi");
  EXPECT_EQ(sup.components().size(), 2u);
  EXPECT_NEAR(std::abs(sup.components()[0].coeff), std::sqrt(0.5), 1e-15);
}

TEST(States, ParseStateRejectsGarbage) {
  EXPECT_THROW(parse_state("hydrogen_9z"), std::invalid_argument);
  EXPECT_THROW(parse_state("box:k=1,bogus=3"), std::invalid_argument);
  EXPECT_THROW(parse_value("sqrt(2"), std::invalid_argument);
}

TEST(States, ParseValueArithmetic) {
  EXPECT_NEAR(parse_real("2pi"), 2 * kPi, 1e-15);
  EXPECT_NEAR(parse_real("sqrt(0.5)*2"), std::sqrt(2.0), 1e-15);
  EXPECT_LT(std::abs(parse_value("0.5i") - Cx(0, 0.5)), 1e-15);
  EXPECT_EQ(parse_int("7"), 7);
}

TEST(States, PolarRoundTrip) {
  const AnalyticState s = gaussian_packet(0.0, 0.7, 1.3);
  const GridPtr g = share(Grid::cartesian({Axis::bounded(201, -4.0, 4.0)}));
  const ComplexField psi = sample_psi(s, g, 0.0);
  const PolarPair polar = polar_decompose(psi);
  const ComplexField back = reconstruct(polar);
  double worst = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i)
    if (!polar.mask.empty() && polar.mask[i] == 0) worst = std::max(worst, std::abs(back[i] - psi[i]));
  EXPECT_LT(worst, 1e-13);
  EXPECT_EQ(polar.regions, 1);
}

TEST(States, PolarMaskSplitsAtNodes) {
  const GridPtr g = share(Grid::cartesian({Axis::bounded(101, 0.0, kPi)}));
  const PolarPair polar = polar_decompose(sample_psi(box_1d(2, kPi), g, 0.0));
  EXPECT_TRUE(polar.disconnected());
}

}  // namespace
