#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "qfl/residuals.hpp"

using namespace qfl;

namespace {

constexpr double kPi = 3.14159265358979323846;

GridPtr radial() { return share(Grid::radial_log(400, 1e-5, 40.0)); }
GridPtr box_line(int n = 201) { return share(Grid::cartesian({Axis::bounded(n, 0.0, kPi)})); }
AnalyticState box_mix() { return parse_state("superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi"); }

TEST(Registry, IdsAreDistinctAndLabelled) {
  std::set<std::string> ids;
  for (const auto& c : check_registry()) {
    EXPECT_FALSE(c.label.empty());
    EXPECT_FALSE(c.description.empty());
    ids.insert(c.id);
  }
  EXPECT_EQ(ids.size(), check_registry().size());
  EXPECT_GE(ids.size(), 12u);
  EXPECT_EQ(find_check("bernoulli").label, "p2574");
  EXPECT_EQ(find_check("euler_n_body").label, "8888d");
}

TEST(Registry, UnknownIdThrows) {
  EXPECT_THROW(find_check("bernolli"), UnknownCheckError);
  try {
    run_check("nope", hydrogen_ns(1), radial(), 0.0);
    FAIL();
  } catch (const UnknownCheckError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown equation_id"), std::string::npos);
  }
}

struct Case {
  std::string id;
  std::string state;
  bool radial;
  double t;
};

class AnalyticPasses : public ::testing::TestWithParam<Case> {};

std::string case_name(const ::testing::TestParamInfo<Case>& info) {
  std::string family = info.param.state.substr(0, info.param.state.find(':'));
  std::string name = info.param.id + "_" + family + "_" + std::to_string(info.index);
  for (char& c : name)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return name;
}

TEST_P(AnalyticPasses, WithinDefaultTolerance) {
  const Case& c = GetParam();
  const AnalyticState s = parse_state(c.state);
  const GridPtr g = c.radial ? radial() : box_line();
  const ResidualReport r = run_check(c.id, s, g, c.t);
  EXPECT_TRUE(r.passed) << c.id << " on " << c.state << ": linf " << r.residual_linf << " tol " << r.tolerance
                        << " " << r.to_json().dump();
  EXPECT_GT(r.points, 0u);
}

INSTANTIATE_TEST_SUITE_P(
    Hydrogen, AnalyticPasses,
    ::testing::Values(Case{"bernoulli", "hydrogen_1s", true, 0.0}, Case{"bernoulli", "hydrogen_2s", true, 0.0},
                      Case{"hamilton_jacobi", "hydrogen_1s", true, 0.2}, Case{"continuity", "hydrogen_2s", true, 0.0},
                      Case{"u_continuity", "hydrogen_1s", true, 0.0}, Case{"ke_expectation", "hydrogen_1s", true, 0.0},
                      Case{"quantum_potential", "hydrogen_3s", true, 0.0},
                      Case{"ke_integrand", "hydrogen_2s", true, 0.0},
                      Case{"kinetic_decomposition", "hydrogen_1s", true, 0.0},
                      Case{"energy_split", "hydrogen_1s", true, 0.0}),
    case_name);

INSTANTIATE_TEST_SUITE_P(
    BoxSuperposition, AnalyticPasses,
    ::testing::Values(Case{"hamilton_jacobi", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false, 0.4},
                      Case{"continuity", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false, 0.4},
                      Case{"euler_one_body", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false, 0.4},
                      Case{"pressure_gradient", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false,
                           0.4},
                      Case{"energy_gradients", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false,
                           0.4},
                      Case{"velocity_identities", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false,
                           0.4},
                      Case{"pressure_complex", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false,
                           0.4},
                      Case{"conservation", "superpose:sqrt(0.5)@box:k=1,L=pi|sqrt(0.5)@box:k=2,L=pi", false, 0.4},
                      Case{"density_identity", "box:k=3,L=pi", false, 0.0}, Case{"u_continuity", "box:k=2,L=pi", false, 0.0},
                      Case{"laplace_special", "box:k=1,L=pi", false, 0.0}),
    case_name);

TEST(Residuals, BernoulliFailsOnPerturbedDensity) {
  CheckOptions o;
  o.energy = -0.5;
  const ResidualReport r =
      check_bernoulli(perturb_density(hydrogen_ns(1), 1e-3, Config{0, 0, 0}, 0.5), radial(), 0.0, o);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.residual_linf, 1e-6);
}

TEST(Residuals, NucleusOnCartesianGridIsMasked) {
  const Axis a = Axis::bounded(21, -5.0, 5.0);
  const GridPtr g = share(Grid::cartesian({a, a, a}));
  const ResidualReport q = check_quantum_potential(hydrogen_ns(1), g, 0.0);
  EXPECT_TRUE(q.passed);
  EXPECT_TRUE(std::isfinite(q.residual_l2));
  const ResidualReport k = check_ke_expectation(hydrogen_ns(1), g, 0.0);
  ASSERT_NE(k.find("T_from_u"), nullptr);
  EXPECT_TRUE(std::isfinite(k.find("T_from_u")->value));
}

TEST(Residuals, BernoulliNeedsEnergy) {
  EXPECT_THROW(check_bernoulli(box_mix(), box_line(), 0.0), std::invalid_argument);
}

TEST(Residuals, KeExpectationRejectsComplexStates) {
  const ResidualReport r = check_ke_expectation(box_mix(), box_line(), 0.3);
  EXPECT_FALSE(r.precondition_ok);
  EXPECT_FALSE(r.passed);
}

TEST(Residuals, UContinuitySourceIsTwicePu) {
  // div(rho u_-) = -lap(rho)/2 = 2 P_u, and the integral of the source vanishes.
  const ResidualReport r = check_u_continuity(box_1d(1, kPi), box_line(401), 0.0);
  ASSERT_NE(r.find("integral_div_rho_u"), nullptr);
  EXPECT_NEAR(r.find("integral_div_rho_u")->value, 0.0, 1e-10);
  EXPECT_TRUE(r.passed);
}

TEST(Residuals, GridModeConvergesAtSecondOrder) {
  CheckOptions o;
  o.provenance = Provenance::grid;
  const AnalyticState s = superpose({harmonic_1d(0, 1.0), harmonic_1d(1, 1.0)}, {Cx(0.6), Cx(0.0, 0.8)});
  double prev = 0.0;
  for (int n : {101, 201, 401}) {
    const GridPtr g = share(Grid::cartesian({Axis::bounded(n, -4.0, 4.0)}));
    const ResidualReport r = check_continuity(s, g, 0.3, o);
    EXPECT_TRUE(r.passed) << r.residual_linf << " vs " << r.tolerance;
    if (prev > 0) EXPECT_GT(prev / r.residual_linf, 3.5);
    prev = r.residual_linf;
  }
}

TEST(Residuals, ToleranceOverride) {
  CheckOptions o;
  o.tolerance = 1e-30;
  const ResidualReport r = check_quantum_potential(hydrogen_ns(1), radial(), 0.0, o);
  EXPECT_EQ(r.tolerance, 1e-30);
  EXPECT_FALSE(r.passed);
}

TEST(Residuals, PointwiseFieldKeptOnRequest) {
  CheckOptions o;
  o.keep_pointwise = true;
  const ResidualReport r = check_continuity(box_mix(), box_line(), 0.1, o);
  ASSERT_TRUE(r.pointwise.has_value());
  EXPECT_EQ(r.pointwise->size(), box_line()->size());
}

TEST(Residuals, ReportJsonShape) {
  const auto j = check_energy_split(hydrogen_ns(1), radial(), 0.0).to_json();
  for (const char* key : {"equation_id", "label", "state", "t", "provenance", "norms", "tolerance", "passed",
                          "grid_meta", "global_checks"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["equation_id"], "energy_split");
}

TEST(Residuals, EulerNBodyCrossTermsVanishForProducts) {
  const GridPtr g = share(Grid::cartesian({Axis::bounded(31, 0.0, kPi), Axis::bounded(31, 0.0, kPi)}, 2, 1));
  const ResidualReport r = check_euler_n_body(box_2body(1, 2, kPi), g, 0.2);
  ASSERT_NE(r.find("cross_terms"), nullptr);
  EXPECT_LT(r.find("cross_terms")->value, 1e-10);
  EXPECT_TRUE(r.passed);
}

TEST(Residuals, EulerNBodyRejectsOneBody) {
  EXPECT_THROW(check_euler_n_body(box_1d(1, kPi), box_line(), 0.0), std::invalid_argument);
}

TEST(Residuals, RandomStatesSatisfyIdentities) {
  const GridPtr g = share(Grid::cartesian({Axis::bounded(21, -2, 2), Axis::bounded(21, -2, 2)}));
  for (unsigned seed = 1; seed <= 5; ++seed) {
    EXPECT_TRUE(check_density_identity(random_smooth_state(seed, 2, false), g, 0.0).passed);
    EXPECT_TRUE(check_velocity_identities(random_smooth_state(seed, 2, true), g, 0.0).passed);
    EXPECT_TRUE(check_kinetic_decomposition(random_smooth_state(seed, 2, true), g, 0.0).passed);
  }
}

TEST(Residuals, EvaluationPointsHonourMargin) {
  const GridPtr g = box_line(21);
  const auto pts = evaluation_points(*g, {}, 3);
  EXPECT_EQ(std::count(pts.begin(), pts.end(), 1), 15);
}

}  // namespace
