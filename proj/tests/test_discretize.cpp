#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "moranq/discretize.hpp"
#include "moranq/error.hpp"
#include "moranq/solver.hpp"

using namespace moranq;
using moranq::testing::cantor_spec;
using moranq::testing::inhomogeneous_spec;

namespace {

double variance(const AtomMeasure& m) {
  long double mean = m.first_moment(0, m.size());
  return static_cast<double>(m.second_moment(0, m.size()) - mean * mean);
}

double brute_ball_mass(const AtomMeasure& m, double eps) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double mass = 0.0;
    for (std::size_t j = i; j < m.size() && m.position(j) - m.position(i) <= 2 * eps; ++j) mass += m.weight(j);
    best = std::max(best, mass);
  }
  return best;
}

}  // namespace

TEST_CASE("cantor atoms: count, mass and variance") {
  const MoranSpec spec = cantor_spec();
  for (int m = 1; m <= 12; ++m) {
    const AtomMeasure mu = discretize(spec, m);
    CHECK(mu.size() == (std::size_t{1} << m));
    CHECK(static_cast<double>(mu.mass(0, mu.size())) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(variance(mu) == doctest::Approx(0.125 * (1.0 - std::pow(9.0, -m))).epsilon(1e-12));
    CHECK(mu.w_inf_bound() == doctest::Approx(0.5 * std::pow(3.0, -m)));
    CHECK(mu.w_inf_bound() == w_inf_bound_at_depth(spec, m));
    CHECK(mu.depth() == m);
    CHECK(mu.position(0) == doctest::Approx(0.5 * std::pow(3.0, -m)));
  }
}

TEST_CASE("atoms sit at cylinder midpoints") {
  const MoranSpec spec = inhomogeneous_spec();
  const AtomMeasure mu = discretize(spec, 3);
  REQUIRE(mu.size() == 12);
  const Cylinder c = cylinder(spec, Word::parse("1.3.2"), 2.0);
  CHECK(mu.position(5) == doctest::Approx(0.5 * (c.lo + c.hi)));
  CHECK(mu.weight(5) == doctest::Approx(c.mass));
}

TEST_CASE("conditional measure of the cantor set is self-similar") {
  const MoranSpec spec = cantor_spec();
  const AtomMeasure whole = discretize(spec, 6);
  for (const char* w : {"1", "2", "1.2.1"}) {
    const AtomMeasure nu = conditional_rescaled(spec, Word::parse(w), 6);
    REQUIRE(nu.size() == whole.size());
    for (std::size_t i = 0; i < nu.size(); ++i) {
      CHECK(nu.position(i) == whole.position(i));
      CHECK(nu.weight(i) == whole.weight(i));
    }
    CHECK(nu.source_id() != whole.source_id());
  }
  const AtomMeasure root = conditional_rescaled(spec, Word::root(), 6);
  CHECK(root.source_id() == whole.source_id());
}

TEST_CASE("conditional measure of a cycled spec starts at the right level") {
  const MoranSpec spec = inhomogeneous_spec();
  const AtomMeasure nu = conditional_rescaled(spec, Word::parse("2"), 1);
  REQUIRE(nu.size() == 3);
  CHECK(nu.weight(0) == doctest::Approx(0.5));
  CHECK(nu.weight(2) == doctest::Approx(0.2));
  CHECK(nu.position(0) == doctest::Approx(0.1));
}

TEST_CASE("from_atoms sorts, merges and normalizes") {
  const AtomMeasure m = AtomMeasure::from_atoms({0.5, 0.1, 0.5, 0.9}, {1.0, 2.0, 1.0, 4.0});
  REQUIRE(m.size() == 3);
  CHECK(m.position(0) == 0.1);
  CHECK(m.weight(1) == doctest::Approx(0.25));
  CHECK(m.diameter() == doctest::Approx(0.8));
}

TEST_CASE("atom cap is enforced and read from the environment") {
  CHECK_THROWS_AS(discretize(cantor_spec(), 10, 2.0, 1000), ResourceLimit);
  setenv("MORANQ_ATOM_CAP", "64", 1);
  CHECK(atom_cap_from_env() == 64);
  CHECK_THROWS_AS(discretize(cantor_spec(), 7), ResourceLimit);
  CHECK_NOTHROW(discretize(cantor_spec(), 6));
  unsetenv("MORANQ_ATOM_CAP");
  CHECK(atom_cap_from_env() == kDefaultAtomCap);
}

TEST_CASE("sup ball mass agrees with brute force") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const AtomMeasure m = moranq::testing::random_measure(rng, 40);
    for (double eps : {0.001, 0.02, 0.1, 0.3}) CHECK(sup_ball_mass(m, eps) == doctest::Approx(brute_ball_mass(m, eps)));
  }
  const AtomMeasure cantor = discretize(cantor_spec(), 10);
  for (int k = 2; k <= 8; ++k) {
    const double eps = std::pow(3.0, -k);
    CHECK(sup_ball_mass(cantor, eps) == doctest::Approx(brute_ball_mass(cantor, eps)));
  }
}

TEST_CASE("ball mass profile on the cantor measure") {
  const MoranSpec spec = cantor_spec();
  const AtomMeasure m = discretize(spec, 10);
  std::vector<double> eps;
  for (int k = 2; k <= 8; ++k) eps.push_back(std::pow(3.0, -k));
  const BallMassProfile p = ball_mass_profile(m, eps, validate_spec(spec, 2.0));
  CHECK(p.reference_exponent == doctest::Approx(std::log(2.0) / std::log(3.0)));
  CHECK(p.reference_constant == 8.0);
  CHECK(std::abs(p.fitted_exponent - std::log(2.0) / std::log(3.0)) < 0.05);
  for (std::size_t i = 0; i < eps.size(); ++i) CHECK(p.sup_mass[i] <= p.reference_bound(eps[i]) + std::pow(2.0, -10));
  const std::vector<double> tiny{1e-9};
  CHECK_THROWS_AS(ball_mass_profile(m, tiny, validate_spec(spec, 2.0)), UsageError);
}

TEST_CASE("depth adequacy") {
  const MoranSpec spec = cantor_spec();
  const AtomMeasure m = discretize(spec, 12);
  const Adequacy a = depth_adequacy(m, 2, 2.0);
  CHECK(a.adequate);
  CHECK(a.bound_ratio == doctest::Approx(m.w_inf_bound() / a.error));
  CHECK(a.error == doctest::Approx(std::sqrt(1.0 / 72.0)).epsilon(1e-4));
  CHECK_FALSE(depth_adequacy(discretize(spec, 4), 8, 2.0).adequate);
  CHECK_FALSE(depth_adequacy(discretize(spec, 3), 8, 2.0).adequate);
}

TEST_CASE("choose_depth returns the smallest adequate depth") {
  for (const MoranSpec& spec : {cantor_spec(), inhomogeneous_spec()}) {
    for (std::size_t n : {4u, 32u}) {
      const int m = choose_depth(spec, n, 2.0);
      CHECK(depth_adequacy(discretize(spec, m), n, 2.0).adequate);
      if (discretize(spec, m - 1).size() > n) CHECK_FALSE(depth_adequacy(discretize(spec, m - 1), n, 2.0).adequate);
    }
  }
}

TEST_CASE("atoms csv") {
  std::ostringstream os;
  write_atoms_csv(os, discretize(cantor_spec(), 1));
  CHECK(os.str() == "position,weight\n0.16666666666666666,0.5\n0.83333333333333337,0.5\n");
}
