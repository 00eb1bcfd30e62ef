#include <gtest/gtest.h>

#include <random>

#include "locoplan/balance.hpp"
#include "locoplan/fixtures.hpp"
#include "oracles.hpp"

using namespace locoplan;

namespace {

constexpr double kMg = 9.81;

Contact ground_contact(const std::string& ee, double x, double mu) {
  return {ee, "ground", {x, 0.0}, {0.0, 1.0}, mu};
}

std::vector<oracle::PlanarContact> to_oracle(const std::vector<Contact>& cs) {
  std::vector<oracle::PlanarContact> out;
  for (const auto& c : cs) out.push_back({c.position, c.normal, c.mu});
  return out;
}

// Residual and cone check of a returned force set.
void expect_certificate(const std::vector<Contact>& cs, const Vec2& com, double mass, const WrenchSet& w) {
  const double weight = mass * 9.81;
  EXPECT_LE(equilibrium_residual(cs, com, mass, kGravity, w).norm(), 1e-9 * weight);
  for (const auto& c : cs) {
    const ContactForce* f = w.find(c.end_effector);
    ASSERT_NE(f, nullptr);
    EXPECT_GE(f->normal, -1e-9 * weight);
    EXPECT_LE(std::abs(f->tangential), c.mu * f->normal + 1e-9 * weight);
  }
}

Configuration split_stance(const RobotModel& m) {
  Configuration q = Configuration::Zero(m.dof());
  q[1] = 0.95;
  q[3] = 0.3;    // left hip
  q[4] = -0.2;   // left knee
  q[5] = -0.3;   // right hip
  q[6] = -0.2;   // right knee
  return q;
}

Stance feet_stance(const RobotModel& m, const Configuration& q, const std::vector<std::string>& feet) {
  std::vector<Contact> cs;
  for (const auto& f : feet) {
    const Vec2 p = frame_position(m, q, f);
    cs.push_back({f, "ground", p, {0.0, 1.0}, 0.6});
  }
  return Stance(cs);
}

}  // namespace

TEST(Balance, SymmetricTwoContacts) {
  const std::vector<Contact> cs{ground_contact("l", -0.5, 0.5), ground_contact("r", 0.5, 0.5)};
  const auto w = solve_static_equilibrium(cs, {0.0, 0.8}, 1.0, kGravity);
  ASSERT_TRUE(w);
  EXPECT_NEAR(w->find("l")->normal, 4.905, 1e-9);
  EXPECT_NEAR(w->find("r")->normal, 4.905, 1e-9);
  EXPECT_LE(std::abs(w->find("l")->normal - w->find("r")->normal), 1e-9 * kMg);
  EXPECT_NEAR(w->find("l")->tangential, 0.0, 1e-12);
  EXPECT_NEAR(w->find("r")->tangential, 0.0, 1e-12);
}

TEST(Balance, ComAboveRightContact) {
  const std::vector<Contact> cs{ground_contact("l", -0.5, 0.5), ground_contact("r", 0.5, 0.5)};
  const auto w = solve_static_equilibrium(cs, {0.5, 0.8}, 1.0, kGravity);
  ASSERT_TRUE(w);
  EXPECT_NEAR(w->find("r")->normal, 9.81, 1e-9);
  EXPECT_NEAR(w->find("l")->normal, 0.0, 1e-9);
  expect_certificate(cs, {0.5, 0.8}, 1.0, *w);
}

TEST(Balance, ComOutsideSupportFrictionlessInfeasible) {
  const std::vector<Contact> cs{ground_contact("l", -0.5, 0.0), ground_contact("r", 0.5, 0.0)};
  EXPECT_FALSE(solve_static_equilibrium(cs, {1.0, 0.8}, 1.0, kGravity));
  EXPECT_FALSE(oracle::brute_force_feasible(to_oracle(cs), {1.0, 0.8}, 1.0));
}

TEST(Balance, WallContactRescuesOverhang) {
  // single foot at x=0, CoM at x=0.3, a wall to the right pushing back
  const std::vector<Contact> cs{ground_contact("foot", 0.0, 1.0), {"hand", "wall", {0.5, 1.0}, {-1.0, 0.0}, 1.0}};
  const Vec2 com{0.3, 0.5};
  EXPECT_FALSE(solve_static_equilibrium(std::vector<Contact>{cs[0]}, com, 1.0, kGravity));
  ASSERT_TRUE(oracle::brute_force_feasible(to_oracle(cs), com, 1.0));
  const auto w = solve_static_equilibrium(cs, com, 1.0, kGravity);
  ASSERT_TRUE(w);
  expect_certificate(cs, com, 1.0, *w);
}

TEST(Balance, SupportIntervalFlatGround) {
  const std::vector<Contact> cs{ground_contact("l", -0.5, 0.5), ground_contact("r", 0.5, 0.5)};
  const auto iv = support_interval(cs, 1.0, kGravity);
  ASSERT_TRUE(iv);
  EXPECT_NEAR(iv->lo, -0.5, 1e-9);
  EXPECT_NEAR(iv->hi, 0.5, 1e-9);
  EXPECT_THROW(support_interval(cs, 1.0, Vec2(1.0, -9.81)), std::invalid_argument);
}

TEST(Balance, AgreesWithBruteForceOracle) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0), mu(0.0, 1.0);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Contact> cs;
    const int m = 1 + trial % 3;
    for (int k = 0; k < m; ++k) {
      const double ang = M_PI / 2 + 0.8 * u(rng);
      cs.push_back({"c" + std::to_string(k), "", {u(rng), 0.3 * u(rng)}, {std::cos(ang), std::sin(ang)}, mu(rng)});
    }
    const Vec2 com{0.8 * u(rng), 0.5 + 0.3 * u(rng)};
    const auto lib = solve_static_equilibrium(cs, com, 2.0, kGravity);
    const bool ref = oracle::brute_force_feasible(to_oracle(cs), com, 2.0);
    if (ref) {
      EXPECT_TRUE(lib) << "oracle certificate exists, trial " << trial;
    }
    if (lib) expect_certificate(cs, com, 2.0, *lib);
    agree += (ref == lib.has_value());
  }
  EXPECT_GE(agree, 195);
}

TEST(Balance, AddingContactNeverBreaksFeasibility) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0), mu(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Contact> cs;
    for (int k = 0; k < 2; ++k) cs.push_back(ground_contact("c" + std::to_string(k), u(rng), mu(rng)));
    const Vec2 com{0.8 * u(rng), 0.6};
    const bool before = solve_static_equilibrium(cs, com, 1.0, kGravity).has_value();
    const double ang = M_PI / 2 + 1.2 * u(rng);
    cs.push_back({"extra", "", {u(rng), 0.5 * u(rng)}, {std::cos(ang), std::sin(ang)}, mu(rng)});
    const bool after = solve_static_equilibrium(cs, com, 1.0, kGravity).has_value();
    if (before) {
      EXPECT_TRUE(after) << "trial " << trial;
    }
  }
}

TEST(Balance, StanceSetOperations) {
  const Stance a({ground_contact("l", 0.0, 0.5), ground_contact("r", 0.3, 0.5)});
  const Stance b = a.without("r").with(ground_contact("r", 0.6, 0.5));
  EXPECT_EQ(symmetric_difference(a, a), 0);
  EXPECT_EQ(symmetric_difference(a, a.without("r")), 1);
  EXPECT_EQ(symmetric_difference(a, b), 2);
  EXPECT_EQ(stance_intersection(a, b).size(), 1u);
  EXPECT_EQ(stance_union(a, a.without("l")), a);
  EXPECT_THROW(a.with(ground_contact("l", 1.0, 0.5)), std::invalid_argument);
  EXPECT_NE(a.key(), b.key());
  EXPECT_EQ(stance_from_json(to_json(a), "/s"), a);
}

TEST(Balance, BipedSplitStance) {
  const auto biped = fixtures::planar_biped_7dof();
  const Configuration q = split_stance(biped);
  const Stance both = feet_stance(biped, q, {"left_foot", "right_foot"});
  EXPECT_NEAR(contact_residual(biped, q, both), 0.0, 1e-12);
  ASSERT_TRUE(is_balanced(biped, q, both));
  const auto w = solve_contact_wrenches(biped, q, both);
  ASSERT_TRUE(w);
  const double weight = biped.total_mass() * 9.81;
  EXPECT_NEAR(w->find("left_foot")->normal + w->find("right_foot")->normal, weight, 1e-9 * weight);

  // a single point foot cannot hold a CoM that is not right above it
  const Stance left = feet_stance(biped, q, {"left_foot"});
  EXPECT_FALSE(is_balanced(biped, q, left));

  Configuration moved = q;
  moved[0] += 0.1;
  EXPECT_THROW(solve_contact_wrenches(biped, moved, both), std::invalid_argument);
  EXPECT_THROW(solve_contact_wrenches(biped, q, Stance{}), std::invalid_argument);
}

TEST(Balance, JsonRoundTrip) {
  const WrenchSet w{{{"l", 0.1, 4.0}, {"r", -0.1, 5.0}}};
  const WrenchSet back = wrenches_from_json(to_json(w), "/w");
  ASSERT_EQ(back.forces.size(), 2u);
  EXPECT_DOUBLE_EQ(back.find("r")->tangential, -0.1);
}
