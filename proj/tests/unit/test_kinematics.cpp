#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "locoplan/errors.hpp"
#include "locoplan/fixtures.hpp"
#include "locoplan/kinematics.hpp"
#include "oracles.hpp"

using namespace locoplan;

namespace {

Configuration q2(double a, double b) {
  Configuration q(2);
  q << a, b;
  return q;
}

Configuration random_q(const RobotModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Configuration q(m.dof());
  for (int k = 0; k < m.base_dof(); ++k) q[k] = 2.0 * u(rng);
  for (int j = 0; j < m.num_joints(); ++j) {
    const auto& js = m.joints()[j];
    q[m.joint_dof(j)] = js.lower + (js.upper - js.lower) * 0.5 * (u(rng) + 1.0);
  }
  return q;
}

RobotModel prismatic_robot() {
  RobotDescription d;
  d.name = "slider";
  d.base_dof = 3;
  d.base_vel_limits = {1.0, 1.0, 1.0};
  JointSpec s;
  s.name = "slide";
  s.parent = "base";
  s.child = "carriage";
  s.type = JointType::Prismatic;
  s.origin = {0.2, 0.0};
  s.axis = {0.0, 1.0};
  s.lower = -0.5;
  s.upper = 0.5;
  JointSpec r;
  r.name = "wrist";
  r.parent = "carriage";
  r.child = "hand";
  r.origin = {0.3, 0.1};
  r.lower = -2.0;
  r.upper = 2.0;
  d.joints = {s, r};
  d.end_effectors = {{"tip", "hand", {0.4, 0.0}}};
  d.collision_spheres = {{"hand", {0.2, 0.0}, 0.05}};
  d.masses = {{"base", 2.0, {0.0, 0.0}}, {"hand", 1.0, {0.2, 0.0}}};
  return RobotModel(d);
}

}  // namespace

TEST(Kinematics, TwoLinkStraight) {
  const auto arm = fixtures::two_link_arm();
  const Vec2 ee = frame_position(arm, q2(0, 0), "ee");
  EXPECT_NEAR(ee.x(), 2.0, 1e-12);
  EXPECT_NEAR(ee.y(), 0.0, 1e-12);
}

TEST(Kinematics, TwoLinkRotated) {
  const auto arm = fixtures::two_link_arm();
  const Vec2 ee = frame_position(arm, q2(M_PI / 2, 0), "ee");
  EXPECT_NEAR(ee.x(), 0.0, 1e-12);
  EXPECT_NEAR(ee.y(), 2.0, 1e-12);
}

TEST(Kinematics, TwoLinkElbow) {
  const auto arm = fixtures::two_link_arm();
  const Vec2 ee = frame_position(arm, q2(M_PI / 2, -M_PI / 2), "ee");
  const Vec2 expect = oracle::two_link_ee(M_PI / 2, -M_PI / 2);
  EXPECT_NEAR(ee.x(), 1.0, 1e-12);
  EXPECT_NEAR(ee.y(), 1.0, 1e-12);
  EXPECT_NEAR((ee - expect).norm(), 0.0, 1e-12);
}

TEST(Kinematics, TwoLinkRandomMatchesClosedForm) {
  const auto arm = fixtures::two_link_arm();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng);
    EXPECT_NEAR((frame_position(arm, q2(a, b), "ee") - oracle::two_link_ee(a, b)).norm(), 0.0, 1e-12);
    EXPECT_NEAR(frame_pose(arm, q2(a, b), arm.frame_index("ee")).theta, a + b, 1e-12);
  }
}

TEST(Kinematics, ForwardKinematicsListsAllFrames) {
  const auto biped = fixtures::planar_biped_7dof();
  const auto fk = forward_kinematics(biped, Configuration::Zero(biped.dof()));
  EXPECT_EQ(static_cast<int>(fk.size()), biped.num_frames());
  ASSERT_TRUE(fk.count("left_foot"));
  EXPECT_NEAR(fk.at("left_foot").z, -1.0, 1e-12);
  EXPECT_NEAR(fk.at("left_kneecap").z, -0.5, 1e-12);
}

TEST(Kinematics, TwoLinkJacobianColumns) {
  const auto arm = fixtures::two_link_arm();
  const Eigen::MatrixXd j = frame_jacobian(arm, q2(0, 0), "ee");
  ASSERT_EQ(j.rows(), 3);
  ASSERT_EQ(j.cols(), 2);
  EXPECT_NEAR((j.col(0) - Eigen::Vector3d(0, 2, 1)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((j.col(1) - Eigen::Vector3d(0, 1, 1)).norm(), 0.0, 1e-12);
}

TEST(Kinematics, BaseXColumnIsUnit) {
  std::mt19937_64 rng(11);
  for (const auto& name : {"point-robot-2d", "planar-biped-7dof", "planar-wheeler-6dof"}) {
    const auto m = fixtures::by_name(name);
    for (int k = 0; k < 20; ++k) {
      const Configuration q = random_q(m, rng);
      for (int f = 0; f < m.num_frames(); ++f) {
        const Eigen::MatrixXd j = frame_jacobian(m, q, m.frame_name(f));
        EXPECT_NEAR((j.col(0) - Eigen::Vector3d(1, 0, 0)).norm(), 0.0, 1e-12) << name << " " << m.frame_name(f);
      }
    }
  }
}

TEST(Kinematics, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::vector<RobotModel> models = {fixtures::two_link_arm(), fixtures::planar_biped_7dof(),
                                    fixtures::planar_wheeler_6dof(), prismatic_robot()};
  for (const auto& m : models) {
    for (int k = 0; k < 25; ++k) {
      const Configuration q = random_q(m, rng);
      for (int f = 0; f < m.num_frames(); ++f) {
        const std::string name = m.frame_name(f);
        auto fk = [&](const Eigen::VectorXd& x) {
          const Pose2 p = frame_pose(m, x, f);
          return Eigen::VectorXd(Eigen::Vector3d(p.x, p.z, p.theta));
        };
        const Eigen::MatrixXd fd = oracle::fd_jacobian(fk, q);
        EXPECT_LE((frame_jacobian(m, q, name) - fd).cwiseAbs().maxCoeff(), 1e-6) << m.name() << " " << name;
      }
    }
  }
}

TEST(Kinematics, ComJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (const auto& m : {fixtures::planar_biped_7dof(), prismatic_robot()}) {
    for (int k = 0; k < 20; ++k) {
      const Configuration q = random_q(m, rng);
      auto com = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(center_of_mass(m, x)); };
      EXPECT_LE((com_jacobian(m, q) - oracle::fd_jacobian(com, q)).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Kinematics, PrismaticJoint) {
  const auto m = prismatic_robot();
  Configuration q = Configuration::Zero(m.dof());
  q[3] = 0.25;
  const Vec2 tip = frame_position(m, q, "tip");
  EXPECT_NEAR(tip.x(), 0.2 + 0.3 + 0.4, 1e-12);
  EXPECT_NEAR(tip.y(), 0.25 + 0.1, 1e-12);
}

TEST(Kinematics, TranslationEquivariance) {
  const auto m = fixtures::planar_biped_7dof();
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    Configuration q = random_q(m, rng);
    const auto a = forward_kinematics(m, q);
    q[0] += 0.7;
    q[1] -= 0.3;
    const auto b = forward_kinematics(m, q);
    for (const auto& [name, pa] : a) {
      EXPECT_NEAR(b.at(name).x - pa.x, 0.7, 1e-12);
      EXPECT_NEAR(b.at(name).z - pa.z, -0.3, 1e-12);
      EXPECT_NEAR(b.at(name).theta, pa.theta, 1e-12);
    }
  }
}

TEST(Kinematics, JointLimitViolation) {
  RobotDescription d;
  d.name = "one";
  d.base_dof = 0;
  JointSpec j;
  j.name = "j";
  j.parent = "base";
  j.lower = -1.0;
  j.upper = 1.0;
  d.joints = {j};
  const RobotModel m(d);
  Configuration q(1);
  q << 0.0;
  EXPECT_DOUBLE_EQ(joint_limit_violation(m, q, 0.0)[0], 0.0);
  q << 1.2;
  EXPECT_NEAR(joint_limit_violation(m, q, 0.0)[0], 0.2, 1e-12);
  q << 0.95;
  EXPECT_NEAR(joint_limit_violation(m, q, 0.1)[0], 0.05, 1e-12);
  q << -1.3;
  EXPECT_NEAR(joint_limit_violation(m, q, 0.0)[0], 0.3, 1e-12);
  EXPECT_FALSE(within_joint_limits(m, q));
  clamp_to_limits(m, q);
  EXPECT_DOUBLE_EQ(q[0], -1.0);
  EXPECT_TRUE(within_joint_limits(m, q));
}

TEST(Kinematics, BaseDofsExcludedFromLimits) {
  const auto m = fixtures::planar_biped_7dof();
  Configuration q = Configuration::Zero(m.dof());
  q[2] = 100.0;
  q[4] = -0.5;
  q[6] = -0.5;
  EXPECT_EQ(joint_limit_violation(m, q, 0.0).size(), 4);
  EXPECT_TRUE(within_joint_limits(m, q));
}

TEST(Kinematics, UnknownFrameThrows) {
  const auto arm = fixtures::two_link_arm();
  EXPECT_THROW(frame_jacobian(arm, q2(0, 0), "nope"), NotFound);
  EXPECT_THROW(arm.frame_index("nope"), NotFound);
  EXPECT_FALSE(arm.has_frame("nope"));
  EXPECT_TRUE(arm.has_frame("ee"));
}

TEST(Kinematics, ConfigurationChecks) {
  const auto arm = fixtures::two_link_arm();
  EXPECT_THROW(arm.check(Configuration::Zero(3)), std::invalid_argument);
  EXPECT_THROW(arm.check(q2(NAN, 0.0)), std::invalid_argument);
  EXPECT_NO_THROW(arm.check(q2(0.1, 0.2)));
}

TEST(Kinematics, InvalidDescriptionsRejected) {
  RobotDescription d;
  d.name = "bad";
  d.base_dof = 1;
  EXPECT_THROW(RobotModel{d}, std::invalid_argument);
  d.base_dof = 0;
  JointSpec j;
  j.name = "j";
  j.parent = "missing";
  j.lower = -1;
  j.upper = 1;
  d.joints = {j};
  EXPECT_THROW(RobotModel{d}, std::invalid_argument);
  d.joints[0].parent = "base";
  d.joints[0].lower = 2.0;
  EXPECT_THROW(RobotModel{d}, std::invalid_argument);
}

TEST(Kinematics, RobotJsonRoundTrip) {
  for (const auto& name : fixtures::names()) {
    const auto m = fixtures::by_name(name);
    const auto back = robot_from_json(robot_to_json(m));
    EXPECT_EQ(back.dof(), m.dof());
    EXPECT_EQ(robot_to_json(back), robot_to_json(m)) << name;
    std::mt19937_64 rng(1);
    const Configuration q = random_q(m, rng);
    EXPECT_NEAR((center_of_mass(back, q) - center_of_mass(m, q)).norm(), 0.0, 1e-15);
  }
}

TEST(Kinematics, UnknownFixtureThrows) { EXPECT_THROW(fixtures::by_name("robot-x"), NotFound); }

TEST(Kinematics, CenterOfMassWeightedMean) {
  const auto arm = fixtures::two_link_arm();
  const Vec2 c = center_of_mass(arm, q2(0, 0));
  EXPECT_NEAR(c.x(), 1.0, 1e-12);  // (0.5 + 1.5) / 2
  EXPECT_NEAR(c.y(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(arm.total_mass(), 2.0);
}
