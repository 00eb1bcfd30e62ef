#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace locoplan {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Base pose followed by joint values, SI units.
using Configuration = Eigen::VectorXd;

/// Planar pose in the x-z plane. `theta` rotates +x toward +z.
struct Pose2 {
  double x = 0.0;
  double z = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, z}; }
  Mat2 rotation() const;
  Vec2 transform(const Vec2& local) const { return position() + rotation() * local; }
};

enum class JointType { Revolute, Prismatic };

struct JointSpec {
  std::string name;
  std::string parent;  // link name
  std::string child;   // link created by this joint; defaults to `name`
  JointType type = JointType::Revolute;
  Vec2 origin = Vec2::Zero();  // in the parent link frame
  Vec2 axis = Vec2::UnitX();   // prismatic direction in the parent frame
  double lower = 0.0;
  double upper = 0.0;
  double vel_limit = 1.0;
};

/// A point frame rigidly attached to a link (end-effectors, contact points).
struct FrameSpec {
  std::string name;
  std::string link;
  Vec2 offset = Vec2::Zero();
};

struct CollisionSphere {
  std::string link;
  Vec2 offset = Vec2::Zero();
  double radius = 0.0;
};

struct LinkMass {
  std::string link;
  double mass = 0.0;
  Vec2 com = Vec2::Zero();
};

struct RobotDescription {
  std::string name;
  int base_dof = 3;  // 0 (fixed), 2 (x, z) or 3 (x, z, theta)
  std::vector<double> base_vel_limits;
  std::vector<JointSpec> joints;
  std::vector<FrameSpec> end_effectors;
  std::vector<CollisionSphere> collision_spheres;
  std::vector<LinkMass> masses;
};

/// Immutable planar kinematic model. Link 0 is the base; joints must be
/// listed parents-first.
class RobotModel {
 public:
  RobotModel() = default;
  /// Validates the description; throws std::invalid_argument on violations.
  explicit RobotModel(RobotDescription desc);

  const std::string& name() const { return desc_.name; }
  const RobotDescription& description() const { return desc_; }
  int base_dof() const { return desc_.base_dof; }
  int num_joints() const { return static_cast<int>(desc_.joints.size()); }
  int dof() const { return desc_.base_dof + num_joints(); }
  const std::vector<JointSpec>& joints() const { return desc_.joints; }
  const std::vector<CollisionSphere>& collision_spheres() const { return desc_.collision_spheres; }
  const std::vector<FrameSpec>& end_effectors() const { return desc_.end_effectors; }
  double total_mass() const { return total_mass_; }

  /// Velocity limits for every DoF (base first).
  const Eigen::VectorXd& velocity_limits() const { return vel_limits_; }

  int num_links() const { return static_cast<int>(link_names_.size()); }
  int num_frames() const { return static_cast<int>(frames_.size()); }
  const std::string& frame_name(int idx) const { return frames_.at(idx).name; }
  /// Frame ids cover every link and every end-effector. Throws NotFound.
  int frame_index(std::string_view name) const;
  bool has_frame(std::string_view name) const;
  int link_index(std::string_view name) const;

  /// Throws std::invalid_argument on length mismatch or non-finite values.
  void check(const Configuration& q) const;

  // Kinematic tree internals (used by the free functions below).
  struct Link {
    int parent = -1;  // -1 for base
    int joint = -1;   // joint index driving this link
  };
  struct Frame {
    std::string name;
    int link = 0;
    Vec2 offset = Vec2::Zero();
  };
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const std::vector<int>& link_chain(int link) const { return chains_.at(link); }
  int joint_dof(int joint) const { return desc_.base_dof + joint; }
  int joint_link(int joint) const { return joint_links_.at(joint); }
  /// Link ids of the collision spheres and mass entries, in declaration order.
  const std::vector<int>& sphere_links() const { return sphere_links_; }
  const std::vector<int>& mass_links() const { return mass_links_; }

 private:
  RobotDescription desc_;
  std::vector<std::string> link_names_;
  std::vector<Link> links_;
  std::vector<Frame> frames_;
  std::vector<std::vector<int>> chains_;  // joints from base to link
  std::vector<int> joint_links_;
  std::vector<int> sphere_links_;
  std::vector<int> mass_links_;
  std::unordered_map<std::string, int> frame_lookup_;
  std::unordered_map<std::string, int> link_lookup_;
  Eigen::VectorXd vel_limits_;
  double total_mass_ = 0.0;
};

/// World poses of every link, indexed by link id.
std::vector<Pose2> link_poses(const RobotModel& model, const Configuration& q);

/// Pose of every link and end-effector frame, keyed by frame id.
std::map<std::string, Pose2> forward_kinematics(const RobotModel& model, const Configuration& q);

Pose2 frame_pose(const RobotModel& model, const Configuration& q, int frame);
Vec2 frame_position(const RobotModel& model, const Configuration& q, std::string_view frame);

/// d(x, z, theta)/dq of a frame, 3 x n. Throws NotFound for unknown frames.
Eigen::MatrixXd frame_jacobian(const RobotModel& model, const Configuration& q, std::string_view frame);

/// Position Jacobian (2 x n) of a point fixed on `link` at `offset`.
Eigen::MatrixXd point_jacobian(const RobotModel& model, const std::vector<Pose2>& poses, int link,
                               const Vec2& offset);

Vec2 center_of_mass(const RobotModel& model, const Configuration& q);
Eigen::MatrixXd com_jacobian(const RobotModel& model, const Configuration& q);

/// World center of every collision sphere.
std::vector<Vec2> sphere_centers(const RobotModel& model, const std::vector<Pose2>& poses);

/// Per joint: max(0, q - (upper - margin)) + max(0, (lower + margin) - q).
/// Base DoFs are unbounded and excluded.
Eigen::VectorXd joint_limit_violation(const RobotModel& model, const Configuration& q, double margin);

bool within_joint_limits(const RobotModel& model, const Configuration& q, double margin = 0.0);

/// Clamps joint values into their limits in place.
void clamp_to_limits(const RobotModel& model, Configuration& q);

// Robot fixture file, "locoplan-robot/1".
nlohmann::json robot_to_json(const RobotModel& model);
RobotModel robot_from_json(const nlohmann::json& j);

}  // namespace locoplan
