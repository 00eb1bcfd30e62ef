#include "locoplan/kinematics.hpp"

#include <cmath>
#include <stdexcept>

#include "locoplan/errors.hpp"
#include "locoplan/json_util.hpp"

namespace locoplan {

namespace {

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

const char* kRobotFormat = "locoplan-robot/1";

}  // namespace

Mat2 Pose2::rotation() const {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

RobotModel::RobotModel(RobotDescription desc) : desc_(std::move(desc)) {
  if (desc_.base_dof != 0 && desc_.base_dof != 2 && desc_.base_dof != 3)
    throw std::invalid_argument("base_dof must be 0, 2 or 3");
  if (dof() <= 0) throw std::invalid_argument("robot has no degrees of freedom");
  if (static_cast<int>(desc_.base_vel_limits.size()) != desc_.base_dof)
    throw std::invalid_argument("base_vel_limits must have base_dof entries");

  link_names_.push_back("base");
  links_.push_back({});
  chains_.push_back({});
  link_lookup_["base"] = 0;

  vel_limits_.resize(dof());
  for (int i = 0; i < desc_.base_dof; ++i) {
    if (!(desc_.base_vel_limits[i] > 0.0)) throw std::invalid_argument("velocity limits must be positive");
    vel_limits_[i] = desc_.base_vel_limits[i];
  }

  for (int j = 0; j < num_joints(); ++j) {
    JointSpec& js = desc_.joints[j];
    if (js.child.empty()) js.child = js.name;
    if (!(js.lower < js.upper)) throw std::invalid_argument("joint " + js.name + ": lower must be < upper");
    if (!(js.vel_limit > 0.0)) throw std::invalid_argument("joint " + js.name + ": velocity limit must be > 0");
    if (js.type == JointType::Prismatic) {
      if (js.axis.norm() < 1e-12) throw std::invalid_argument("joint " + js.name + ": zero prismatic axis");
      js.axis.normalize();
    }
    auto parent = link_lookup_.find(js.parent);
    if (parent == link_lookup_.end())
      throw std::invalid_argument("joint " + js.name + ": parent link '" + js.parent + "' not defined before it");
    if (link_lookup_.count(js.child)) throw std::invalid_argument("duplicate link " + js.child);
    const int id = static_cast<int>(link_names_.size());
    link_names_.push_back(js.child);
    links_.push_back({parent->second, j});
    std::vector<int> chain = chains_[parent->second];
    chain.push_back(j);
    chains_.push_back(std::move(chain));
    link_lookup_[js.child] = id;
    joint_links_.push_back(id);
    vel_limits_[desc_.base_dof + j] = js.vel_limit;
  }

  for (int l = 0; l < num_links(); ++l) {
    frame_lookup_[link_names_[l]] = static_cast<int>(frames_.size());
    frames_.push_back({link_names_[l], l, Vec2::Zero()});
  }
  for (const auto& ee : desc_.end_effectors) {
    if (frame_lookup_.count(ee.name)) throw std::invalid_argument("duplicate frame " + ee.name);
    frame_lookup_[ee.name] = static_cast<int>(frames_.size());
    frames_.push_back({ee.name, link_index(ee.link), ee.offset});
  }
  for (const auto& s : desc_.collision_spheres) {
    if (!(s.radius > 0.0)) throw std::invalid_argument("collision sphere radius must be > 0");
    sphere_links_.push_back(link_index(s.link));
  }
  for (const auto& m : desc_.masses) {
    if (m.mass < 0.0) throw std::invalid_argument("negative link mass");
    mass_links_.push_back(link_index(m.link));
    total_mass_ += m.mass;
  }
}

int RobotModel::frame_index(std::string_view name) const {
  auto it = frame_lookup_.find(std::string(name));
  if (it == frame_lookup_.end()) throw NotFound("unknown frame '" + std::string(name) + "'");
  return it->second;
}

bool RobotModel::has_frame(std::string_view name) const { return frame_lookup_.count(std::string(name)) > 0; }

int RobotModel::link_index(std::string_view name) const {
  auto it = link_lookup_.find(std::string(name));
  if (it == link_lookup_.end()) throw std::invalid_argument("unknown link '" + std::string(name) + "'");
  return it->second;
}

void RobotModel::check(const Configuration& q) const {
  if (q.size() != dof())
    throw std::invalid_argument("configuration has " + std::to_string(q.size()) + " values, model '" + name() +
                                "' expects " + std::to_string(dof()));
  if (!q.allFinite()) throw std::invalid_argument("configuration contains non-finite values");
}

std::vector<Pose2> link_poses(const RobotModel& model, const Configuration& q) {
  model.check(q);
  std::vector<Pose2> poses(model.num_links());
  Pose2& base = poses[0];
  if (model.base_dof() >= 2) {
    base.x = q[0];
    base.z = q[1];
  }
  if (model.base_dof() == 3) base.theta = q[2];

  const auto& joints = model.joints();
  for (int l = 1; l < model.num_links(); ++l) {
    const auto& link = model.links()[l];
    const JointSpec& js = joints[link.joint];
    const Pose2& parent = poses[link.parent];
    const double v = q[model.joint_dof(link.joint)];
    Pose2 p;
    if (js.type == JointType::Revolute) {
      const Vec2 o = parent.transform(js.origin);
      p = {o.x(), o.y(), parent.theta + v};
    } else {
      const Vec2 o = parent.transform(js.origin + v * js.axis);
      p = {o.x(), o.y(), parent.theta};
    }
    poses[l] = p;
  }
  return poses;
}

std::map<std::string, Pose2> forward_kinematics(const RobotModel& model, const Configuration& q) {
  const auto poses = link_poses(model, q);
  std::map<std::string, Pose2> out;
  for (const auto& f : model.frames()) {
    const Pose2& lp = poses[f.link];
    const Vec2 p = lp.transform(f.offset);
    out[f.name] = {p.x(), p.y(), lp.theta};
  }
  return out;
}

Pose2 frame_pose(const RobotModel& model, const Configuration& q, int frame) {
  const auto poses = link_poses(model, q);
  const auto& f = model.frames().at(frame);
  const Vec2 p = poses[f.link].transform(f.offset);
  return {p.x(), p.y(), poses[f.link].theta};
}

Vec2 frame_position(const RobotModel& model, const Configuration& q, std::string_view frame) {
  return frame_pose(model, q, model.frame_index(frame)).position();
}

Eigen::MatrixXd point_jacobian(const RobotModel& model, const std::vector<Pose2>& poses, int link,
                               const Vec2& offset) {
  const int n = model.dof();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, n);
  const Vec2 p = poses[link].transform(offset);
  if (model.base_dof() >= 2) {
    jac(0, 0) = 1.0;
    jac(1, 1) = 1.0;
  }
  if (model.base_dof() == 3) jac.col(2) = perp(p - poses[0].position());

  const auto& joints = model.joints();
  for (int j : model.link_chain(link)) {
    const JointSpec& js = joints[j];
    const int child = model.joint_link(j);
    const Pose2& parent = poses[model.links()[child].parent];
    if (js.type == JointType::Revolute) {
      jac.col(model.joint_dof(j)) = perp(p - poses[child].position());
    } else {
      jac.col(model.joint_dof(j)) = parent.rotation() * js.axis;
    }
  }
  return jac;
}

Eigen::MatrixXd frame_jacobian(const RobotModel& model, const Configuration& q, std::string_view frame) {
  const int idx = model.frame_index(frame);
  const auto poses = link_poses(model, q);
  const auto& f = model.frames()[idx];
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3, model.dof());
  jac.topRows(2) = point_jacobian(model, poses, f.link, f.offset);
  if (model.base_dof() == 3) jac(2, 2) = 1.0;
  for (int j : model.link_chain(f.link))
    if (model.joints()[j].type == JointType::Revolute) jac(2, model.joint_dof(j)) = 1.0;
  return jac;
}

Vec2 center_of_mass(const RobotModel& model, const Configuration& q) {
  const auto poses = link_poses(model, q);
  Vec2 c = Vec2::Zero();
  double m = 0.0;
  const auto& masses = model.description().masses;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    c += masses[i].mass * poses[model.mass_links()[i]].transform(masses[i].com);
    m += masses[i].mass;
  }
  if (m <= 0.0) return poses[0].position();
  return c / m;
}

Eigen::MatrixXd com_jacobian(const RobotModel& model, const Configuration& q) {
  const auto poses = link_poses(model, q);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, model.dof());
  const double m = model.total_mass();
  if (m <= 0.0) return point_jacobian(model, poses, 0, Vec2::Zero());
  const auto& masses = model.description().masses;
  for (std::size_t i = 0; i < masses.size(); ++i)
    jac += (masses[i].mass / m) * point_jacobian(model, poses, model.mass_links()[i], masses[i].com);
  return jac;
}

std::vector<Vec2> sphere_centers(const RobotModel& model, const std::vector<Pose2>& poses) {
  std::vector<Vec2> out;
  out.reserve(model.collision_spheres().size());
  const auto& spheres = model.collision_spheres();
  for (std::size_t i = 0; i < spheres.size(); ++i)
    out.push_back(poses[model.sphere_links()[i]].transform(spheres[i].offset));
  return out;
}

Eigen::VectorXd joint_limit_violation(const RobotModel& model, const Configuration& q, double margin) {
  model.check(q);
  Eigen::VectorXd v(model.num_joints());
  for (int j = 0; j < model.num_joints(); ++j) {
    const auto& js = model.joints()[j];
    const double x = q[model.joint_dof(j)];
    v[j] = std::max(0.0, x - (js.upper - margin)) + std::max(0.0, (js.lower + margin) - x);
  }
  return v;
}

bool within_joint_limits(const RobotModel& model, const Configuration& q, double margin) {
  return model.num_joints() == 0 || joint_limit_violation(model, q, margin).maxCoeff() <= 0.0;
}

void clamp_to_limits(const RobotModel& model, Configuration& q) {
  for (int j = 0; j < model.num_joints(); ++j) {
    const auto& js = model.joints()[j];
    double& x = q[model.joint_dof(j)];
    x = std::clamp(x, js.lower, js.upper);
  }
}

nlohmann::json robot_to_json(const RobotModel& model) {
  using nlohmann::json;
  using json_util::to_json;
  const auto& d = model.description();
  json j;
  j["format"] = kRobotFormat;
  j["name"] = d.name;
  j["base_dof"] = d.base_dof;
  j["base_vel_limits"] = d.base_vel_limits;
  j["joints"] = json::array();
  for (const auto& js : d.joints) {
    json o{{"name", js.name},
           {"parent", js.parent},
           {"child", js.child},
           {"type", js.type == JointType::Revolute ? "revolute" : "prismatic"},
           {"origin", to_json(js.origin)},
           {"limits", {js.lower, js.upper}},
           {"vel_limit", js.vel_limit}};
    if (js.type == JointType::Prismatic) o["axis"] = to_json(js.axis);
    j["joints"].push_back(o);
  }
  j["end_effectors"] = json::array();
  for (const auto& f : d.end_effectors)
    j["end_effectors"].push_back({{"name", f.name}, {"link", f.link}, {"offset", to_json(f.offset)}});
  j["collision_spheres"] = json::array();
  for (const auto& s : d.collision_spheres)
    j["collision_spheres"].push_back({{"link", s.link}, {"offset", to_json(s.offset)}, {"radius", s.radius}});
  j["masses"] = json::array();
  for (const auto& m : d.masses)
    j["masses"].push_back({{"link", m.link}, {"mass", m.mass}, {"com", to_json(m.com)}});
  return j;
}

RobotModel robot_from_json(const nlohmann::json& j) {
  namespace ju = json_util;
  const std::string root;
  ju::expect_format(j, kRobotFormat);
  RobotDescription d;
  d.name = ju::string(j, "name", root);
  d.base_dof = static_cast<int>(ju::number(j, "base_dof", root));
  if (j.contains("base_vel_limits")) {
    Eigen::VectorXd v = ju::vector(j.at("base_vel_limits"), "/base_vel_limits");
    d.base_vel_limits.assign(v.data(), v.data() + v.size());
  }
  if (j.contains("joints")) {
    const auto& arr = ju::array(j.at("joints"), "/joints");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = ju::join("/joints", i);
      const auto& o = arr[i];
      JointSpec js;
      js.name = ju::string(o, "name", p);
      js.parent = ju::string(o, "parent", p);
      if (o.contains("child")) js.child = ju::string(o.at("child"), ju::join(p, "child"));
      const std::string type = o.contains("type") ? ju::string(o.at("type"), ju::join(p, "type")) : "revolute";
      if (type == "revolute") {
        js.type = JointType::Revolute;
      } else if (type == "prismatic") {
        js.type = JointType::Prismatic;
        js.axis = ju::vec2(o, "axis", p);
      } else {
        throw FormatError(ju::join(p, "type"), "expected \"revolute\" or \"prismatic\"");
      }
      if (o.contains("origin")) js.origin = ju::vec2(o.at("origin"), ju::join(p, "origin"));
      const Vec2 lim = ju::vec2(o, "limits", p);
      js.lower = lim.x();
      js.upper = lim.y();
      if (!(js.lower < js.upper)) throw FormatError(ju::join(p, "limits"), "lower must be < upper");
      js.vel_limit = ju::number(o, "vel_limit", p);
      if (!(js.vel_limit > 0)) throw FormatError(ju::join(p, "vel_limit"), "must be > 0");
      d.joints.push_back(js);
    }
  }
  if (j.contains("end_effectors")) {
    const auto& arr = ju::array(j.at("end_effectors"), "/end_effectors");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = ju::join("/end_effectors", i);
      FrameSpec f;
      f.name = ju::string(arr[i], "name", p);
      f.link = ju::string(arr[i], "link", p);
      if (arr[i].contains("offset")) f.offset = ju::vec2(arr[i].at("offset"), ju::join(p, "offset"));
      d.end_effectors.push_back(f);
    }
  }
  if (j.contains("collision_spheres")) {
    const auto& arr = ju::array(j.at("collision_spheres"), "/collision_spheres");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = ju::join("/collision_spheres", i);
      CollisionSphere s;
      s.link = ju::string(arr[i], "link", p);
      if (arr[i].contains("offset")) s.offset = ju::vec2(arr[i].at("offset"), ju::join(p, "offset"));
      s.radius = ju::number(arr[i], "radius", p);
      if (!(s.radius > 0)) throw FormatError(ju::join(p, "radius"), "must be > 0");
      d.collision_spheres.push_back(s);
    }
  }
  if (j.contains("masses")) {
    const auto& arr = ju::array(j.at("masses"), "/masses");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = ju::join("/masses", i);
      LinkMass m;
      m.link = ju::string(arr[i], "link", p);
      m.mass = ju::number(arr[i], "mass", p);
      if (arr[i].contains("com")) m.com = ju::vec2(arr[i].at("com"), ju::join(p, "com"));
      d.masses.push_back(m);
    }
  }
  try {
    return RobotModel(std::move(d));
  } catch (const std::invalid_argument& e) {
    throw FormatError("", e.what());
  }
}

}  // namespace locoplan
