#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "locoplan/kinematics.hpp"
#include "locoplan/world.hpp"

namespace locoplan {

/// Contact-to-pose tolerance [m] used when checking a stance against a configuration.
inline constexpr double kContactTolerance = 1e-4;

inline const Vec2 kGravity{0.0, -9.81};

/// Point contact with Coulomb friction.
struct Contact {
  std::string end_effector;
  std::string surface;  // source surface id, may be empty
  Vec2 position = Vec2::Zero();
  Vec2 normal = Vec2::UnitY();
  double mu = 0.0;

  static Contact on(const std::string& end_effector, const ContactPoint& p) {
    return {end_effector, p.surface, p.position, p.normal, p.mu};
  }
};

/// Same end-effector and the same pose (within 1e-9 m).
bool same_contact(const Contact& a, const Contact& b);

/// Set of contacts, at most one per end-effector, kept sorted by end-effector.
/// A rolling stance holds wheel contacts whose positions follow the
/// end-effectors; their support is the ground projection of the wheels.
class Stance {
 public:
  Stance() = default;
  explicit Stance(std::vector<Contact> contacts, bool rolling = false);

  const std::vector<Contact>& contacts() const { return contacts_; }
  bool rolling() const { return rolling_; }
  std::size_t size() const { return contacts_.size(); }
  bool empty() const { return contacts_.empty(); }

  const Contact* find(std::string_view end_effector) const;
  bool contains(const Contact& c) const;
  Stance with(const Contact& c) const;  // throws std::invalid_argument if the end-effector is taken
  Stance without(std::string_view end_effector) const;

  /// Canonical text form, used for memoization.
  std::string key() const;

  friend bool operator==(const Stance& a, const Stance& b);

 private:
  std::vector<Contact> contacts_;
  bool rolling_ = false;
};

Stance stance_union(const Stance& a, const Stance& b);
Stance stance_intersection(const Stance& a, const Stance& b);
int symmetric_difference(const Stance& a, const Stance& b);

struct ContactForce {
  std::string end_effector;
  double tangential = 0.0;
  double normal = 0.0;
};

struct WrenchSet {
  std::vector<ContactForce> forces;

  const ContactForce* find(std::string_view end_effector) const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
  double midpoint() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

/// Unit tangent used for the tangential force component: the normal turned
/// clockwise, so flat ground (normal +z) has tangent +x.
inline Vec2 contact_tangent(const Vec2& normal) { return {normal.y(), -normal.x()}; }

/// Minimum-norm contact forces holding a body of `mass` with center of mass
/// `com` in static equilibrium, or nullopt when no forces inside the friction
/// cones achieve it.
std::optional<WrenchSet> solve_static_equilibrium(std::span<const Contact> contacts, const Vec2& com, double mass,
                                                  const Vec2& gravity);

/// (sum Fx, sum Fz, torque about com) including gravity.
Eigen::Vector3d equilibrium_residual(std::span<const Contact> contacts, const Vec2& com, double mass,
                                     const Vec2& gravity, const WrenchSet& wrenches);

/// Range of center-of-mass x for which the contacts can hold the body, taken
/// over the vertices of the force polytope. Requires vertical gravity.
std::optional<Interval> support_interval(std::span<const Contact> contacts, double mass, const Vec2& gravity);

/// Contacts as seen by the statics: rolling contacts are projected onto the
/// ground line at the current end-effector x.
std::vector<Contact> effective_contacts(const RobotModel& model, const Configuration& q, const Stance& stance);

/// Largest distance between a contacted end-effector and its contact pose
/// (0 for rolling or empty stances).
double contact_residual(const RobotModel& model, const Configuration& q, const Stance& stance);

/// Throws std::invalid_argument for an empty stance or when an end-effector
/// is farther than `tol_contact` from its contact.
std::optional<WrenchSet> solve_contact_wrenches(const RobotModel& model, const Configuration& q,
                                                const Stance& stance, const Vec2& gravity = kGravity,
                                                double tol_contact = kContactTolerance);

bool is_balanced(const RobotModel& model, const Configuration& q, const Stance& stance,
                 const Vec2& gravity = kGravity, double tol_contact = kContactTolerance);

/// Support interval of a stance at q (rolling stances depend on q).
std::optional<Interval> stance_support(const RobotModel& model, const Configuration& q, const Stance& stance,
                                       const Vec2& gravity = kGravity);

nlohmann::json to_json(const Contact& c);
nlohmann::json to_json(const Stance& s);
nlohmann::json to_json(const WrenchSet& w);
Contact contact_from_json(const nlohmann::json& j, const std::string& path);
Stance stance_from_json(const nlohmann::json& j, const std::string& path);
WrenchSet wrenches_from_json(const nlohmann::json& j, const std::string& path);

/// Resolves {"ee", "surface", "t" | "position"} entries against a world.
Stance stance_from_task_json(const nlohmann::json& j, const WorldState& world, const std::string& path,
                             bool rolling = false);

}  // namespace locoplan
