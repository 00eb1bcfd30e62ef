#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "locoplan/kinematics.hpp"

namespace locoplan {

/// Returned by signed_distance when the world holds no obstacles.
inline constexpr double kNoObstacleDistance = 1e9;

/// Contactable line segment with an outward unit normal.
struct ContactSurface {
  std::string id;
  Vec2 p0 = Vec2::Zero();
  Vec2 p1 = Vec2::UnitX();
  Vec2 normal = Vec2::UnitY();
  double mu = 0.5;

  Vec2 point_at(double t) const { return p0 + t * (p1 - p0); }
  double length() const { return (p1 - p0).norm(); }
};

struct Disc {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
};

/// Axis-aligned box.
struct Box {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Ones();
};

using Shape = std::variant<Disc, Box>;

struct Obstacle {
  std::string id;
  Shape shape;
  double created_at = 0.0;
};

struct DistanceQuery {
  double distance = kNoObstacleDistance;
  Vec2 gradient = Vec2::Zero();  // d(distance)/d(point); zero when no obstacle
  std::optional<std::string> nearest;
};

/// Signed distance to one shape with its gradient.
DistanceQuery shape_distance(const Shape& shape, const Vec2& point);

/// Immutable world contents tagged with the revision they were published at.
struct WorldState {
  std::vector<ContactSurface> surfaces;
  std::vector<Obstacle> obstacles;
  std::uint64_t revision = 0;

  const ContactSurface& surface(const std::string& id) const;  // throws NotFound
  const Obstacle* find_obstacle(const std::string& id) const;
};

/// Minimum signed distance over all obstacles (negative inside).
DistanceQuery signed_distance(const WorldState& world, const Vec2& point);

/// Throws std::invalid_argument on duplicate ids, degenerate segments or shapes.
void validate(const WorldState& world);
void validate(const ContactSurface& surface);
void validate(const Shape& shape);

struct ContactPoint {
  std::string surface;
  Vec2 position = Vec2::Zero();
  Vec2 normal = Vec2::UnitY();
  double mu = 0.0;
};

/// Contact pose at segment parameter t in [0, 1].
ContactPoint contact_point_at(const ContactSurface& surface, double t);

/// Uniform sample on the surface, optionally restricted to [t_lo, t_hi].
ContactPoint sample_contact_point(const WorldState& world, const std::string& surface, std::mt19937_64& rng,
                                  double t_lo = 0.0, double t_hi = 1.0);

/// One box per occupied grid cell of size `cell`, sorted by cell index.
/// Obstacle ids are "cell_<i>_<k>".
std::vector<Obstacle> ingest_point_cloud(const std::vector<Vec2>& points, double cell);

/// Whitespace-separated "x z" pairs, one per line; '#' starts a comment.
std::vector<Vec2> read_point_cloud(const std::string& path);

/// Single-writer world with snapshot publication. Every mutation bumps the
/// revision; readers hold immutable snapshots.
class World {
 public:
  World();
  explicit World(WorldState initial);

  std::shared_ptr<const WorldState> snapshot() const;
  std::uint64_t revision() const;

  std::uint64_t add_obstacle(Obstacle obstacle);
  std::uint64_t move_obstacle(const std::string& id, Shape shape);  // throws NotFound
  std::uint64_t remove_obstacle(const std::string& id);             // throws NotFound
  std::uint64_t add_surface(ContactSurface surface);

 private:
  std::uint64_t publish(WorldState next);

  mutable std::mutex mutex_;
  std::shared_ptr<const WorldState> current_;
};

nlohmann::json to_json(const ContactSurface& s);
nlohmann::json to_json(const Obstacle& o);
nlohmann::json shape_to_json(const Shape& s);
ContactSurface surface_from_json(const nlohmann::json& j, const std::string& path);
Obstacle obstacle_from_json(const nlohmann::json& j, const std::string& path);
/// Accepts {"disc": {...}} or {"box": {...}} at the given object.
Shape shape_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json world_to_json(const WorldState& w);

}  // namespace locoplan
