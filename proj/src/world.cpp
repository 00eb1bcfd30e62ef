#include "locoplan/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "locoplan/errors.hpp"
#include "locoplan/json_util.hpp"

namespace locoplan {

namespace {

double sign_or_one(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

DistanceQuery shape_distance(const Shape& shape, const Vec2& point) {
  DistanceQuery out;
  if (const auto* disc = std::get_if<Disc>(&shape)) {
    const Vec2 v = point - disc->center;
    const double n = v.norm();
    out.distance = n - disc->radius;
    out.gradient = n > 0.0 ? Vec2(v / n) : Vec2::UnitX();
    return out;
  }
  const auto& box = std::get<Box>(shape);
  const Vec2 center = 0.5 * (box.min + box.max);
  const Vec2 half = 0.5 * (box.max - box.min);
  const Vec2 rel = point - center;
  const Vec2 s(sign_or_one(rel.x()), sign_or_one(rel.y()));
  const Vec2 d = rel.cwiseAbs() - half;
  if (d.x() > 0.0 || d.y() > 0.0) {
    const Vec2 o = d.cwiseMax(0.0);
    out.distance = o.norm();
    out.gradient = o.cwiseProduct(s) / out.distance;
  } else if (d.x() >= d.y()) {
    out.distance = d.x();
    out.gradient = {s.x(), 0.0};
  } else {
    out.distance = d.y();
    out.gradient = {0.0, s.y()};
  }
  return out;
}

const ContactSurface& WorldState::surface(const std::string& id) const {
  for (const auto& s : surfaces)
    if (s.id == id) return s;
  throw NotFound("unknown surface '" + id + "'");
}

const Obstacle* WorldState::find_obstacle(const std::string& id) const {
  for (const auto& o : obstacles)
    if (o.id == id) return &o;
  return nullptr;
}

DistanceQuery signed_distance(const WorldState& world, const Vec2& point) {
  DistanceQuery best;
  for (const auto& o : world.obstacles) {
    DistanceQuery q = shape_distance(o.shape, point);
    if (!best.nearest || q.distance < best.distance) {
      best = q;
      best.nearest = o.id;
    }
  }
  return best;
}

void validate(const ContactSurface& s) {
  if (!s.p0.allFinite() || !s.p1.allFinite()) throw std::invalid_argument("surface " + s.id + ": non-finite point");
  if ((s.p1 - s.p0).norm() < 1e-12) throw std::invalid_argument("surface " + s.id + ": p0 == p1");
  if (std::abs(s.normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("surface " + s.id + ": normal not unit");
  if (std::abs(s.normal.dot((s.p1 - s.p0).normalized())) > 1e-9)
    throw std::invalid_argument("surface " + s.id + ": normal not perpendicular to segment");
  if (!(s.mu >= 0.0)) throw std::invalid_argument("surface " + s.id + ": negative friction");
}

void validate(const Shape& shape) {
  if (const auto* d = std::get_if<Disc>(&shape)) {
    if (!(d->radius > 0.0) || !d->center.allFinite()) throw std::invalid_argument("disc radius must be > 0");
  } else {
    const auto& b = std::get<Box>(shape);
    if (!(b.min.x() < b.max.x() && b.min.y() < b.max.y())) throw std::invalid_argument("box requires min < max");
  }
}

void validate(const WorldState& world) {
  std::unordered_set<std::string> ids;
  for (const auto& s : world.surfaces) {
    validate(s);
    if (!ids.insert(s.id).second) throw std::invalid_argument("duplicate id " + s.id);
  }
  for (const auto& o : world.obstacles) {
    validate(o.shape);
    if (!ids.insert(o.id).second) throw std::invalid_argument("duplicate id " + o.id);
  }
}

ContactPoint contact_point_at(const ContactSurface& surface, double t) {
  return {surface.id, surface.point_at(t), surface.normal, surface.mu};
}

ContactPoint sample_contact_point(const WorldState& world, const std::string& surface, std::mt19937_64& rng,
                                  double t_lo, double t_hi) {
  const ContactSurface& s = world.surface(surface);
  t_lo = std::clamp(t_lo, 0.0, 1.0);
  t_hi = std::clamp(t_hi, t_lo, 1.0);
  std::uniform_real_distribution<double> dist(t_lo, t_hi);
  return contact_point_at(s, dist(rng));
}

std::vector<Obstacle> ingest_point_cloud(const std::vector<Vec2>& points, double cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("cell size must be > 0");
  std::set<std::pair<long, long>> cells;
  for (const auto& p : points) {
    if (!p.allFinite()) continue;
    cells.emplace(static_cast<long>(std::floor(p.x() / cell)), static_cast<long>(std::floor(p.y() / cell)));
  }
  std::vector<Obstacle> out;
  out.reserve(cells.size());
  for (const auto& [i, k] : cells) {
    Box b{{i * cell, k * cell}, {(i + 1) * cell, (k + 1) * cell}};
    out.push_back({"cell_" + std::to_string(i) + "_" + std::to_string(k), b, 0.0});
  }
  return out;
}

std::vector<Vec2> read_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open point cloud " + path);
  std::vector<Vec2> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double x, z;
    if (!(ls >> x)) continue;
    if (!(ls >> z)) throw FormatError("line " + std::to_string(lineno), "expected two numbers");
    pts.emplace_back(x, z);
  }
  return pts;
}

World::World() : current_(std::make_shared<const WorldState>()) {}

World::World(WorldState initial) {
  validate(initial);
  current_ = std::make_shared<const WorldState>(std::move(initial));
}

std::shared_ptr<const WorldState> World::snapshot() const {
  std::lock_guard lock(mutex_);
  return current_;
}

std::uint64_t World::revision() const { return snapshot()->revision; }

std::uint64_t World::publish(WorldState next) {
  next.revision = current_->revision + 1;
  const auto rev = next.revision;
  current_ = std::make_shared<const WorldState>(std::move(next));
  return rev;
}

std::uint64_t World::add_obstacle(Obstacle obstacle) {
  validate(obstacle.shape);
  std::lock_guard lock(mutex_);
  WorldState next = *current_;
  if (next.find_obstacle(obstacle.id)) throw std::invalid_argument("duplicate obstacle id " + obstacle.id);
  next.obstacles.push_back(std::move(obstacle));
  return publish(std::move(next));
}

std::uint64_t World::move_obstacle(const std::string& id, Shape shape) {
  validate(shape);
  std::lock_guard lock(mutex_);
  WorldState next = *current_;
  for (auto& o : next.obstacles) {
    if (o.id == id) {
      o.shape = std::move(shape);
      return publish(std::move(next));
    }
  }
  throw NotFound("unknown obstacle '" + id + "'");
}

std::uint64_t World::remove_obstacle(const std::string& id) {
  std::lock_guard lock(mutex_);
  WorldState next = *current_;
  auto it = std::find_if(next.obstacles.begin(), next.obstacles.end(), [&](const auto& o) { return o.id == id; });
  if (it == next.obstacles.end()) throw NotFound("unknown obstacle '" + id + "'");
  next.obstacles.erase(it);
  return publish(std::move(next));
}

std::uint64_t World::add_surface(ContactSurface surface) {
  validate(surface);
  std::lock_guard lock(mutex_);
  WorldState next = *current_;
  next.surfaces.push_back(std::move(surface));
  return publish(std::move(next));
}

nlohmann::json to_json(const ContactSurface& s) {
  using json_util::to_json;
  return {{"id", s.id}, {"p0", to_json(s.p0)}, {"p1", to_json(s.p1)}, {"normal", to_json(s.normal)}, {"mu", s.mu}};
}

nlohmann::json shape_to_json(const Shape& s) {
  using json_util::to_json;
  if (const auto* d = std::get_if<Disc>(&s)) return {{"disc", {{"center", to_json(d->center)}, {"radius", d->radius}}}};
  const auto& b = std::get<Box>(s);
  return {{"box", {{"min", to_json(b.min)}, {"max", to_json(b.max)}}}};
}

nlohmann::json to_json(const Obstacle& o) {
  nlohmann::json j = shape_to_json(o.shape);
  j["id"] = o.id;
  j["created_at"] = o.created_at;
  return j;
}

ContactSurface surface_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  ContactSurface s;
  s.id = ju::string(j, "id", path);
  s.p0 = ju::vec2(j, "p0", path);
  s.p1 = ju::vec2(j, "p1", path);
  if (j.contains("normal")) {
    s.normal = ju::vec2(j.at("normal"), ju::join(path, "normal"));
  } else {
    const Vec2 d = (s.p1 - s.p0).normalized();
    s.normal = {-d.y(), d.x()};
  }
  s.mu = ju::number_or(j, "mu", 0.5, path);
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, e.what());
  }
  return s;
}

Shape shape_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  Shape shape;
  if (j.contains("disc")) {
    const std::string p = ju::join(path, "disc");
    const auto& d = j.at("disc");
    shape = Disc{ju::vec2(d, "center", p), ju::number(d, "radius", p)};
  } else if (j.contains("box")) {
    const std::string p = ju::join(path, "box");
    const auto& b = j.at("box");
    shape = Box{ju::vec2(b, "min", p), ju::vec2(b, "max", p)};
  } else {
    throw FormatError(path, "obstacle needs a \"disc\" or \"box\" shape");
  }
  try {
    validate(shape);
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, e.what());
  }
  return shape;
}

Obstacle obstacle_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  Obstacle o;
  o.id = ju::string(j, "id", path);
  o.shape = shape_from_json(j, path);
  o.created_at = ju::number_or(j, "created_at", 0.0, path);
  return o;
}

nlohmann::json world_to_json(const WorldState& w) {
  nlohmann::json j;
  j["revision"] = w.revision;
  j["surfaces"] = nlohmann::json::array();
  for (const auto& s : w.surfaces) j["surfaces"].push_back(to_json(s));
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : w.obstacles) j["obstacles"].push_back(to_json(o));
  return j;
}

}  // namespace locoplan
