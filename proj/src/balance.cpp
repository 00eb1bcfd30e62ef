#include "locoplan/balance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "locoplan/errors.hpp"
#include "locoplan/json_util.hpp"

namespace locoplan {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Friction cone edge rays; a frictionless contact has the single ray `normal`.
struct Ray {
  int contact;
  Vec2 dir;
  double sign;  // +1 / -1 for the tangential side, 0 when frictionless
};

std::vector<Ray> cone_rays(std::span<const Contact> contacts) {
  std::vector<Ray> rays;
  for (int i = 0; i < static_cast<int>(contacts.size()); ++i) {
    const Contact& c = contacts[i];
    const Vec2 t = contact_tangent(c.normal);
    if (c.mu > 0.0) {
      rays.push_back({i, c.normal + c.mu * t, 1.0});
      rays.push_back({i, c.normal - c.mu * t, -1.0});
    } else {
      rays.push_back({i, c.normal, 0.0});
    }
  }
  return rays;
}

// Lawson-Hanson active-set NNLS: argmin ||A x - b|| subject to x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(a.cols());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) * std::max(1.0, b.norm());

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (passive[i]) idx.push_back(i);
    Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    Eigen::VectorXd zp = ap.completeOrthogonalDecomposition().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
  };

  for (int outer = 0; outer < 3 * n + 3; ++outer) {
    Eigen::VectorXd w = a.transpose() * (b - a * x);
    int best = -1;
    double best_w = tol;
    for (int i = 0; i < n; ++i) {
      if (!passive[i] && w[i] > best_w) {
        best_w = w[i];
        best = i;
      }
    }
    if (best < 0) break;
    passive[best] = true;

    for (int inner = 0; inner < 3 * n + 3; ++inner) {
      Eigen::VectorXd z;
      solve_passive(z);
      bool all_positive = true;
      for (int i = 0; i < n; ++i)
        if (passive[i] && z[i] <= 0.0) all_positive = false;
      if (all_positive) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (int i = 0; i < n; ++i)
        if (passive[i] && z[i] <= 0.0) alpha = std::min(alpha, x[i] / (x[i] - z[i]));
      x += alpha * (z - x);
      for (int i = 0; i < n; ++i) {
        if (passive[i] && x[i] <= 1e-15) {
          passive[i] = false;
          x[i] = 0.0;
        }
      }
    }
  }
  return x;
}

struct EquilibriumSystem {
  std::vector<Ray> rays;
  Eigen::MatrixXd e;  // 3 x rays: force x, force z, torque about com
  Eigen::MatrixXd g;  // 2k x rays: per-contact force components
  Eigen::Vector3d w;
};

EquilibriumSystem build_system(std::span<const Contact> contacts, const Vec2& com, double mass,
                               const Vec2& gravity) {
  EquilibriumSystem s;
  s.rays = cone_rays(contacts);
  const auto r = static_cast<Eigen::Index>(s.rays.size());
  s.e.resize(3, r);
  s.g = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(contacts.size()), r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Ray& ray = s.rays[i];
    const Vec2 arm = contacts[ray.contact].position - com;
    s.e.col(i) << ray.dir.x(), ray.dir.y(), cross(arm, ray.dir);
    s.g.block(2 * ray.contact, i, 2, 1) = ray.dir;
  }
  s.w << -mass * gravity.x(), -mass * gravity.y(), 0.0;
  return s;
}

WrenchSet to_wrenches(std::span<const Contact> contacts, const EquilibriumSystem& s, const Eigen::VectorXd& alpha) {
  WrenchSet out;
  for (int i = 0; i < static_cast<int>(contacts.size()); ++i) {
    const Vec2 f = s.g.middleRows(2 * i, 2) * alpha;
    out.forces.push_back({contacts[i].end_effector, f.dot(contact_tangent(contacts[i].normal)),
                          f.dot(contacts[i].normal)});
  }
  return out;
}

// Minimum-norm force on a fixed ray support: least-squares satisfaction of the
// equilibrium rows, then the smallest ||G alpha|| inside that solution set.
Eigen::VectorXd polish(const EquilibriumSystem& s, const std::vector<int>& support) {
  const auto m = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd ep(3, m), gp(s.g.rows(), m);
  for (Eigen::Index k = 0; k < m; ++k) {
    ep.col(k) = s.e.col(support[k]);
    gp.col(k) = s.g.col(support[k]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ep, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd a_ls = svd.solve(s.w);
  const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-12 * std::max(1.0, smax)) ++rank;
  Eigen::VectorXd a = a_ls;
  if (rank < m) {
    const Eigen::MatrixXd null = svd.matrixV().rightCols(m - rank);
    const Eigen::MatrixXd gn = gp * null;
    const Eigen::VectorXd y = gn.completeOrthogonalDecomposition().solve(-gp * a_ls);
    a += null * y;
  }
  Eigen::VectorXd full = Eigen::VectorXd::Zero(s.e.cols());
  for (Eigen::Index k = 0; k < m; ++k) full[support[k]] = a[k];
  return full;
}

// Primal active-set QP: min ||G alpha||^2 subject to E alpha = E alpha0 and
// alpha >= 0, started from the feasible point alpha0. Steps stay in the null
// space of the free columns of E, so the equilibrium residual never grows.
Eigen::VectorXd min_norm_forces(const EquilibriumSystem& s, Eigen::VectorXd alpha, double scale) {
  const Eigen::Index n = alpha.size();
  const Eigen::MatrixXd m = s.g.transpose() * s.g;
  const double zero = 1e-13 * scale;
  std::vector<bool> free(n);
  for (Eigen::Index i = 0; i < n; ++i) free[i] = alpha[i] > zero;

  for (int iter = 0; iter < 10 * static_cast<int>(n) + 10; ++iter) {
    std::vector<Eigen::Index> f;
    for (Eigen::Index i = 0; i < n; ++i)
      if (free[i]) f.push_back(i);
    const auto nf = static_cast<Eigen::Index>(f.size());
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    if (nf > 0) {
      Eigen::MatrixXd ef(3, nf), mff(nf, nf);
      Eigen::VectorXd af(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        ef.col(a) = s.e.col(f[a]);
        af[a] = alpha[f[a]];
        for (Eigen::Index b = 0; b < nf; ++b) mff(a, b) = m(f[a], f[b]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(ef);
      lu.setThreshold(1e-12);
      const Eigen::MatrixXd null = lu.kernel();
      if (lu.rank() < nf && null.cols() > 0) {
        const Eigen::MatrixXd reduced = null.transpose() * mff * null;
        const Eigen::VectorXd z = reduced.ldlt().solve(-null.transpose() * mff * af);
        const Eigen::VectorXd pf = null * z;
        for (Eigen::Index a = 0; a < nf; ++a) p[f[a]] = pf[a];
      }
    }
    if (p.norm() > 1e-14 * std::max(1.0, alpha.norm())) {
      double step = 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (free[i] && p[i] < 0.0 && -alpha[i] / p[i] < step) {
          step = -alpha[i] / p[i];
          blocking = i;
        }
      }
      alpha += step * p;
      if (blocking >= 0) {
        alpha[blocking] = 0.0;
        free[blocking] = false;
      }
      continue;
    }
    // stationary on the working set: release the bound with the most negative multiplier
    const Eigen::VectorXd grad = m * alpha;
    Eigen::MatrixXd ef(3, nf);
    Eigen::VectorXd gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      ef.col(a) = s.e.col(f[a]);
      gf[a] = grad[f[a]];
    }
    const Eigen::Vector3d nu = nf > 0 ? Eigen::Vector3d(ef.transpose().completeOrthogonalDecomposition().solve(gf))
                                      : Eigen::Vector3d::Zero();
    Eigen::Index release = -1;
    double most = -1e-12 * std::max(1.0, grad.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (free[i]) continue;
      const double mult = grad[i] - s.e.col(i).dot(nu);
      if (mult < most) {
        most = mult;
        release = i;
      }
    }
    if (release < 0) break;
    free[release] = true;
  }
  return alpha;
}

}  // namespace

bool same_contact(const Contact& a, const Contact& b) {
  return a.end_effector == b.end_effector && (a.position - b.position).norm() <= 1e-9;
}

Stance::Stance(std::vector<Contact> contacts, bool rolling) : contacts_(std::move(contacts)), rolling_(rolling) {
  std::sort(contacts_.begin(), contacts_.end(),
            [](const Contact& a, const Contact& b) { return a.end_effector < b.end_effector; });
  for (std::size_t i = 1; i < contacts_.size(); ++i)
    if (contacts_[i].end_effector == contacts_[i - 1].end_effector)
      throw std::invalid_argument("stance has two contacts on " + contacts_[i].end_effector);
  for (const auto& c : contacts_) {
    if (std::abs(c.normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("contact normal must be unit");
    if (!(c.mu >= 0.0)) throw std::invalid_argument("friction coefficient must be >= 0");
  }
}

const Contact* Stance::find(std::string_view end_effector) const {
  for (const auto& c : contacts_)
    if (c.end_effector == end_effector) return &c;
  return nullptr;
}

bool Stance::contains(const Contact& c) const {
  const Contact* mine = find(c.end_effector);
  return mine && same_contact(*mine, c);
}

Stance Stance::with(const Contact& c) const {
  if (find(c.end_effector)) throw std::invalid_argument("end-effector " + c.end_effector + " already in contact");
  std::vector<Contact> next = contacts_;
  next.push_back(c);
  return Stance(std::move(next), rolling_);
}

Stance Stance::without(std::string_view end_effector) const {
  std::vector<Contact> next;
  for (const auto& c : contacts_)
    if (c.end_effector != end_effector) next.push_back(c);
  return Stance(std::move(next), rolling_);
}

std::string Stance::key() const {
  std::string k = rolling_ ? "R|" : "";
  char buf[96];
  for (const auto& c : contacts_) {
    std::snprintf(buf, sizeof(buf), "@%.9f,%.9f;", c.position.x(), c.position.y());
    k += c.end_effector + buf;
  }
  return k;
}

bool operator==(const Stance& a, const Stance& b) {
  if (a.size() != b.size() || a.rolling_ != b.rolling_) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_contact(a.contacts_[i], b.contacts_[i])) return false;
  return true;
}

Stance stance_union(const Stance& a, const Stance& b) {
  std::vector<Contact> out = a.contacts();
  for (const auto& c : b.contacts()) {
    if (a.contains(c)) continue;
    if (a.find(c.end_effector))
      throw std::invalid_argument("stances place " + c.end_effector + " at two different poses");
    out.push_back(c);
  }
  return Stance(std::move(out), a.rolling() || b.rolling());
}

Stance stance_intersection(const Stance& a, const Stance& b) {
  std::vector<Contact> out;
  for (const auto& c : a.contacts())
    if (b.contains(c)) out.push_back(c);
  return Stance(std::move(out), a.rolling() && b.rolling());
}

int symmetric_difference(const Stance& a, const Stance& b) {
  int n = 0;
  for (const auto& c : a.contacts())
    if (!b.contains(c)) ++n;
  for (const auto& c : b.contacts())
    if (!a.contains(c)) ++n;
  return n;
}

const ContactForce* WrenchSet::find(std::string_view end_effector) const {
  for (const auto& f : forces)
    if (f.end_effector == end_effector) return &f;
  return nullptr;
}

std::optional<WrenchSet> solve_static_equilibrium(std::span<const Contact> contacts, const Vec2& com, double mass,
                                                  const Vec2& gravity) {
  if (contacts.empty()) return std::nullopt;
  const EquilibriumSystem s = build_system(contacts, com, mass, gravity);
  const double scale = std::max(mass * gravity.norm(), 1e-300);
  const double feasible_tol = 1e-9 * scale;

  const Eigen::VectorXd alpha0 = nnls(s.e, s.w);
  if ((s.e * alpha0 - s.w).norm() > feasible_tol) return std::nullopt;

  const Eigen::VectorXd alpha = min_norm_forces(s, alpha0.cwiseMax(0.0), scale);
  Eigen::VectorXd best = alpha0;
  double best_res = (s.e * alpha0 - s.w).norm();
  double best_norm = (s.g * alpha0).norm();
  auto consider = [&](const Eigen::VectorXd& cand) {
    if (cand.minCoeff() < -1e-12 * scale) return;
    const Eigen::VectorXd c = cand.cwiseMax(0.0);
    const double res = (s.e * c - s.w).norm();
    if (res > std::max(feasible_tol, best_res)) return;
    const double nrm = (s.g * c).norm();
    if (nrm < best_norm - 1e-12 * scale || (nrm <= best_norm + 1e-12 * scale && res < best_res)) {
      best = c;
      best_res = res;
      best_norm = nrm;
    }
  };
  consider(alpha);
  std::vector<int> support;
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    if (alpha[i] > 1e-12 * scale) support.push_back(static_cast<int>(i));
  if (!support.empty()) consider(polish(s, support));
  return to_wrenches(contacts, s, best);
}

Eigen::Vector3d equilibrium_residual(std::span<const Contact> contacts, const Vec2& com, double mass,
                                     const Vec2& gravity, const WrenchSet& wrenches) {
  Eigen::Vector3d r(mass * gravity.x(), mass * gravity.y(), 0.0);
  for (const auto& c : contacts) {
    const ContactForce* f = wrenches.find(c.end_effector);
    if (!f) continue;
    const Vec2 force = f->tangential * contact_tangent(c.normal) + f->normal * c.normal;
    r.x() += force.x();
    r.y() += force.y();
    r.z() += cross(c.position - com, force);
  }
  return r;
}

std::optional<Interval> support_interval(std::span<const Contact> contacts, double mass, const Vec2& gravity) {
  if (std::abs(gravity.x()) > 1e-12 * gravity.norm())
    throw std::invalid_argument("support_interval requires vertical gravity");
  const auto rays = cone_rays(contacts);
  const Vec2 load = -mass * gravity;
  const double g0 = mass * -gravity.y();
  std::optional<Interval> out;
  auto add = [&](double cx) {
    if (!out) {
      out = Interval{cx, cx};
    } else {
      out->lo = std::min(out->lo, cx);
      out->hi = std::max(out->hi, cx);
    }
  };
  const double tol = 1e-12;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    // a single ray carrying the whole load
    const Vec2& r = rays[i].dir;
    if (std::abs(cross(r, load)) <= tol * r.norm() * load.norm() && r.dot(load) > 0.0) {
      const double a = r.dot(load) / r.squaredNorm();
      add(cross(contacts[rays[i].contact].position, a * r) / g0);
    }
    for (std::size_t j = i + 1; j < rays.size(); ++j) {
      Mat2 m;
      m.col(0) = rays[i].dir;
      m.col(1) = rays[j].dir;
      const double det = m.determinant();
      if (std::abs(det) <= tol) continue;
      const Vec2 a = m.inverse() * load;
      if (a.minCoeff() < -tol) continue;
      const double torque = cross(contacts[rays[i].contact].position, a.x() * rays[i].dir) +
                            cross(contacts[rays[j].contact].position, a.y() * rays[j].dir);
      add(torque / g0);
    }
  }
  return out;
}

std::vector<Contact> effective_contacts(const RobotModel& model, const Configuration& q, const Stance& stance) {
  if (!stance.rolling()) return stance.contacts();
  const auto poses = link_poses(model, q);
  std::vector<Contact> out;
  for (const auto& c : stance.contacts()) {
    const auto& f = model.frames()[model.frame_index(c.end_effector)];
    Contact g = c;
    g.position = {poses[f.link].transform(f.offset).x(), 0.0};
    g.normal = Vec2::UnitY();
    out.push_back(g);
  }
  return out;
}

double contact_residual(const RobotModel& model, const Configuration& q, const Stance& stance) {
  if (stance.rolling() || stance.empty()) return 0.0;
  const auto poses = link_poses(model, q);
  double worst = 0.0;
  for (const auto& c : stance.contacts()) {
    const auto& f = model.frames()[model.frame_index(c.end_effector)];
    worst = std::max(worst, (poses[f.link].transform(f.offset) - c.position).norm());
  }
  return worst;
}

std::optional<WrenchSet> solve_contact_wrenches(const RobotModel& model, const Configuration& q,
                                                const Stance& stance, const Vec2& gravity, double tol_contact) {
  model.check(q);
  if (stance.empty()) throw std::invalid_argument("balance requires at least one contact");
  const double mismatch = contact_residual(model, q, stance);
  if (mismatch > tol_contact)
    throw std::invalid_argument("end-effector is " + std::to_string(mismatch) + " m away from its contact");
  const auto contacts = effective_contacts(model, q, stance);
  return solve_static_equilibrium(contacts, center_of_mass(model, q), model.total_mass(), gravity);
}

bool is_balanced(const RobotModel& model, const Configuration& q, const Stance& stance, const Vec2& gravity,
                 double tol_contact) {
  return solve_contact_wrenches(model, q, stance, gravity, tol_contact).has_value();
}

std::optional<Interval> stance_support(const RobotModel& model, const Configuration& q, const Stance& stance,
                                       const Vec2& gravity) {
  const auto contacts = effective_contacts(model, q, stance);
  return support_interval(contacts, model.total_mass(), gravity);
}

nlohmann::json to_json(const Contact& c) {
  using json_util::to_json;
  nlohmann::json j{{"ee", c.end_effector},
                   {"position", to_json(c.position)},
                   {"normal", to_json(c.normal)},
                   {"mu", c.mu}};
  if (!c.surface.empty()) j["surface"] = c.surface;
  return j;
}

nlohmann::json to_json(const Stance& s) {
  nlohmann::json j{{"contacts", nlohmann::json::array()}};
  for (const auto& c : s.contacts()) j["contacts"].push_back(to_json(c));
  if (s.rolling()) j["rolling"] = true;
  return j;
}

nlohmann::json to_json(const WrenchSet& w) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : w.forces) j.push_back({{"ee", f.end_effector}, {"f_t", f.tangential}, {"f_n", f.normal}});
  return j;
}

Contact contact_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  Contact c;
  c.end_effector = ju::string(j, "ee", path);
  if (j.contains("surface")) c.surface = ju::string(j.at("surface"), ju::join(path, "surface"));
  c.position = ju::vec2(j, "position", path);
  if (j.contains("normal")) c.normal = ju::vec2(j.at("normal"), ju::join(path, "normal"));
  c.mu = ju::number_or(j, "mu", 0.5, path);
  return c;
}

Stance stance_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  const auto& arr = ju::array(ju::require(j, "contacts", path), ju::join(path, "contacts"));
  std::vector<Contact> cs;
  for (std::size_t i = 0; i < arr.size(); ++i) cs.push_back(contact_from_json(arr[i], ju::join(path + "/contacts", i)));
  const bool rolling = j.contains("rolling") && j.at("rolling").get<bool>();
  try {
    return Stance(std::move(cs), rolling);
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, e.what());
  }
}

WrenchSet wrenches_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  WrenchSet w;
  ju::array(j, path);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = ju::join(path, i);
    w.forces.push_back({ju::string(j[i], "ee", p), ju::number(j[i], "f_t", p), ju::number(j[i], "f_n", p)});
  }
  return w;
}

Stance stance_from_task_json(const nlohmann::json& j, const WorldState& world, const std::string& path,
                             bool rolling) {
  namespace ju = json_util;
  ju::array(j, path);
  std::vector<Contact> cs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = ju::join(path, i);
    const auto& o = j[i];
    Contact c;
    c.end_effector = ju::string(o, "ee", p);
    if (o.contains("surface")) {
      c.surface = ju::string(o.at("surface"), ju::join(p, "surface"));
      const ContactSurface* s = nullptr;
      try {
        s = &world.surface(c.surface);
      } catch (const NotFound& e) {
        throw FormatError(ju::join(p, "surface"), e.what());
      }
      c.normal = s->normal;
      c.mu = s->mu;
      if (o.contains("t")) {
        c.position = s->point_at(ju::number(o.at("t"), ju::join(p, "t")));
      } else {
        c.position = ju::vec2(o, "position", p);
      }
    } else {
      c.position = o.contains("position") ? ju::vec2(o.at("position"), ju::join(p, "position")) : Vec2::Zero();
      if (o.contains("normal")) c.normal = ju::vec2(o.at("normal"), ju::join(p, "normal"));
      c.mu = ju::number_or(o, "mu", 0.5, p);
    }
    cs.push_back(c);
  }
  try {
    return Stance(std::move(cs), rolling);
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, e.what());
  }
}

}  // namespace locoplan
