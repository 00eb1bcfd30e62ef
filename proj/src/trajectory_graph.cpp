#include "locoplan/trajectory_graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "locoplan/json_util.hpp"

namespace locoplan {

namespace {

double hinge_sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct BalanceTerm {
  double value = 0.0;
  Eigen::RowVectorXd grad;
};

// Distance of the CoM x outside the support interval, with its gradient.
BalanceTerm balance_term(const TrajectoryGraph& g, const Configuration& q, bool with_grad) {
  const RobotModel& model = *g.model;
  BalanceTerm out;
  if (with_grad) out.grad = Eigen::RowVectorXd::Zero(model.dof());
  if (g.stance.empty()) return out;
  const double cx = center_of_mass(model, q).x();

  double lo, hi;
  Eigen::RowVectorXd jlo, jhi;
  if (g.stance.rolling()) {
    const auto poses = link_poses(model, q);
    int ilo = -1, ihi = -1;
    std::vector<Vec2> pts;
    std::vector<const RobotModel::Frame*> frames;
    for (const auto& c : g.stance.contacts()) {
      const auto& f = model.frames()[model.frame_index(c.end_effector)];
      frames.push_back(&f);
      pts.push_back(poses[f.link].transform(f.offset));
    }
    for (int k = 0; k < static_cast<int>(pts.size()); ++k) {
      if (ilo < 0 || pts[k].x() < pts[ilo].x()) ilo = k;
      if (ihi < 0 || pts[k].x() > pts[ihi].x()) ihi = k;
    }
    lo = pts[ilo].x();
    hi = pts[ihi].x();
    if (with_grad) {
      jlo = point_jacobian(model, poses, frames[ilo]->link, frames[ilo]->offset).row(0);
      jhi = point_jacobian(model, poses, frames[ihi]->link, frames[ihi]->offset).row(0);
    }
  } else {
    if (!g.support) return out;
    lo = g.support->lo;
    hi = g.support->hi;
    if (with_grad) jlo = jhi = Eigen::RowVectorXd::Zero(model.dof());
  }
  Eigen::RowVectorXd jc;
  if (with_grad) jc = com_jacobian(model, q).row(0);
  if (cx < lo) {
    out.value = lo - cx;
    if (with_grad) out.grad = jlo - jc;
  } else if (cx > hi) {
    out.value = cx - hi;
    if (with_grad) out.grad = jc - jhi;
  }
  return out;
}

Eigen::VectorXd residual_impl(const HyperEdge& edge, const TrajectoryGraph& g, std::vector<Eigen::MatrixXd>* jac) {
  const RobotModel& model = *g.model;
  const int n = model.dof();
  const Configuration& q = g.vertices[edge.vertices[0]].q;
  Eigen::VectorXd e;
  switch (edge.kind) {
    case EdgeKind::JointLimit: {
      const int nj = model.num_joints();
      e = Eigen::VectorXd::Zero(nj);
      if (jac) jac->assign(1, Eigen::MatrixXd::Zero(nj, n));
      for (int j = 0; j < nj; ++j) {
        const auto& js = model.joints()[j];
        const int d = model.joint_dof(j);
        const double hi = js.upper - g.config.joint_margin;
        const double lo = js.lower + g.config.joint_margin;
        if (q[d] > hi) {
          e[j] = q[d] - hi;
          if (jac) (*jac)[0](j, d) = 1.0;
        } else if (q[d] < lo) {
          e[j] = lo - q[d];
          if (jac) (*jac)[0](j, d) = -1.0;
        }
      }
      break;
    }
    case EdgeKind::Velocity: {
      const Configuration& q1 = g.vertices[edge.vertices[1]].q;
      const Eigen::VectorXd vmax = g.config.velocity_scale * model.velocity_limits();
      e = Eigen::VectorXd::Zero(n);
      if (jac) jac->assign(2, Eigen::MatrixXd::Zero(n, n));
      for (int k = 0; k < n; ++k) {
        const double d = q1[k] - q[k];
        const double v = std::abs(d) / g.dt - vmax[k];
        if (v > 0.0) {
          e[k] = v;
          if (jac) {
            (*jac)[0](k, k) = -hinge_sign(d) / g.dt;
            (*jac)[1](k, k) = hinge_sign(d) / g.dt;
          }
        }
      }
      break;
    }
    case EdgeKind::Collision: {
      // One member: clearance at the vertex. Two members: clearance at
      // interior samples of the linear segment between them.
      const auto& spheres = model.collision_spheres();
      const int ns = static_cast<int>(spheres.size());
      const bool swept = edge.vertices.size() == 2;
      const int samples = swept ? g.config.sweep_samples : 1;
      e = Eigen::VectorXd::Zero(ns * samples);
      if (jac) jac->assign(edge.vertices.size(), Eigen::MatrixXd::Zero(ns * samples, n));
      if (g.world->obstacles.empty()) break;
      for (int k = 0; k < samples; ++k) {
        const double a = swept ? (k + 1.0) / (samples + 1.0) : 0.0;
        const Configuration qs = swept ? Configuration((1.0 - a) * q + a * g.vertices[edge.vertices[1]].q) : q;
        const auto poses = link_poses(model, qs);
        for (int s = 0; s < ns; ++s) {
          const int link = model.sphere_links()[s];
          const Vec2 c = poses[link].transform(spheres[s].offset);
          const DistanceQuery dq = signed_distance(*g.world, c);
          const double v = g.config.clearance + spheres[s].radius - dq.distance;
          if (v <= 0.0) continue;
          const int row = k * ns + s;
          e[row] = v;
          if (!jac) continue;
          const Eigen::RowVectorXd grad = -dq.gradient.transpose() * point_jacobian(model, poses, link, spheres[s].offset);
          if (swept) {
            (*jac)[0].row(row) = (1.0 - a) * grad;
            (*jac)[1].row(row) = a * grad;
          } else {
            (*jac)[0].row(row) = grad;
          }
        }
      }
      break;
    }
    case EdgeKind::Balance: {
      const BalanceTerm t = balance_term(g, q, jac != nullptr);
      e = Eigen::VectorXd::Constant(1, t.value);
      if (jac) jac->assign(1, t.grad);
      break;
    }
    case EdgeKind::Tracking: {
      e = q - g.reference[edge.vertices[0]];
      if (jac) jac->assign(1, Eigen::MatrixXd::Identity(n, n));
      break;
    }
  }
  return e;
}

}  // namespace

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::JointLimit: return "joint_limit";
    case EdgeKind::Velocity: return "velocity";
    case EdgeKind::Collision: return "collision";
    case EdgeKind::Balance: return "balance";
    case EdgeKind::Tracking: return "tracking";
  }
  return "unknown";
}

double EdgeWeights::of(EdgeKind k) const {
  switch (k) {
    case EdgeKind::JointLimit: return joint_limit;
    case EdgeKind::Velocity: return velocity;
    case EdgeKind::Collision: return collision;
    case EdgeKind::Balance: return balance;
    case EdgeKind::Tracking: return tracking;
  }
  return 0.0;
}

int TrajectoryGraph::num_free() const {
  return static_cast<int>(std::count_if(vertices.begin(), vertices.end(), [](const auto& v) { return !v.fixed; }));
}

std::vector<int> TrajectoryGraph::free_offsets() const {
  std::vector<int> out(vertices.size(), -1);
  int next = 0;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (vertices[v].fixed) continue;
    out[v] = next;
    next += dof();
  }
  return out;
}

Discretization discretize_trajectory(const Motion& motion, int n) {
  if (n < 2) throw std::invalid_argument("discretization needs at least two samples");
  if (motion.knots.empty() || motion.timestamps.size() != motion.knots.size())
    throw std::invalid_argument("motion has no knots or misaligned timestamps");
  Discretization out;
  out.dt = motion.duration / (n - 1);
  const auto& ts = motion.timestamps;
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      out.configs.push_back(motion.knots.front());
      continue;
    }
    if (k == n - 1) {
      out.configs.push_back(motion.knots.back());
      continue;
    }
    const double t = k * out.dt;
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - ts.begin()), ts.size() - 1);
    const std::size_t lo = hi == 0 ? 0 : hi - 1;
    const double span = ts[hi] - ts[lo];
    const double a = span > 0.0 ? std::clamp((t - ts[lo]) / span, 0.0, 1.0) : 1.0;
    out.configs.push_back(motion.knots[lo] + a * (motion.knots[hi] - motion.knots[lo]));
  }
  return out;
}

TrajectoryGraph build_graph(std::vector<Configuration> configs, const RobotModel& model,
                            std::shared_ptr<const WorldState> world, std::vector<Configuration> reference, double dt,
                            const GraphConfig& config, Stance stance, std::vector<bool> fixed) {
  if (configs.size() < 2) throw std::invalid_argument("a trajectory graph needs at least two vertices");
  if (!(dt > 0.0)) throw std::invalid_argument("vertex spacing dt must be > 0");
  if (reference.size() != configs.size()) throw std::invalid_argument("one reference configuration per vertex expected");
  if (!fixed.empty() && fixed.size() != configs.size()) throw std::invalid_argument("fixed flags misaligned");
  if (!world) world = std::make_shared<const WorldState>();

  TrajectoryGraph g;
  g.model = &model;
  g.world = std::move(world);
  g.reference = std::move(reference);
  g.dt = dt;
  g.config = config;
  g.stance = std::move(stance);
  if (!g.stance.empty() && !g.stance.rolling()) g.support = support_interval(g.stance.contacts(), model.total_mass(), kGravity);

  const int nv = static_cast<int>(configs.size());
  for (int t = 0; t < nv; ++t) {
    model.check(configs[t]);
    g.vertices.push_back({t, std::move(configs[t]), !fixed.empty() && fixed[t]});
  }
  auto add = [&](EdgeKind kind, std::vector<int> members, int rows) {
    HyperEdge e;
    e.kind = kind;
    e.vertices = std::move(members);
    e.omega = Eigen::VectorXd::Constant(rows, config.weights.of(kind));
    g.edges.push_back(std::move(e));
  };
  const int n = model.dof();
  for (int t = 0; t < nv; ++t) {
    add(EdgeKind::JointLimit, {t}, model.num_joints());
    add(EdgeKind::Collision, {t}, static_cast<int>(model.collision_spheres().size()));
    add(EdgeKind::Balance, {t}, 1);
    add(EdgeKind::Tracking, {t}, n);
  }
  for (int t = 0; t + 1 < nv; ++t) {
    add(EdgeKind::Velocity, {t, t + 1}, n);
    if (config.sweep_samples > 0)
      add(EdgeKind::Collision, {t, t + 1}, config.sweep_samples * static_cast<int>(model.collision_spheres().size()));
  }
  return g;
}

Eigen::VectorXd edge_residual(const HyperEdge& edge, const TrajectoryGraph& graph) {
  return residual_impl(edge, graph, nullptr);
}

std::vector<Eigen::MatrixXd> edge_jacobian(const HyperEdge& edge, const TrajectoryGraph& graph) {
  std::vector<Eigen::MatrixXd> jac;
  residual_impl(edge, graph, &jac);
  return jac;
}

void evaluate(TrajectoryGraph& graph) {
  for (auto& e : graph.edges) e.residual = residual_impl(e, graph, &e.jacobians);
}

double total_cost(const TrajectoryGraph& graph) {
  double f = 0.0;
  for (const auto& e : graph.edges) {
    const Eigen::VectorXd r = residual_impl(e, graph, nullptr);
    f += r.dot(e.omega.cwiseProduct(r));
  }
  return f;
}

LinearSystem assemble_system(const TrajectoryGraph& graph) {
  const int n = graph.dof();
  const auto offsets = graph.free_offsets();
  const int dim = n * graph.num_free();
  LinearSystem sys;
  sys.b = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& e : graph.edges) {
    const Eigen::VectorXd we = e.omega.cwiseProduct(e.residual);
    sys.F += e.residual.dot(we);
    for (std::size_t a = 0; a < e.vertices.size(); ++a) {
      const int oa = offsets[e.vertices[a]];
      if (oa < 0) continue;
      const Eigen::MatrixXd& ja = e.jacobians[a];
      sys.b.segment(oa, n) += ja.transpose() * we;
      const Eigen::MatrixXd jw = ja.transpose() * e.omega.asDiagonal();
      for (std::size_t c = 0; c < e.vertices.size(); ++c) {
        const int oc = offsets[e.vertices[c]];
        if (oc < 0) continue;
        const Eigen::MatrixXd block = jw * e.jacobians[c];
        for (int r = 0; r < n; ++r)
          for (int k = 0; k < n; ++k) triplets.emplace_back(oa + r, oc + k, block(r, k));
      }
    }
  }
  sys.H.resize(dim, dim);
  sys.H.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

Eigen::VectorXd free_vector(const TrajectoryGraph& graph) {
  const int n = graph.dof();
  Eigen::VectorXd x(n * graph.num_free());
  int o = 0;
  for (const auto& v : graph.vertices) {
    if (v.fixed) continue;
    x.segment(o, n) = v.q;
    o += n;
  }
  return x;
}

void set_free_vector(TrajectoryGraph& graph, const Eigen::VectorXd& x) {
  const int n = graph.dof();
  if (x.size() != n * graph.num_free()) throw std::invalid_argument("free vector has the wrong size");
  int o = 0;
  for (auto& v : graph.vertices) {
    if (v.fixed) continue;
    v.q = x.segment(o, n);
    o += n;
  }
}

double max_violation(const TrajectoryGraph& graph, bool include_tracking) {
  double worst = 0.0;
  for (const auto& e : graph.edges) {
    if (e.kind == EdgeKind::Tracking && !include_tracking) continue;
    const bool touches_free =
        std::any_of(e.vertices.begin(), e.vertices.end(), [&](int v) { return !graph.vertices[v].fixed; });
    if (!touches_free) continue;
    const Eigen::VectorXd r = edge_residual(e, graph);
    if (r.size()) worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

nlohmann::json graph_to_json(const TrajectoryGraph& graph) {
  using nlohmann::json;
  json vertices = json::array();
  for (const auto& v : graph.vertices)
    vertices.push_back({{"index", v.index}, {"fixed", v.fixed}, {"q", json_util::to_json(v.q)}});
  json edges = json::array();
  double f = 0.0;
  for (const auto& e : graph.edges) {
    const Eigen::VectorXd r = edge_residual(e, graph);
    const double cost = r.dot(e.omega.cwiseProduct(r));
    f += cost;
    edges.push_back({{"kind", to_string(e.kind)},
                     {"vertices", e.vertices},
                     {"rows", r.size()},
                     {"weight", e.omega.size() ? e.omega[0] : 0.0},
                     {"residual_norm", r.norm()},
                     {"cost", cost}});
  }
  return {{"dt", graph.dt},
          {"revision", graph.world ? graph.world->revision : 0},
          {"F", f},
          {"vertices", vertices},
          {"edges", edges}};
}

}  // namespace locoplan
