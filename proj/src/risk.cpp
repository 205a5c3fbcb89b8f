#include <algorithm>
#include <numeric>

#include "roadsr/downstream.hpp"

namespace roadsr {

EgoFusion EgoFusion::plain() { return EgoFusion{false, MatrixXd(), MatrixXd()}; }

EgoFusion EgoFusion::zeros(int fused_dim, int frame_dim, int message_dim) {
  if (fused_dim < 1) throw ContractError("fused_dim must be positive");
  return EgoFusion{true, MatrixXd::Zero(fused_dim, frame_dim + message_dim), MatrixXd::Zero(fused_dim, 1)};
}

EgoFusion EgoFusion::random(int fused_dim, std::uint64_t seed, int frame_dim, int message_dim) {
  EgoFusion f = zeros(fused_dim, frame_dim, message_dim);
  auto rng = make_rng(seed, 43);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(frame_dim + message_dim));
  for (Eigen::Index j = 0; j < f.W_ego.cols(); ++j) {
    for (Eigen::Index i = 0; i < f.W_ego.rows(); ++i) f.W_ego(i, j) = scale * u(rng);
  }
  return f;
}

int EgoFusion::output_dim(int frame_dim, int message_dim, int hidden_dim) const {
  return fused ? static_cast<int>(W_ego.rows()) + hidden_dim : frame_dim + message_dim;
}

namespace {

VectorXd mean_of(const RiskScene& scene, const std::vector<int>& masked, bool allow_empty) {
  if (scene.objects.empty()) throw ContractError("risk scene has no objects");
  const Eigen::Index dim = scene.objects.front().size();
  VectorXd m = VectorXd::Zero(dim);
  int n = 0;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    if (std::find(masked.begin(), masked.end(), static_cast<int>(k)) != masked.end()) continue;
    m += scene.objects[k];
    ++n;
  }
  if (n == 0) {
    if (!allow_empty) throw ContractError("every object is masked");
    return m;
  }
  return m / static_cast<double>(n);
}

VectorXd fuse(const RiskScene& scene, const EgoFusion& fusion, const VectorXd& h, const std::vector<int>& masked,
              bool allow_empty) {
  const VectorXd mean = mean_of(scene, masked, allow_empty);
  VectorXd x(scene.g_f.size() + mean.size());
  x << scene.g_f, mean;
  if (!fusion.fused) return x;
  if (fusion.W_ego.cols() != x.size()) throw ContractError("ego fusion: input dimension mismatch");
  const VectorXd u = fusion.W_ego * x + fusion.b_ego.col(0);
  VectorXd out(u.size() + h.size());
  out << u, h;
  return out;
}

}  // namespace

VectorXd masked_mean(const RiskScene& scene, const std::vector<int>& masked) { return mean_of(scene, masked, false); }

VectorXd ego_fuse(const RiskScene& scene, const EgoFusion& fusion, const VectorXd& h, const std::vector<int>& masked) {
  return fuse(scene, fusion, h, masked, false);
}

RiskResult risk_identify(const RiskScene& scene, const VectorXd& h, const EgoFusion& fusion,
                         const BehaviorFn& behavior) {
  if (scene.objects.empty()) throw ContractError("risk_identify: scene has no objects");
  const VectorXd base = behavior(fuse(scene, fusion, h, {}, false));
  RiskResult r;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const VectorXd alt = behavior(fuse(scene, fusion, h, {static_cast<int>(k)}, true));
    r.scores.push_back((base - alt).cwiseAbs().sum());
  }
  r.index = 0;
  for (std::size_t k = 1; k < r.scores.size(); ++k) {
    if (r.scores[k] > r.scores[r.index]) r.index = static_cast<int>(k);
  }
  return r;
}

BehaviorFn BehaviorModel::fn() const {
  return [this](const VectorXd& fused) { return head.probabilities(fused); };
}

BehaviorModel train_behavior(const std::vector<RiskScene>& scenes, const std::vector<VectorXd>& hidden, EgoFusion init,
                             const AdamHyper& hy) {
  if (scenes.empty() || scenes.size() != hidden.size()) throw ContractError("train_behavior: bad dataset");
  std::vector<int> ys;
  for (const auto& s : scenes) ys.push_back(s.gt_risk_index >= 0 ? 1 : 0);
  BehaviorModel model{std::move(init), SoftmaxHead{}};
  if (!model.fusion.fused) {
    std::vector<VectorXd> xs;
    for (std::size_t i = 0; i < scenes.size(); ++i) xs.push_back(ego_fuse(scenes[i], model.fusion, hidden[i]));
    model.head = train_softmax_head(xs, ys, 2, hy);
    return model;
  }
  EgoFusion& f = model.fusion;
  const int fused_dim = static_cast<int>(f.W_ego.rows());
  model.head = SoftmaxHead::zeros(fused_dim + static_cast<int>(hidden.front().size()), 2);
  Adam opt({&f.W_ego, &f.b_ego, &model.head.W, &model.head.b}, {true, false, true, false}, hy);
  MatrixXd gW = MatrixXd::Zero(f.W_ego.rows(), f.W_ego.cols()), gb = MatrixXd::Zero(f.b_ego.rows(), 1);
  MatrixXd gV = MatrixXd::Zero(model.head.W.rows(), 2), gc = MatrixXd::Zero(2, 1);
  auto rng = make_rng(hy.seed, 44);
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < hy.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hy.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hy.batch));
      gW.setZero();
      gb.setZero();
      gV.setZero();
      gc.setZero();
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = scenes[order[k]];
        const VectorXd mean = mean_of(s, {}, false);
        VectorXd x(s.g_f.size() + mean.size());
        x << s.g_f, mean;
        const VectorXd ge = fuse(s, f, hidden[order[k]], {}, false);
        VectorXd dz = model.head.probabilities(ge);
        dz(ys[order[k]]) -= 1.0;
        gV.noalias() += ge * dz.transpose();
        gc.col(0) += dz;
        const VectorXd du = (model.head.W * dz).head(fused_dim);
        gW.noalias() += du * x.transpose();
        gb.col(0) += du;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      gW *= inv;
      gb *= inv;
      gV *= inv;
      gc *= inv;
      opt.step({&gW, &gb, &gV, &gc});
    }
  }
  return model;
}

namespace {

Vec2 to_ego(const Pose& ego, Vec2 v) {
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) { return (q - p).cross(r - p); };
  const double d1 = orient(c, d, a), d2 = orient(c, d, b), d3 = orient(a, b, c), d4 = orient(a, b, d);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace

ConflictInfo analyze_conflict(const std::vector<Pose>& ego, std::size_t frame, double frame_hz,
                              const RiskObjectState& obj, double radius, double horizon_s) {
  if (frame >= ego.size()) throw ContractError("analyze_conflict: frame out of range");
  ConflictInfo info;
  info.closest_m = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::round(horizon_s * frame_hz));
  for (int j = 0; j <= steps; ++j) {
    const double t = j / frame_hz;
    const Vec2 e = ego[std::min(ego.size() - 1, frame + static_cast<std::size_t>(j))].position;
    const double d = (obj.position + obj.velocity * t - e).norm();
    info.closest_m = std::min(info.closest_m, d);
    if (!info.first_conflict_s && d < radius) info.first_conflict_s = t;
  }
  const Vec2 o0 = obj.position, o1 = obj.position + obj.velocity * horizon_s;
  const std::size_t last = std::min(ego.size() - 1, frame + static_cast<std::size_t>(steps));
  for (std::size_t k = frame; k < last && !info.path_crossing; ++k) {
    info.path_crossing = segments_intersect(o0, o1, ego[k].position, ego[k + 1].position);
  }
  return info;
}

int ground_truth_risk_index(const std::vector<ConflictInfo>& infos) {
  int best = -1;
  for (std::size_t k = 0; k < infos.size(); ++k) {
    if (!infos[k].first_conflict_s) continue;
    if (best < 0 || *infos[k].first_conflict_s < *infos[best].first_conflict_s) best = static_cast<int>(k);
  }
  return best;
}

VectorXd object_message(const Pose& ego, const RiskObjectState& obj, const ConflictInfo& info) {
  const Vec2 rel = to_ego(ego, obj.position - ego.position);
  const Vec2 vel = to_ego(ego, obj.velocity);
  VectorXd m(kObjectMessageDim);
  m << rel.x / 20.0, rel.y / 20.0, vel.x / 10.0, vel.y / 10.0, info.path_crossing ? 1.0 : 0.0,
      info.first_conflict_s ? std::exp(-*info.first_conflict_s / 2.0) : 0.0, std::exp(-info.closest_m / 5.0),
      obj.pedestrian ? 1.0 : 0.0;
  return m;
}

VectorXd frame_representation(const FrameFeature& f) {
  static const MatrixXd G = [] {
    MatrixXd g(kFrameReprDim, static_cast<Eigen::Index>(FanGeometry::kFeatureDim));
    auto rng = make_rng(0x5EEDF00Dull, 31);
    std::normal_distribution<double> n(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(g.cols()));
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = scale * n(rng);
    }
    return g;
  }();
  const std::vector<double> v = f.flatten();
  if (static_cast<Eigen::Index>(v.size()) != G.cols()) throw ContractError("frame_representation: feature size");
  return G * Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Box project_box(const Pose& ego, const RiskObjectState& obj) {
  constexpr double kFocal = 800.0, kCx = 640.0, kCy = 360.0, kCamHeight = 1.4;
  const Vec2 rel = to_ego(ego, obj.position - ego.position);
  if (rel.x < 0.5) return Box{};
  const double w = obj.pedestrian ? 0.6 : 1.8;
  const double h = obj.pedestrian ? 1.7 : 1.5;
  const double u = kCx - kFocal * rel.y / rel.x;
  const double half = kFocal * w / (2.0 * rel.x);
  return Box{{u - half, kCy + kFocal * (kCamHeight - h) / rel.x}, {u + half, kCy + kFocal * kCamHeight / rel.x}};
}

std::vector<RiskScene> make_risk_suite(const std::vector<Episode>& egos, const RiskSuiteConfig& cfg, bool with_risk,
                                       double frame_hz) {
  if (egos.empty()) throw ContractError("make_risk_suite: no ego episodes");
  if (cfg.distractors_min < 0 || cfg.distractors_max < cfg.distractors_min) {
    throw ContractError("make_risk_suite: bad distractor range");
  }
  auto rng = make_rng(cfg.seed, with_risk ? 41 : 42);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  const auto lookahead = static_cast<std::size_t>(std::ceil(cfg.tau_max_s * frame_hz)) + 1;

  std::vector<RiskScene> out;
  while (static_cast<int>(out.size()) < cfg.n_scenes) {
    const std::size_t e = static_cast<std::size_t>(u01(rng) * static_cast<double>(egos.size())) % egos.size();
    const Episode& ep = egos[e];
    const auto& path = ep.ideal_poses;
    if (path.size() < lookahead + 3) continue;
    const std::size_t t0 = 2 + static_cast<std::size_t>(u01(rng) * static_cast<double>(path.size() - lookahead - 2));
    const Pose& ego = path[t0];

    auto random_object = [&](Vec2 pos, double heading) {
      RiskObjectState o;
      o.pedestrian = u01(rng) < cfg.pedestrian_fraction;
      const double speed = o.pedestrian ? uni(1.0, 2.0) : uni(5.0, 10.0);
      o.position = pos;
      o.velocity = Vec2{std::cos(heading), std::sin(heading)} * speed;
      return o;
    };
    auto conflicting = [&](double tau) {
      const std::size_t j = std::min(path.size() - 1, t0 + static_cast<std::size_t>(std::lround(tau * frame_hz)));
      const double t = static_cast<double>(j - t0) / frame_hz;
      const Pose& at = path[j];
      const double side = u01(rng) < 0.5 ? 1.0 : -1.0;
      RiskObjectState o = random_object({}, at.heading + side * uni(kPi / 3, 2 * kPi / 3));
      o.position = at.position - o.velocity * t;
      return o;
    };

    std::vector<RiskObjectState> objs;
    if (with_risk) {
      const double tau = uni(cfg.tau_min_s, cfg.tau_max_s);
      objs.push_back(conflicting(tau));
      if (u01(rng) < cfg.second_conflict_prob) objs.push_back(conflicting(std::min(cfg.horizon_s, tau + uni(1.5, 2.5))));
    }
    const int n_distractors =
        cfg.distractors_min + static_cast<int>(u01(rng) * (cfg.distractors_max - cfg.distractors_min + 1));
    for (int d = 0; d < n_distractors; ++d) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const Vec2 local{uni(-5.0, 35.0), uni(-20.0, 20.0)};
        const double c = std::cos(ego.heading), s = std::sin(ego.heading);
        const Vec2 pos = ego.position + Vec2{c * local.x - s * local.y, s * local.x + c * local.y};
        const RiskObjectState o = random_object(pos, uni(-kPi, kPi));
        const ConflictInfo info = analyze_conflict(path, t0, frame_hz, o, cfg.conflict_radius_m, cfg.horizon_s);
        if (info.first_conflict_s || info.closest_m < cfg.conflict_radius_m + 1.0 || local.norm() < 3.0) continue;
        objs.push_back(o);
        break;
      }
    }
    if (objs.empty()) continue;
    std::shuffle(objs.begin(), objs.end(), rng);

    RiskScene scene;
    scene.episode = e;
    scene.frame = t0;
    scene.g_f = frame_representation(ep.features[t0]);
    std::vector<ConflictInfo> infos;
    std::normal_distribution<double> noise(0.0, 1.0);
    for (const auto& o : objs) {
      infos.push_back(analyze_conflict(path, t0, frame_hz, o, cfg.conflict_radius_m, cfg.horizon_s));
      VectorXd m = object_message(ego, o, infos.back());
      for (Eigen::Index i = 0; i < m.size(); ++i) m(i) += cfg.message_noise * noise(rng);
      scene.objects.push_back(m);
      scene.boxes.push_back(project_box(ego, o));
    }
    scene.gt_risk_index = ground_truth_risk_index(infos);
    if (with_risk && scene.gt_risk_index < 0) continue;
    out.push_back(std::move(scene));
  }
  return out;
}

double box_iou(const Box& a, const Box& b) {
  if (!(a.area() > 0.0) || !(b.area() > 0.0)) return 0.0;
  const double w = std::min(a.max.x, b.max.x) - std::max(a.min.x, b.min.x);
  const double h = std::min(a.max.y, b.max.y) - std::max(a.min.y, b.min.y);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

BoxMetrics risk_box_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt) {
  if (pred.size() != gt.size()) throw ContractError("risk_box_metrics: length mismatch");
  if (pred.empty()) throw ContractError("risk_box_metrics: no frames");
  std::vector<double> ious;
  for (std::size_t i = 0; i < pred.size(); ++i) ious.push_back(box_iou(pred[i], gt[i]));
  auto acc = [&](double tau) {
    const auto hit = std::count_if(ious.begin(), ious.end(), [&](double v) { return v >= tau; });
    return static_cast<double>(hit) / static_cast<double>(ious.size());
  };
  BoxMetrics m;
  m.acc50 = acc(0.5);
  m.acc75 = acc(0.75);
  for (int k = 10; k < 20; ++k) m.mean_acc += acc(k / 20.0);
  m.mean_acc /= 10.0;
  return m;
}

}  // namespace roadsr
