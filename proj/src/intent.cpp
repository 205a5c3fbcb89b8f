#include <algorithm>
#include <numeric>

#include "roadsr/downstream.hpp"

namespace roadsr {

SoftmaxHead SoftmaxHead::zeros(int in_dim, int classes) {
  if (in_dim < 1 || classes < 2) throw ContractError("softmax head needs in_dim >= 1 and >= 2 classes");
  return {MatrixXd::Zero(in_dim, classes), MatrixXd::Zero(classes, 1)};
}

VectorXd SoftmaxHead::logits(const VectorXd& x) const {
  if (x.size() != W.rows()) throw ContractError("softmax head: input dimension mismatch");
  return W.transpose() * x + b.col(0);
}

VectorXd SoftmaxHead::probabilities(const VectorXd& x) const { return softmax(logits(x)); }

SoftmaxHead train_softmax_head(const std::vector<VectorXd>& xs, const std::vector<int>& ys, int classes,
                               const AdamHyper& hy, std::vector<double>* epoch_loss) {
  if (xs.empty() || xs.size() != ys.size()) throw ContractError("train_softmax_head: bad dataset");
  if (hy.batch < 1) throw ContractError("train_softmax_head: batch must be positive");
  SoftmaxHead head = SoftmaxHead::zeros(static_cast<int>(xs.front().size()), classes);
  for (int y : ys) {
    if (y < 0 || y >= classes) throw ContractError("train_softmax_head: label out of range");
  }
  Adam opt({&head.W, &head.b}, {true, false}, hy);
  MatrixXd gW = MatrixXd::Zero(head.W.rows(), head.W.cols());
  MatrixXd gb = MatrixXd::Zero(head.b.rows(), 1);
  auto rng = make_rng(hy.seed, 21);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < hy.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hy.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hy.batch));
      gW.setZero();
      gb.setZero();
      for (std::size_t k = start; k < stop; ++k) {
        const VectorXd& x = xs[order[k]];
        const VectorXd z = head.logits(x);
        total += softmax_cross_entropy(z, ys[order[k]]);
        VectorXd dz = softmax(z);
        dz(ys[order[k]]) -= 1.0;
        gW.noalias() += x * dz.transpose();
        gb.col(0) += dz;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      gW *= inv;
      gb *= inv;
      opt.step({&gW, &gb});
    }
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(xs.size()));
  }
  return head;
}

VectorXd intent_predict(const IntentHead& head, const VectorXd& h) {
  if (head.classes() != kIntentClasses) throw ContractError("intent head must have 5 outputs");
  return head.probabilities(h);
}

std::size_t maneuver_frame(const std::vector<SemanticRegion>& regions, AffordedAction action) {
  if (regions.empty()) throw ContractError("maneuver_frame: empty episode");
  auto first_of = [&](std::initializer_list<SemanticRegion> set) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (std::find(set.begin(), set.end(), regions[i]) != set.end()) return i;
    }
    return std::nullopt;
  };
  std::optional<std::size_t> f;
  switch (action) {
    case AffordedAction::LeftTurn: f = first_of({SemanticRegion::B1, SemanticRegion::T1}); break;
    case AffordedAction::RightTurn: f = first_of({SemanticRegion::B3, SemanticRegion::T3}); break;
    case AffordedAction::Straight: f = first_of({SemanticRegion::B2, SemanticRegion::T2}); break;
    case AffordedAction::LeftLaneChange: f = first_of({SemanticRegion::NCL, SemanticRegion::NTL}); break;
    case AffordedAction::RightLaneChange: f = first_of({SemanticRegion::NCR, SemanticRegion::NTR}); break;
  }
  return f ? *f : regions.size() / 2;
}

std::vector<IntentSample> make_intent_samples(const std::vector<std::vector<VectorXd>>& features,
                                              const std::vector<std::vector<SemanticRegion>>& regions,
                                              const std::vector<AffordedAction>& actions,
                                              const std::vector<bool>& interactive, int t_e, int horizon_min,
                                              int horizon_max) {
  if (features.size() != regions.size() || features.size() != actions.size() ||
      features.size() != interactive.size()) {
    throw ContractError("make_intent_samples: per-episode inputs differ in length");
  }
  if (horizon_min < 1 || horizon_max < horizon_min) throw ContractError("intent horizon must be positive");
  std::vector<IntentSample> out;
  for (std::size_t e = 0; e < features.size(); ++e) {
    const auto event = static_cast<long>(maneuver_frame(regions[e], actions[e]));
    for (int h = horizon_min; h <= horizon_max; ++h) {
      const long end = event - h;
      if (end - (t_e - 1) < 0) continue;
      IntentSample s;
      for (long t = end - (t_e - 1); t <= end; ++t) s.window.push_back(features[e][static_cast<std::size_t>(t)]);
      s.horizon = h;
      s.gt_intention = actions[e];
      s.interactive = interactive[e];
      s.episode_id = static_cast<std::int64_t>(e);
      out.push_back(std::move(s));
    }
  }
  return out;
}

IntentHead train_intent(const std::vector<IntentSample>& data, const SrpParams& srp, const SrpConfig& cfg,
                        const AdamHyper& hyper) {
  const std::uint64_t before = srp.checksum();
  std::vector<VectorXd> xs;
  std::vector<int> ys;
  for (const auto& s : data) {
    if (s.horizon <= 0) throw ContractError("intent sample horizon must be positive");
    xs.push_back(forward(srp, cfg, s.window).accumulator());
    ys.push_back(static_cast<int>(s.gt_intention));
  }
  IntentHead head = train_softmax_head(xs, ys, kIntentClasses, hyper);
  if (srp.checksum() != before) throw std::logic_error("train_intent modified the frozen SRP parameters");
  return head;
}

VectorXd window_mean(const Window& w) {
  if (w.empty()) throw ContractError("window_mean: empty window");
  VectorXd m = VectorXd::Zero(w.front().size());
  for (const auto& x : w) m += x;
  return m / static_cast<double>(w.size());
}

IntentHead train_intent_ablation(const std::vector<IntentSample>& data, const AdamHyper& hyper) {
  std::vector<VectorXd> xs;
  std::vector<int> ys;
  for (const auto& s : data) {
    xs.push_back(window_mean(s.window));
    ys.push_back(static_cast<int>(s.gt_intention));
  }
  return train_softmax_head(xs, ys, kIntentClasses, hyper);
}

}  // namespace roadsr
