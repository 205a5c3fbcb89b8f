#pragma once

#include <functional>
#include <vector>

#include "roadsr/optim.hpp"
#include "roadsr/scene_sim.hpp"
#include "roadsr/srp_model.hpp"

namespace roadsr {

/// Linear softmax classifier: softmax(W^T x + b).
struct SoftmaxHead {
  MatrixXd W;  // in_dim x classes
  MatrixXd b;  // classes x 1

  static SoftmaxHead zeros(int in_dim, int classes);
  int in_dim() const { return static_cast<int>(W.rows()); }
  int classes() const { return static_cast<int>(W.cols()); }
  VectorXd logits(const VectorXd& x) const;
  VectorXd probabilities(const VectorXd& x) const;
};

/// Cross-entropy training of a zero-initialized head with Adam (decay on W only).
SoftmaxHead train_softmax_head(const std::vector<VectorXd>& xs, const std::vector<int>& ys, int classes,
                               const AdamHyper& hyper, std::vector<double>* epoch_loss = nullptr);

// ---- intention ----

inline constexpr int kIntentClasses = 5;
using IntentHead = SoftmaxHead;

/// Probabilities over (LeftTurn, Straight, RightTurn, LeftLaneChange, RightLaneChange).
VectorXd intent_predict(const IntentHead& head, const VectorXd& h);

struct IntentSample {
  Window window;
  int horizon = 1;  // frames between the window end and the maneuver
  AffordedAction gt_intention = AffordedAction::Straight;
  bool interactive = false;
  std::int64_t episode_id = 0;
};

/// Frame at which the maneuver becomes visible: first B / lane-crossing frame,
/// or the middle frame for straight driving on a straight road.
std::size_t maneuver_frame(const std::vector<SemanticRegion>& regions, AffordedAction action);

/// Windows ending horizon_min..horizon_max frames before the maneuver frame.
std::vector<IntentSample> make_intent_samples(const std::vector<std::vector<VectorXd>>& episode_features,
                                              const std::vector<std::vector<SemanticRegion>>& episode_regions,
                                              const std::vector<AffordedAction>& actions,
                                              const std::vector<bool>& interactive, int t_e, int horizon_min,
                                              int horizon_max);

/// Trains only the head on frozen SRP accumulator states. Throws if the SRP
/// parameters change.
IntentHead train_intent(const std::vector<IntentSample>& data, const SrpParams& srp, const SrpConfig& cfg,
                        const AdamHyper& hyper);

/// Ablation input: mean raw feature over the window.
VectorXd window_mean(const Window& w);
IntentHead train_intent_ablation(const std::vector<IntentSample>& data, const AdamHyper& hyper);

// ---- risk objects ----

inline constexpr int kObjectMessageDim = 8;
inline constexpr int kFrameReprDim = 32;
inline constexpr int kDefaultFusedDim = 100;

struct RiskScene {
  VectorXd g_f;                   // frame representation
  std::vector<VectorXd> objects;  // messages g_k
  std::vector<Box> boxes;         // image-plane boxes
  int gt_risk_index = -1;         // -1: scene without a conflicting object
  std::size_t episode = 0;        // ego episode and frame the scene is attached to
  std::size_t frame = 0;
};

/// Fused variant: (W_ego (g_f (+) mean g_k) + b_ego) (+) h.
/// Plain variant: g_f (+) mean g_k.
struct EgoFusion {
  bool fused = true;
  MatrixXd W_ego;  // fused_dim x (frame_dim + message_dim)
  MatrixXd b_ego;  // fused_dim x 1

  static EgoFusion plain();
  static EgoFusion zeros(int fused_dim, int frame_dim = kFrameReprDim, int message_dim = kObjectMessageDim);
  static EgoFusion random(int fused_dim, std::uint64_t seed, int frame_dim = kFrameReprDim,
                          int message_dim = kObjectMessageDim);
  int output_dim(int frame_dim, int message_dim, int hidden_dim) const;
};

/// Mean over the unmasked object messages. Throws when every object is masked.
VectorXd masked_mean(const RiskScene& scene, const std::vector<int>& masked);

VectorXd ego_fuse(const RiskScene& scene, const EgoFusion& fusion, const VectorXd& h,
                  const std::vector<int>& masked = {});

using BehaviorFn = std::function<VectorXd(const VectorXd& fused)>;

struct RiskResult {
  int index = 0;
  std::vector<double> scores;
};

/// score_k = L1 change of the behavior output when object k is masked.
RiskResult risk_identify(const RiskScene& scene, const VectorXd& h, const EgoFusion& fusion,
                         const BehaviorFn& behavior);

/// Behavior model over ego_fuse outputs; classes are (go, stop).
struct BehaviorModel {
  EgoFusion fusion;
  SoftmaxHead head;

  VectorXd operator()(const VectorXd& fused) const { return head.probabilities(fused); }
  BehaviorFn fn() const;
};

/// Joint training of the fusion layer (when fused) and the behavior head.
/// Label is stop when the scene holds a conflicting object.
BehaviorModel train_behavior(const std::vector<RiskScene>& scenes, const std::vector<VectorXd>& hidden,
                             EgoFusion init, const AdamHyper& hyper);

struct RiskSuiteConfig {
  int n_scenes = 100;
  int distractors_min = 2;
  int distractors_max = 5;
  double tau_min_s = 1.0;
  double tau_max_s = 4.0;
  double conflict_radius_m = 2.5;
  double horizon_s = 6.0;
  double message_noise = 0.1;
  double pedestrian_fraction = 0.5;
  double second_conflict_prob = 0.3;
  std::uint64_t seed = 0;
};

struct RiskObjectState {
  Vec2 position;  // world frame at the scene frame
  Vec2 velocity;
  bool pedestrian = false;
};

/// Time of the first approach within the radius (nullopt if none) and the
/// closest approach distance, over the horizon with the ego following `ego`.
struct ConflictInfo {
  std::optional<double> first_conflict_s;
  double closest_m = 0.0;
  bool path_crossing = false;
};
ConflictInfo analyze_conflict(const std::vector<Pose>& ego, std::size_t frame, double frame_hz,
                              const RiskObjectState& obj, double radius, double horizon_s);

/// Earliest conflict wins; ties go to the lowest index; -1 when none conflicts.
int ground_truth_risk_index(const std::vector<ConflictInfo>& infos);

VectorXd object_message(const Pose& ego, const RiskObjectState& obj, const ConflictInfo& info);
VectorXd frame_representation(const FrameFeature& f);
/// Pinhole projection of the object from the ego camera; zero-area when behind.
Box project_box(const Pose& ego, const RiskObjectState& obj);

/// Scenes attached to random frames of the given ego episodes. With
/// with_risk, every scene holds a conflicting object at 1-4 s.
std::vector<RiskScene> make_risk_suite(const std::vector<Episode>& egos, const RiskSuiteConfig& cfg, bool with_risk,
                                       double frame_hz);

double box_iou(const Box& a, const Box& b);

struct BoxMetrics {
  double acc50 = 0.0;
  double acc75 = 0.0;
  double mean_acc = 0.0;  // mean accuracy over IoU thresholds 0.50:0.05:0.95
};

BoxMetrics risk_box_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt);

}  // namespace roadsr
