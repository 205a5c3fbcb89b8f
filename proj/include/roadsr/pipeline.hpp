#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsr/checkpoint.hpp"
#include "roadsr/config.hpp"
#include "roadsr/dataset.hpp"
#include "roadsr/metrics.hpp"

namespace roadsr {

using nlohmann::ordered_json;

struct EpisodeSpec {
  std::int64_t id = 0;
  TopologyKind kind = TopologyKind::FourWay;
  AffordedAction action = AffordedAction::Straight;
  bool crosswalks = true;
  bool interactive = false;
  Split split = Split::Train;
  std::uint64_t seed = 0;
};

/// Episodes in mix order (kind, then action). Splits are assigned per
/// (kind, action) group from a seeded permutation. Throws
/// UnaffordableActionError for a nonzero count the topology cannot drive.
std::vector<EpisodeSpec> plan_episodes(const RunConfig& cfg);
EpisodeSpec spec_of(const EpisodeRecord& r);
RoadTopology spec_topology(const RunConfig& cfg, const EpisodeSpec& s);
SimConfig spec_sim(const RunConfig& cfg, const EpisodeSpec& s);

/// Simulates the episode, runs the labeler and keeps everything but the points.
EpisodeRecord record_episode(const RunConfig& cfg, const EpisodeSpec& s);
Dataset build_dataset(const RunConfig& cfg, const std::function<void(std::size_t, std::size_t)>& progress = {});

// ---- evaluation building blocks ----

inline constexpr int kCombinedRegions = 18;
/// Intersection regions map to 0..12, non-intersection regions to 13..17.
int combined_region_index(SemanticRegion r);
std::vector<std::string> combined_region_names();

ordered_json labeler_report(const Dataset& d);

std::vector<TrainSample> srp_training_samples(const Dataset& d, Split split = Split::Train);

struct SrpEvaluation {
  double topology_accuracy = 0.0;
  std::size_t n_windows = 0;
  MetricsReport current;
  MetricsReport future;
  double future_majority_map = 0.0;
};
SrpEvaluation evaluate_srp(const SrpParams& p, const Dataset& d, Split split = Split::Test);
ordered_json to_json(const SrpEvaluation& e);

std::vector<IntentSample> intent_samples(const Dataset& d, Split split);

struct IntentModels {
  IntentHead srp_head;
  IntentHead ablation_head;
};
IntentModels train_intent_models(const SrpParams& p, const Dataset& d);
ordered_json evaluate_intent(const SrpParams& p, const IntentModels& m, const Dataset& d, Split split = Split::Test);

struct RiskVariantResult {
  double identification_rate = 0.0;
  BoxMetrics boxes;
  std::vector<int> picked;
  std::vector<std::vector<double>> scores;
};
struct RiskEvaluation {
  RiskVariantResult fused;
  RiskVariantResult plain;
  std::vector<int> gt;
};
/// Trains both behavior models on scenes built from training-split egos and
/// evaluates on the risk suite built from test-split egos.
RiskEvaluation evaluate_risk(const SrpParams& p, const Dataset& d);
ordered_json to_json(const RiskEvaluation& e);

/// Seeded scene per topology kind written as bev_<Kind>.pgm / .csv.
std::vector<std::string> export_bev(const RunConfig& cfg, const std::string& dir);

// ---- commands ----

/// Creates the directory and holds <dir>/.roadsr.lock while alive.
class OutputLock {
 public:
  explicit OutputLock(const std::string& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

/// `expected` (if set) must hash to the dataset's config.
struct CommandInputs {
  std::string out_dir = "out";
  std::string dataset;
  std::string checkpoint;
  std::string intent_checkpoint;
  const RunConfig* expected = nullptr;
};

ordered_json cmd_gen(const RunConfig& cfg, const CommandInputs& in);
ordered_json cmd_eval_labeler(const CommandInputs& in);
ordered_json cmd_train_srp(const CommandInputs& in);
ordered_json cmd_eval_srp(const CommandInputs& in);
ordered_json cmd_train_intent(const CommandInputs& in);
ordered_json cmd_eval_intent(const CommandInputs& in);
ordered_json cmd_risk(const CommandInputs& in);
ordered_json cmd_export_bev(const RunConfig& cfg, const CommandInputs& in);

void write_json_file(const ordered_json& j, const std::string& path);

}  // namespace roadsr
