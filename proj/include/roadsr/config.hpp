#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "roadsr/downstream.hpp"
#include "roadsr/labeler.hpp"
#include "roadsr/optim.hpp"
#include "roadsr/scene_sim.hpp"
#include "roadsr/srp_model.hpp"
#include "roadsr/topology.hpp"

namespace roadsr {

/// Everything a pipeline run depends on. Text form is flat `key = value`
/// lines with dotted section keys; `#` starts a comment.
struct RunConfig {
  std::uint64_t seed = 0;

  /// Episodes per (topology kind, action), indexed [kind][action].
  std::array<std::array<int, 5>, 4> mix{};
  double no_crosswalk_fraction = 0.0;  // intersection episodes built without crosswalks
  double interactive_fraction = 0.0;   // intersection episodes with a yield pause

  TopologyParams topology;
  /// sim.yield_frames is the pause length used for interactive episodes only.
  SimConfig sim;
  CoherenceParams coherence;
  LabelerParams labeler;

  SrpConfig srp;
  int window_stride = 1;
  AdamHyper srp_train;

  AdamHyper intent_train;
  int intent_horizon_min = 1;
  int intent_horizon_max = 10;

  RiskSuiteConfig risk;
  int risk_train_scenes = 400;
  int risk_fused_dim = kDefaultFusedDim;
  AdamHyper risk_train;

  double split_train = 0.6;
  double split_val = 0.1;
  double split_test = 0.3;

  RunConfig();

  int& count(TopologyKind k, AffordedAction a) { return mix[static_cast<int>(k)][static_cast<int>(a)]; }
  int count(TopologyKind k, AffordedAction a) const { return mix[static_cast<int>(k)][static_cast<int>(a)]; }
  int total_episodes() const;

  void validate() const;
};

/// Parses config text on top of the defaults. Unknown or repeated keys and
/// malformed values raise ContractError naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Every key in a fixed order; doubles use the shortest exact representation,
/// so parse_config(canonical_text(c)) reproduces c.
std::string canonical_text(const RunConfig& c);

/// 16 hex digits of FNV-1a 64 over canonical_text.
std::string config_hash(const RunConfig& c);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace roadsr
