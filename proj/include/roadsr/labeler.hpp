#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "roadsr/bev.hpp"
#include "roadsr/scene_sim.hpp"
#include "roadsr/topology.hpp"

namespace roadsr {

enum class RejectReason : std::uint8_t {
  ReconstructionFailure = 0,
  IncoherentTrajectory = 1,
  CrosswalkCountMismatch = 2,
};

std::string_view to_string(RejectReason r);
RejectReason reject_reason_from_string(std::string_view s);

struct CoherenceParams {
  double max_step_m = 3.0;
  double max_heading_step_rad = 0.5;
  double min_localized_fraction = 0.5;

  void validate() const;
};

struct QualityVerdict {
  bool accepted = true;
  std::optional<RejectReason> reason;
};

/// Reconstruction check first, then per-frame motion between consecutive
/// localized poses (limits scale with the frame-index gap).
QualityVerdict quality_filter(const std::vector<Pose>& poses, const CoherenceParams& p);

struct LabelingResult {
  std::vector<SemanticRegion> labels;
  bool accepted = false;
  std::optional<RejectReason> reject_reason;
};

struct LabelerParams {
  double ego_half_length = 2.0;
  int min_component_cells = kDefaultMinComponentCells;
};

/// Footprint grown by the ego half length across the crossing direction
/// (the shorter side of the component).
Box crossing_zone(const CrosswalkComponent& c, double ego_half_length);

LabelingResult label_intersection(const std::vector<Pose>& poses, const BevGrid& grid, AffordedAction action,
                                  const std::optional<Polygon>& core, const LabelerParams& params = {});

/// Partition lookup per pose, smoothed to the best monotone run sequence.
LabelingResult label_lane_change(const std::vector<Pose>& poses, const RoadTopology& topology,
                                 AffordedAction action);

/// Quality filter followed by the labeler matching the episode's road.
/// The labeler only sees the observed poses, the BEV and the action.
LabelingResult label_episode(const Episode& ep, const CoherenceParams& coherence, const LabelerParams& params);

/// Fraction of frames with gt != None whose label matches; 0 when there are none.
double labeling_accuracy(const LabelingResult& pred, const std::vector<SemanticRegion>& gt);

/// Region runs with consecutive duplicates collapsed (None frames skipped).
std::vector<SemanticRegion> run_sequence(const std::vector<SemanticRegion>& labels);

}  // namespace roadsr
