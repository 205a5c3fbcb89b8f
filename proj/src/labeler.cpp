#include "roadsr/labeler.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace roadsr {

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::ReconstructionFailure: return "ReconstructionFailure";
    case RejectReason::IncoherentTrajectory: return "IncoherentTrajectory";
    case RejectReason::CrosswalkCountMismatch: return "CrosswalkCountMismatch";
  }
  return "?";
}

RejectReason reject_reason_from_string(std::string_view s) {
  for (auto r : {RejectReason::ReconstructionFailure, RejectReason::IncoherentTrajectory,
                 RejectReason::CrosswalkCountMismatch}) {
    if (to_string(r) == s) return r;
  }
  throw ContractError("unknown reject reason: " + std::string(s));
}

void CoherenceParams::validate() const {
  if (!(max_step_m > 0.0) || !(max_heading_step_rad > 0.0)) throw ContractError("coherence limits must be positive");
  if (!(min_localized_fraction >= 0.0 && min_localized_fraction <= 1.0)) {
    throw ContractError("min_localized_fraction not in [0,1]");
  }
}

QualityVerdict quality_filter(const std::vector<Pose>& poses, const CoherenceParams& p) {
  p.validate();
  if (poses.size() < 2) throw ContractError("quality_filter needs at least 2 poses");
  const auto localized = std::count_if(poses.begin(), poses.end(), [](const Pose& x) { return x.localized; });
  if (static_cast<double>(localized) < p.min_localized_fraction * static_cast<double>(poses.size())) {
    return {false, RejectReason::ReconstructionFailure};
  }
  const Pose* prev = nullptr;
  for (const auto& cur : poses) {
    if (!cur.localized) continue;
    if (prev) {
      const double gap = static_cast<double>(cur.frame_index - prev->frame_index);
      if (!(gap > 0)) throw ContractError("frame_index must be strictly increasing");
      if ((cur.position - prev->position).norm() > p.max_step_m * gap ||
          std::abs(angle_diff(cur.heading, prev->heading)) > p.max_heading_step_rad * gap) {
        return {false, RejectReason::IncoherentTrajectory};
      }
    }
    prev = &cur;
  }
  return {true, std::nullopt};
}

Box crossing_zone(const CrosswalkComponent& c, double ego_half_length) {
  Box b = c.box();
  if (b.width() >= b.height()) {
    b.min.y -= ego_half_length;
    b.max.y += ego_half_length;
  } else {
    b.min.x -= ego_half_length;
    b.max.x += ego_half_length;
  }
  return b;
}

namespace {

bool in_box(Vec2 p, const Box& b) { return p.x >= b.min.x && p.x <= b.max.x && p.y >= b.min.y && p.y <= b.max.y; }

double box_distance(Vec2 p, const Box& b) {
  const double dx = std::max({b.min.x - p.x, 0.0, p.x - b.max.x});
  const double dy = std::max({b.min.y - p.y, 0.0, p.y - b.max.y});
  return std::hypot(dx, dy);
}

// Gives each unlocalized frame the label of its nearest localized frame
// (ties go to the earlier frame).
void fill_unlocalized(const std::vector<Pose>& poses, std::vector<SemanticRegion>& labels) {
  const std::size_t n = poses.size();
  std::vector<std::int64_t> prev(n, -1), next(n, -1);
  std::int64_t last = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (poses[i].localized) last = static_cast<std::int64_t>(i);
    prev[i] = last;
  }
  last = -1;
  for (std::size_t i = n; i-- > 0;) {
    if (poses[i].localized) last = static_cast<std::int64_t>(i);
    next[i] = last;
  }
  std::vector<SemanticRegion> out = labels;
  for (std::size_t i = 0; i < n; ++i) {
    if (poses[i].localized) continue;
    const auto fi = poses[i].frame_index;
    std::int64_t pick = -1;
    if (prev[i] < 0) {
      pick = next[i];
    } else if (next[i] < 0) {
      pick = prev[i];
    } else {
      const auto dp = fi - poses[prev[i]].frame_index;
      const auto dn = poses[next[i]].frame_index - fi;
      pick = dp <= dn ? prev[i] : next[i];
    }
    out[i] = pick < 0 ? SemanticRegion::None : labels[pick];
  }
  labels = std::move(out);
}

SemanticRegion turn_label(int i, int letter) {
  return region_from_vocab(1, 1 + (i - 1) * 4 + letter);
}

}  // namespace

LabelingResult label_intersection(const std::vector<Pose>& poses, const BevGrid& grid, AffordedAction action,
                                  const std::optional<Polygon>& core, const LabelerParams& params) {
  const int ai = action_index(action);
  if (ai == 0) throw UnaffordableActionError("label_intersection needs a turn or straight action");
  const std::size_t n = poses.size();
  LabelingResult res;
  res.labels.assign(n, SemanticRegion::None);

  const auto comps = extract_crosswalks(grid, params.min_component_cells);
  std::vector<Box> zones;
  for (const auto& c : comps) zones.push_back(crossing_zone(c, params.ego_half_length));
  auto overlaps = [&](std::size_t frame, std::size_t comp) {
    return poses[frame].localized && in_box(poses[frame].position, zones[comp]);
  };

  // Component #1: first one overlapped along the trajectory.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t first_comp = kNone, first1 = kNone;
  for (std::size_t k = 0; k < n && first_comp == kNone; ++k) {
    for (std::size_t c = 0; c < zones.size(); ++c) {
      if (overlaps(k, c)) {
        first_comp = c;
        first1 = k;
        break;
      }
    }
  }
  std::size_t second_comp = kNone, first2 = kNone, last1 = kNone, last2 = kNone;
  if (first_comp != kNone) {
    for (std::size_t k = first1; k < n; ++k) {
      if (overlaps(k, first_comp)) last1 = k;
    }
    // Component #2: first other component overlapped after leaving #1.
    for (std::size_t k = last1 + 1; k < n && second_comp == kNone; ++k) {
      for (std::size_t c = 0; c < zones.size(); ++c) {
        if (c != first_comp && overlaps(k, c)) {
          second_comp = c;
          first2 = k;
          break;
        }
      }
    }
    if (second_comp != kNone) {
      for (std::size_t k = first2; k < n; ++k) {
        if (overlaps(k, second_comp)) last2 = k;
      }
    }
  }

  if (second_comp != kNone) {
    for (std::size_t k = 0; k < n; ++k) {
      int letter;
      if (k < first1) {
        letter = -1;
      } else if (k <= last1) {
        letter = 0;
      } else if (k < first2) {
        letter = 1;
      } else if (k <= last2) {
        letter = 2;
      } else {
        letter = 3;
      }
      res.labels[k] = letter < 0 ? SemanticRegion::S : turn_label(ai, letter);
    }
  } else {
    if (!core) {
      res.labels.assign(n, SemanticRegion::None);
      res.reject_reason = RejectReason::CrosswalkCountMismatch;
      return res;
    }
    const Box cb = core->bounds();
    std::size_t in_first = kNone, in_last = kNone;
    for (std::size_t k = 0; k < n; ++k) {
      if (poses[k].localized && point_in_polygon(poses[k].position, *core)) {
        if (in_first == kNone) in_first = k;
        in_last = k;
      }
    }
    if (in_first == kNone) {
      // The path never entered the detected core: pivot on the closest frame.
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        if (!poses[k].localized) continue;
        const double d = box_distance(poses[k].position, cb);
        if (d < best) {
          best = d;
          in_first = in_last = k;
        }
      }
      if (in_first == kNone) {
        res.reject_reason = RejectReason::ReconstructionFailure;
        return res;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      res.labels[k] = k < in_first ? SemanticRegion::S : k <= in_last ? turn_label(ai, 1) : turn_label(ai, 3);
    }
  }
  fill_unlocalized(poses, res.labels);
  res.accepted = true;
  return res;
}

LabelingResult label_lane_change(const std::vector<Pose>& poses, const RoadTopology& topology,
                                 AffordedAction action) {
  if (topology.kind != TopologyKind::StraightMultiLane) {
    throw ContractError("label_lane_change needs a StraightMultiLane topology");
  }
  const auto& parts = topology.partition(action);
  const std::size_t k = parts.size();
  const std::size_t n = poses.size();
  // Partition lookup per localized pose, then the non-decreasing region
  // sequence with the fewest disagreements (unlocalized or outside poses are
  // neutral). Ties keep the earlier region.
  std::vector<int> observed(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!poses[i].localized) continue;
    const SemanticRegion r = ground_truth_region(topology, action, poses[i].position);
    for (std::size_t j = 0; j < k; ++j) {
      if (parts[j].region == r) observed[i] = static_cast<int>(j);
    }
  }
  std::vector<std::vector<int>> cost(n, std::vector<int>(k, 0));
  std::vector<std::vector<std::size_t>> from(n, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const int miss = observed[i] >= 0 && observed[i] != static_cast<int>(j) ? 1 : 0;
      if (i == 0) {
        cost[i][j] = miss;
        continue;
      }
      std::size_t best = 0;
      for (std::size_t q = 1; q <= j; ++q) {
        if (cost[i - 1][q] < cost[i - 1][best]) best = q;
      }
      cost[i][j] = cost[i - 1][best] + miss;
      from[i][j] = best;
    }
  }
  LabelingResult res;
  res.labels.assign(n, SemanticRegion::None);
  if (n > 0) {
    std::size_t j = 0;
    for (std::size_t q = 1; q < k; ++q) {
      if (cost[n - 1][q] < cost[n - 1][j]) j = q;
    }
    for (std::size_t i = n; i-- > 0;) {
      res.labels[i] = parts[j].region;
      if (i > 0) j = from[i][j];
    }
  }
  res.accepted = true;
  return res;
}

LabelingResult label_episode(const Episode& ep, const CoherenceParams& coherence, const LabelerParams& params) {
  const QualityVerdict v = quality_filter(ep.poses, coherence);
  if (!v.accepted) {
    LabelingResult res;
    res.labels.assign(ep.poses.size(), SemanticRegion::None);
    res.reject_reason = v.reason;
    return res;
  }
  if (!is_intersection(ep.topology.kind)) return label_lane_change(ep.poses, ep.topology, ep.action);
  const auto core = detect_intersection_core(ep.grid, params.min_component_cells);
  return label_intersection(ep.poses, ep.grid, ep.action, core, params);
}

double labeling_accuracy(const LabelingResult& pred, const std::vector<SemanticRegion>& gt) {
  if (pred.labels.size() != gt.size()) throw ContractError("labeling_accuracy: length mismatch");
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == SemanticRegion::None) continue;
    ++total;
    if (pred.labels[i] == gt[i]) ++correct;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<SemanticRegion> run_sequence(const std::vector<SemanticRegion>& labels) {
  std::vector<SemanticRegion> runs;
  for (auto r : labels) {
    if (r == SemanticRegion::None) continue;
    if (runs.empty() || runs.back() != r) runs.push_back(r);
  }
  return runs;
}

}  // namespace roadsr
