#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "roadsr/config.hpp"
#include "roadsr/labeler.hpp"
#include "roadsr/srp_model.hpp"

namespace roadsr {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct FrameRecord {
  Pose pose;  // observed pose
  std::vector<double> feature;
  SemanticRegion gt_region = SemanticRegion::None;
  SemanticRegion labeler_region = SemanticRegion::None;
};

struct EpisodeRecord {
  std::int64_t id = 0;
  TopologyKind kind = TopologyKind::FourWay;
  AffordedAction action = AffordedAction::Straight;
  bool crosswalks = true;
  bool interactive = false;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  int topology_class = 0;
  bool accepted = false;
  std::optional<RejectReason> reject_reason;
  std::vector<FrameRecord> frames;
};

/// Line-delimited JSON: one header object, then one object per frame in
/// episode order. The header embeds the canonical config text.
struct Dataset {
  static constexpr int kFormatVersion = 1;

  RunConfig config;
  std::vector<EpisodeRecord> episodes;

  std::string hash() const { return config_hash(config); }
};

void write_dataset(const Dataset& d, std::ostream& os);
/// Rejects unknown formats and versions, feature lengths that differ from the
/// header, out-of-order frames and a header hash that does not match its config.
Dataset read_dataset(std::istream& is);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

enum class LabelSource : std::uint8_t { Labeler, GroundTruth };

struct WindowSample {
  TrainSample sample;
  std::int64_t episode_id = 0;
  int end_frame = 0;
  int topology_class = 0;
  SemanticRegion current = SemanticRegion::None;  // label at end_frame
  std::vector<SemanticRegion> future;             // labels at end_frame + m, None past the end
};

/// Sliding windows of t_e frames ending at t = t_e-1, t_e-1+stride, ...
/// Region targets index the episode's vocabulary; None becomes -1.
std::vector<WindowSample> extract_windows(const EpisodeRecord& ep, const SrpConfig& cfg, int stride,
                                          LabelSource source);

}  // namespace roadsr
