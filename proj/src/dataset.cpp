#include "roadsr/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace roadsr {

using nlohmann::ordered_json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  for (Split v : {Split::Train, Split::Val, Split::Test}) {
    if (to_string(v) == s) return v;
  }
  throw ContractError("unknown split '" + std::string(s) + "'");
}

namespace {

constexpr const char* kFormatName = "roadsr-dataset";

ordered_json header_json(const Dataset& d) {
  ordered_json classes = ordered_json::array();
  for (SemanticClass c : kAllSemanticClasses) classes.push_back(to_string(c));
  ordered_json regions = ordered_json::array();
  for (int i = 1; i <= static_cast<int>(SemanticRegion::NTR); ++i) {
    regions.push_back(to_string(static_cast<SemanticRegion>(i)));
  }
  ordered_json fan = {{"ranges_m", kDefaultFan.ranges_m}, {"bearings_deg", kDefaultFan.bearings_deg}};
  return {{"format", kFormatName},
          {"format_version", Dataset::kFormatVersion},
          {"config_hash", d.hash()},
          {"config", canonical_text(d.config)},
          {"feature_dim", FanGeometry::kFeatureDim},
          {"fan", fan},
          {"classes", classes},
          {"regions", regions},
          {"episodes", d.episodes.size()}};
}

ordered_json frame_json(const EpisodeRecord& ep, std::size_t i) {
  const FrameRecord& f = ep.frames[i];
  return {{"episode_id", ep.id},
          {"frame_index", i},
          {"topology", to_string(ep.kind)},
          {"action", to_string(ep.action)},
          {"crosswalks", ep.crosswalks},
          {"interactive", ep.interactive},
          {"split", to_string(ep.split)},
          {"episode_seed", ep.seed},
          {"topology_class", ep.topology_class},
          {"accepted", ep.accepted},
          {"reject_reason", ep.reject_reason ? ordered_json(to_string(*ep.reject_reason)) : ordered_json(nullptr)},
          {"pose",
           {{"x", f.pose.position.x},
            {"y", f.pose.position.y},
            {"heading", f.pose.heading},
            {"localized", f.pose.localized}}},
          {"feature", f.feature},
          {"gt_region", to_string(f.gt_region)},
          {"labeler_region", to_string(f.labeler_region)}};
}

bool same_episode_fields(const EpisodeRecord& a, const EpisodeRecord& b) {
  return a.kind == b.kind && a.action == b.action && a.crosswalks == b.crosswalks &&
         a.interactive == b.interactive && a.split == b.split && a.seed == b.seed &&
         a.topology_class == b.topology_class && a.accepted == b.accepted && a.reject_reason == b.reject_reason;
}

}  // namespace

void write_dataset(const Dataset& d, std::ostream& os) {
  os << header_json(d).dump() << '\n';
  for (const auto& ep : d.episodes) {
    for (std::size_t i = 0; i < ep.frames.size(); ++i) os << frame_json(ep, i).dump() << '\n';
  }
}

Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset is empty");
  Dataset d;
  std::size_t feature_dim = 0;
  std::size_t line_no = 1;
  try {
    const auto h = ordered_json::parse(line);
    if (!h.is_object() || h.value("format", "") != kFormatName) throw FormatError("not a dataset file");
    const int version = h.at("format_version").get<int>();
    if (version != Dataset::kFormatVersion) {
      throw FormatError("unsupported dataset format_version " + std::to_string(version));
    }
    d.config = parse_config(h.at("config").get<std::string>());
    if (h.at("config_hash").get<std::string>() != d.hash()) throw FormatError("dataset header hash mismatch");
    feature_dim = h.at("feature_dim").get<std::size_t>();
    if (feature_dim != FanGeometry::kFeatureDim) throw FormatError("dataset feature_dim differs from the fan");

    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = ordered_json::parse(line);
      EpisodeRecord meta;
      meta.id = j.at("episode_id").get<std::int64_t>();
      meta.kind = topology_kind_from_string(j.at("topology").get<std::string>());
      meta.action = action_from_string(j.at("action").get<std::string>());
      meta.crosswalks = j.at("crosswalks").get<bool>();
      meta.interactive = j.at("interactive").get<bool>();
      meta.split = split_from_string(j.at("split").get<std::string>());
      meta.seed = j.at("episode_seed").get<std::uint64_t>();
      meta.topology_class = j.at("topology_class").get<int>();
      meta.accepted = j.at("accepted").get<bool>();
      if (!j.at("reject_reason").is_null()) {
        meta.reject_reason = reject_reason_from_string(j.at("reject_reason").get<std::string>());
      }
      const auto frame_index = j.at("frame_index").get<std::size_t>();
      if (frame_index == 0) {
        d.episodes.push_back(meta);
      } else if (d.episodes.empty() || d.episodes.back().id != meta.id ||
                 d.episodes.back().frames.size() != frame_index || !same_episode_fields(d.episodes.back(), meta)) {
        throw FormatError("frame out of order");
      }
      FrameRecord f;
      const auto& p = j.at("pose");
      f.pose.position = {p.at("x").get<double>(), p.at("y").get<double>()};
      f.pose.heading = p.at("heading").get<double>();
      f.pose.localized = p.at("localized").get<bool>();
      f.feature = j.at("feature").get<std::vector<double>>();
      if (f.feature.size() != feature_dim) throw FormatError("feature length differs from the header");
      f.gt_region = region_from_string(j.at("gt_region").get<std::string>());
      f.labeler_region = region_from_string(j.at("labeler_region").get<std::string>());
      d.episodes.back().frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
  } catch (const FormatError&) {
    throw;
  } catch (const ContractError& e) {
    throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  write_dataset(d, os);
  if (!os.flush()) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return read_dataset(is);
}

std::vector<WindowSample> extract_windows(const EpisodeRecord& ep, const SrpConfig& cfg, int stride,
                                          LabelSource source) {
  cfg.validate();
  if (stride < 1) throw ContractError("extract_windows: stride must be positive");
  const int n = static_cast<int>(ep.frames.size());
  auto label = [&](int t) {
    if (t >= n) return SemanticRegion::None;
    const FrameRecord& f = ep.frames[static_cast<std::size_t>(t)];
    return source == LabelSource::Labeler ? f.labeler_region : f.gt_region;
  };
  auto target_of = [&](SemanticRegion r) {
    if (r == SemanticRegion::None) return -1;
    const bool inter = is_intersection_region(r);
    if (inter != (ep.topology_class == 1)) throw ContractError("region label outside the episode vocabulary");
    return vocab_index(r);
  };
  std::vector<WindowSample> out;
  for (int t = cfg.t_e - 1; t < n; t += stride) {
    WindowSample w;
    w.episode_id = ep.id;
    w.end_frame = t;
    w.topology_class = ep.topology_class;
    for (int k = t - cfg.t_e + 1; k <= t; ++k) {
      const auto& f = ep.frames[static_cast<std::size_t>(k)].feature;
      if (static_cast<int>(f.size()) != cfg.feature_dim) throw ContractError("extract_windows: feature length");
      w.sample.window.push_back(Eigen::Map<const VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())));
      w.sample.target.topology.push_back(ep.topology_class);
      w.sample.target.current.push_back(target_of(label(k)));
    }
    w.current = label(t);
    for (int m = 0; m < cfg.t_d; ++m) {
      w.future.push_back(label(t + m));
      w.sample.target.future.push_back(target_of(label(t + m)));
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace roadsr
