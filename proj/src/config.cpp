#include "roadsr/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

namespace roadsr {

namespace {

using Slot = std::variant<double*, int*, std::uint64_t*>;

struct Key {
  std::string name;
  std::function<Slot(RunConfig&)> slot;
};

void add_adam(std::vector<Key>& keys, const std::string& prefix, AdamHyper RunConfig::*member) {
  keys.push_back({prefix + ".lr", [member](RunConfig& c) -> Slot { return &(c.*member).lr; }});
  keys.push_back({prefix + ".weight_decay", [member](RunConfig& c) -> Slot { return &(c.*member).weight_decay; }});
  keys.push_back({prefix + ".epochs", [member](RunConfig& c) -> Slot { return &(c.*member).epochs; }});
  keys.push_back({prefix + ".batch", [member](RunConfig& c) -> Slot { return &(c.*member).batch; }});
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
#define ROADSR_KEY(name, expr) k.push_back({name, [](RunConfig& c) -> Slot { return &(expr); }})
    ROADSR_KEY("seed", c.seed);
    for (TopologyKind kind : kAllTopologyKinds) {
      for (AffordedAction a : kAllActions) {
        k.push_back({"mix." + std::string(to_string(kind)) + "." + std::string(to_string(a)),
                     [kind, a](RunConfig& c) -> Slot { return &c.count(kind, a); }});
      }
    }
    ROADSR_KEY("mix.no_crosswalk_fraction", c.no_crosswalk_fraction);
    ROADSR_KEY("mix.interactive_fraction", c.interactive_fraction);
    ROADSR_KEY("topology.lane_width", c.topology.lane_width);
    ROADSR_KEY("topology.lanes_per_direction", c.topology.lanes_per_direction);
    ROADSR_KEY("topology.crosswalk_width", c.topology.crosswalk_width);
    ROADSR_KEY("topology.approach_length", c.topology.approach_length);
    ROADSR_KEY("topology.crosswalk_setback", c.topology.crosswalk_setback);
    ROADSR_KEY("topology.sidewalk_width", c.topology.sidewalk_width);
    ROADSR_KEY("sim.speed_mps", c.sim.speed_mps);
    ROADSR_KEY("sim.frame_hz", c.sim.frame_hz);
    ROADSR_KEY("sim.heading_noise_std", c.sim.heading_noise_std);
    ROADSR_KEY("sim.position_noise_std", c.sim.position_noise_std);
    ROADSR_KEY("sim.pose_dropout_rate", c.sim.pose_dropout_rate);
    ROADSR_KEY("sim.point_density", c.sim.point_density);
    ROADSR_KEY("sim.label_flip_rate", c.sim.label_flip_rate);
    ROADSR_KEY("sim.votes_per_point", c.sim.votes_per_point);
    ROADSR_KEY("sim.lead_in_m", c.sim.lead_in_m);
    ROADSR_KEY("sim.lead_out_m", c.sim.lead_out_m);
    ROADSR_KEY("sim.lane_change_scale_m", c.sim.lane_change_scale_m);
    ROADSR_KEY("sim.cruise_speed_jitter", c.sim.cruise_speed_jitter);
    ROADSR_KEY("sim.turn_speed_mps", c.sim.turn_speed_mps);
    ROADSR_KEY("sim.brake_distance_m", c.sim.brake_distance_m);
    ROADSR_KEY("sim.yield_frames", c.sim.yield_frames);
    ROADSR_KEY("sim.bev_resolution", c.sim.bev_resolution);
    ROADSR_KEY("labeler.max_step_m", c.coherence.max_step_m);
    ROADSR_KEY("labeler.max_heading_step_rad", c.coherence.max_heading_step_rad);
    ROADSR_KEY("labeler.min_localized_fraction", c.coherence.min_localized_fraction);
    ROADSR_KEY("labeler.ego_half_length", c.labeler.ego_half_length);
    ROADSR_KEY("labeler.min_component_cells", c.labeler.min_component_cells);
    ROADSR_KEY("srp.t_e", c.srp.t_e);
    ROADSR_KEY("srp.t_d", c.srp.t_d);
    ROADSR_KEY("srp.hidden_dim", c.srp.hidden_dim);
    ROADSR_KEY("srp.logit_embed_dim", c.srp.logit_embed_dim);
    ROADSR_KEY("srp.window_stride", c.window_stride);
    add_adam(k, "train", &RunConfig::srp_train);
    add_adam(k, "intent", &RunConfig::intent_train);
    ROADSR_KEY("intent.horizon_min", c.intent_horizon_min);
    ROADSR_KEY("intent.horizon_max", c.intent_horizon_max);
    ROADSR_KEY("risk.n_scenes", c.risk.n_scenes);
    ROADSR_KEY("risk.train_scenes", c.risk_train_scenes);
    ROADSR_KEY("risk.distractors_min", c.risk.distractors_min);
    ROADSR_KEY("risk.distractors_max", c.risk.distractors_max);
    ROADSR_KEY("risk.tau_min_s", c.risk.tau_min_s);
    ROADSR_KEY("risk.tau_max_s", c.risk.tau_max_s);
    ROADSR_KEY("risk.conflict_radius_m", c.risk.conflict_radius_m);
    ROADSR_KEY("risk.horizon_s", c.risk.horizon_s);
    ROADSR_KEY("risk.message_noise", c.risk.message_noise);
    ROADSR_KEY("risk.pedestrian_fraction", c.risk.pedestrian_fraction);
    ROADSR_KEY("risk.second_conflict_prob", c.risk.second_conflict_prob);
    ROADSR_KEY("risk.fused_dim", c.risk_fused_dim);
    add_adam(k, "risk", &RunConfig::risk_train);
    ROADSR_KEY("split.train", c.split_train);
    ROADSR_KEY("split.val", c.split_val);
    ROADSR_KEY("split.test", c.split_test);
#undef ROADSR_KEY
    return k;
  }();
  return keys;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view v, T& out) {
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

RunConfig::RunConfig() {
  for (TopologyKind kind : kAllTopologyKinds) {
    for (AffordedAction a : kAllActions) count(kind, a) = 8;
  }
  for (TopologyKind kind : kAllTopologyKinds) {
    const RoadTopology t = build_topology(kind, topology);
    for (AffordedAction a : kAllActions) {
      if (!t.affords(a)) count(kind, a) = 0;
    }
  }
  sim.yield_frames = 15;
  srp_train.batch = 8;
  intent_train.batch = 8;
  risk_train.weight_decay = 1e-4;
  risk_train.epochs = 20;
  risk_train.batch = 8;
}

int RunConfig::total_episodes() const {
  int n = 0;
  for (const auto& row : mix) {
    for (int c : row) n += c;
  }
  return n;
}

void RunConfig::validate() const {
  for (const auto& row : mix) {
    for (int c : row) {
      if (c < 0) throw ContractError("mix counts must be >= 0");
    }
  }
  if (!(no_crosswalk_fraction >= 0.0 && no_crosswalk_fraction <= 1.0)) {
    throw ContractError("mix.no_crosswalk_fraction not in [0,1]");
  }
  if (!(interactive_fraction >= 0.0 && interactive_fraction <= 1.0)) {
    throw ContractError("mix.interactive_fraction not in [0,1]");
  }
  topology.validate();
  sim.validate();
  coherence.validate();
  if (!(labeler.ego_half_length > 0.0)) throw ContractError("labeler.ego_half_length must be positive");
  if (labeler.min_component_cells < 1) throw ContractError("labeler.min_component_cells must be positive");
  srp.validate();
  if (srp.feature_dim != static_cast<int>(FanGeometry::kFeatureDim)) {
    throw ContractError("srp.feature_dim must match the sampling fan");
  }
  if (window_stride < 1) throw ContractError("srp.window_stride must be positive");
  for (const AdamHyper* h : {&srp_train, &intent_train, &risk_train}) {
    if (!(h->lr > 0.0) || !(h->weight_decay >= 0.0) || h->epochs < 0 || h->batch < 1) {
      throw ContractError("optimizer settings need lr > 0, weight_decay >= 0, epochs >= 0, batch >= 1");
    }
  }
  if (intent_horizon_min < 1 || intent_horizon_max < intent_horizon_min) {
    throw ContractError("intent horizons need 1 <= horizon_min <= horizon_max");
  }
  if (risk.n_scenes < 1 || risk_train_scenes < 1) throw ContractError("risk scene counts must be positive");
  if (risk.distractors_min < 0 || risk.distractors_max < risk.distractors_min) {
    throw ContractError("risk distractor range is invalid");
  }
  if (!(risk.tau_min_s > 0.0) || !(risk.tau_max_s >= risk.tau_min_s) || !(risk.horizon_s >= risk.tau_max_s)) {
    throw ContractError("risk times need 0 < tau_min <= tau_max <= horizon");
  }
  if (!(risk.conflict_radius_m > 0.0) || !(risk.message_noise >= 0.0)) {
    throw ContractError("risk radius must be positive and noise non-negative");
  }
  if (!(risk.pedestrian_fraction >= 0.0 && risk.pedestrian_fraction <= 1.0) ||
      !(risk.second_conflict_prob >= 0.0 && risk.second_conflict_prob <= 1.0)) {
    throw ContractError("risk probabilities must lie in [0,1]");
  }
  if (risk_fused_dim < 1) throw ContractError("risk.fused_dim must be positive");
  for (double r : {split_train, split_val, split_test}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ContractError("split ratios must lie in [0,1]");
  }
  if (std::abs(split_train + split_val + split_test - 1.0) > 1e-9) {
    throw ContractError("split ratios must sum to 1");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ContractError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Key* found = nullptr;
    for (const auto& k : key_table()) {
      if (k.name == key) found = &k;
    }
    if (!found) throw ContractError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ContractError(where + "repeated key '" + key + "'");
    const bool ok = std::visit([&](auto* p) { return parse_number(value, *p); }, found->slot(c));
    if (!ok) throw ContractError(where + "bad value for '" + key + "'");
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_text(const RunConfig& c) {
  RunConfig copy = c;
  std::string out;
  for (const auto& k : key_table()) {
    out += k.name;
    out += " = ";
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            out += format_double(*p);
          } else {
            out += std::to_string(*p);
          }
        },
        k.slot(copy));
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(c))));
  return buf;
}

}  // namespace roadsr
