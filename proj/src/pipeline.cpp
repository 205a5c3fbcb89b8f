#include "roadsr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace roadsr {

namespace fs = std::filesystem;

namespace {

std::uint64_t episode_seed(std::uint64_t global, std::int64_t id) {
  return splitmix64(global + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(id + 1));
}

std::vector<std::string> action_names() {
  std::vector<std::string> names;
  for (AffordedAction a : kAllActions) names.emplace_back(to_string(a));
  return names;
}

/// Combined-vocabulary scores: the selected classifier's softmax, zeros elsewhere.
std::vector<double> gated_scores(const VectorXd& logits, int topology_class) {
  std::vector<double> s(kCombinedRegions, 0.0);
  const VectorXd p = softmax(logits);
  const int offset = topology_class == 1 ? 0 : static_cast<int>(kIntersectionRegionCount);
  for (Eigen::Index i = 0; i < p.size(); ++i) s[static_cast<std::size_t>(offset + i)] = p(i);
  return s;
}

Window window_ending_at(const std::vector<FrameFeature>& features, std::size_t t, int t_e) {
  Window w;
  for (long k = static_cast<long>(t) - t_e + 1; k <= static_cast<long>(t); ++k) {
    const auto& f = features[static_cast<std::size_t>(std::max(0L, k))].flatten();
    w.push_back(Eigen::Map<const VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())));
  }
  return w;
}

struct Egos {
  std::vector<Episode> episodes;
};

Egos egos_of(const Dataset& d, Split split) {
  Egos out;
  for (const auto& r : d.episodes) {
    if (r.split != split) continue;
    const EpisodeSpec s = spec_of(r);
    Episode e;
    e.topology = spec_topology(d.config, s);
    e.action = r.action;
    e.ideal_poses = ideal_trajectory(e.topology, r.action, spec_sim(d.config, s));
    if (e.ideal_poses.size() != r.frames.size()) throw FormatError("dataset episode does not match its config");
    for (const auto& f : r.frames) {
      e.features.push_back(FrameFeature::unflatten(f.feature));
      e.poses.push_back(f.pose);
    }
    e.interactive = r.interactive;
    out.episodes.push_back(std::move(e));
  }
  if (out.episodes.empty()) throw ContractError(std::string("no ") + std::string(to_string(split)) + " episodes");
  return out;
}

std::vector<VectorXd> scene_hidden(const SrpParams& p, const SrpConfig& cfg, const Egos& egos,
                                   const std::vector<RiskScene>& scenes) {
  std::vector<VectorXd> hs;
  for (const auto& s : scenes) {
    hs.push_back(forward(p, cfg, window_ending_at(egos.episodes[s.episode].features, s.frame, cfg.t_e)).accumulator());
  }
  return hs;
}

RiskVariantResult run_variant(const BehaviorModel& m, const std::vector<RiskScene>& suite,
                              const std::vector<VectorXd>& hidden) {
  RiskVariantResult r;
  std::vector<Box> pred, gt;
  std::size_t hits = 0;
  const BehaviorFn fn = m.fn();
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const RiskResult res = risk_identify(suite[i], hidden[i], m.fusion, fn);
    r.picked.push_back(res.index);
    r.scores.push_back(res.scores);
    if (res.index == suite[i].gt_risk_index) ++hits;
    pred.push_back(suite[i].boxes[static_cast<std::size_t>(res.index)]);
    gt.push_back(suite[i].boxes[static_cast<std::size_t>(suite[i].gt_risk_index)]);
  }
  r.identification_rate = static_cast<double>(hits) / static_cast<double>(suite.size());
  r.boxes = risk_box_metrics(pred, gt);
  return r;
}

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Dataset load_checked(const CommandInputs& in) {
  if (in.dataset.empty()) throw ContractError("--dataset is required");
  Dataset d = load_dataset(in.dataset);
  if (in.expected && config_hash(*in.expected) != d.hash()) {
    throw ContractError("config hash " + config_hash(*in.expected) + " does not match the dataset's " + d.hash());
  }
  return d;
}

TensorArchive load_checkpoint_for(const std::string& path, const Dataset& d, const std::string& kind) {
  if (path.empty()) throw ContractError("a " + kind + " checkpoint path is required");
  TensorArchive a = load_archive(path);
  if (a.meta.value("kind", "") != kind) throw ContractError(path + " is not a " + kind + " checkpoint");
  if (a.meta.value("config_hash", "") != d.hash()) {
    throw ContractError("checkpoint config hash " + a.meta.value("config_hash", std::string("?")) +
                        " does not match the dataset's " + d.hash() + "; refusing to evaluate");
  }
  return a;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json box_json(const BoxMetrics& b) {
  return {{"acc50", b.acc50}, {"acc75", b.acc75}, {"mean_acc", b.mean_acc}};
}

}  // namespace

std::vector<EpisodeSpec> plan_episodes(const RunConfig& cfg) {
  cfg.validate();
  std::vector<EpisodeSpec> out;
  std::int64_t next_id = 0;
  std::uint64_t group = 0;
  for (TopologyKind kind : kAllTopologyKinds) {
    const RoadTopology probe = build_topology(kind, cfg.topology);
    for (AffordedAction a : kAllActions) {
      ++group;
      const int n = cfg.count(kind, a);
      if (n == 0) continue;
      if (!probe.affords(a)) {
        throw UnaffordableActionError(std::string(to_string(a)) + " is not afforded by " +
                                      std::string(to_string(kind)) + " with " +
                                      std::to_string(cfg.topology.lanes_per_direction) + " lane(s) per direction");
      }
      std::vector<int> rank(static_cast<std::size_t>(n));
      std::iota(rank.begin(), rank.end(), 0);
      auto rng = make_rng(cfg.seed ^ group, 51);
      std::shuffle(rank.begin(), rank.end(), rng);
      const long n_train = std::min<long>(n, std::lround(n * cfg.split_train));
      const long n_val = std::min<long>(n - n_train, std::lround(n * cfg.split_val));
      for (int i = 0; i < n; ++i) {
        EpisodeSpec s;
        s.id = next_id++;
        s.kind = kind;
        s.action = a;
        s.seed = episode_seed(cfg.seed, s.id);
        const int r = rank[static_cast<std::size_t>(i)];
        s.split = r < n_train ? Split::Train : (r < n_train + n_val ? Split::Val : Split::Test);
        auto draw = make_rng(s.seed, 52);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double u_cw = u01(draw), u_int = u01(draw);
        if (is_intersection(kind)) {
          s.crosswalks = !(u_cw < cfg.no_crosswalk_fraction) && cfg.topology.crosswalk_width > 0.0;
          s.interactive = u_int < cfg.interactive_fraction;
        } else {
          s.crosswalks = cfg.topology.crosswalk_width > 0.0;
        }
        out.push_back(s);
      }
    }
  }
  return out;
}

EpisodeSpec spec_of(const EpisodeRecord& r) {
  return {r.id, r.kind, r.action, r.crosswalks, r.interactive, r.split, r.seed};
}

RoadTopology spec_topology(const RunConfig& cfg, const EpisodeSpec& s) {
  TopologyParams tp = cfg.topology;
  tp.seed = s.seed;
  if (!s.crosswalks) tp.crosswalk_width = 0.0;
  return build_topology(s.kind, tp);
}

SimConfig spec_sim(const RunConfig& cfg, const EpisodeSpec& s) {
  SimConfig sim = cfg.sim;
  sim.seed = s.seed;
  sim.yield_frames = s.interactive ? cfg.sim.yield_frames : 0;
  return sim;
}

EpisodeRecord record_episode(const RunConfig& cfg, const EpisodeSpec& s) {
  const Episode ep = make_episode(spec_topology(cfg, s), s.action, spec_sim(cfg, s));
  const LabelingResult lr = label_episode(ep, cfg.coherence, cfg.labeler);
  EpisodeRecord r;
  r.id = s.id;
  r.kind = s.kind;
  r.action = s.action;
  r.crosswalks = s.crosswalks;
  r.interactive = s.interactive;
  r.split = s.split;
  r.seed = s.seed;
  r.topology_class = ep.gt_topology_class;
  r.accepted = lr.accepted;
  r.reject_reason = lr.reject_reason;
  for (std::size_t i = 0; i < ep.size(); ++i) {
    FrameRecord f;
    f.pose = ep.poses[i];
    f.feature = ep.features[i].flatten();
    f.gt_region = ep.gt_regions[i];
    f.labeler_region = lr.accepted ? lr.labels[i] : SemanticRegion::None;
    r.frames.push_back(std::move(f));
  }
  return r;
}

Dataset build_dataset(const RunConfig& cfg, const std::function<void(std::size_t, std::size_t)>& progress) {
  Dataset d;
  d.config = cfg;
  const auto specs = plan_episodes(cfg);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    d.episodes.push_back(record_episode(cfg, specs[i]));
    if (progress) progress(i + 1, specs.size());
  }
  return d;
}

int combined_region_index(SemanticRegion r) {
  if (r == SemanticRegion::None) return -1;
  const int v = vocab_index(r);
  return is_intersection_region(r) ? v : static_cast<int>(kIntersectionRegionCount) + v;
}

std::vector<std::string> combined_region_names() {
  std::vector<std::string> names(kCombinedRegions);
  for (int i = 1; i <= static_cast<int>(SemanticRegion::NTR); ++i) {
    const auto r = static_cast<SemanticRegion>(i);
    names[static_cast<std::size_t>(combined_region_index(r))] = std::string(to_string(r));
  }
  return names;
}

ordered_json labeler_report(const Dataset& d) {
  std::size_t accepted = 0, total = 0, correct = 0;
  std::map<SemanticRegion, std::pair<std::size_t, std::size_t>> per_region;
  std::map<RejectReason, std::size_t> reasons{{RejectReason::ReconstructionFailure, 0},
                                              {RejectReason::IncoherentTrajectory, 0},
                                              {RejectReason::CrosswalkCountMismatch, 0}};
  double episode_acc_sum = 0.0;
  for (const auto& ep : d.episodes) {
    if (!ep.accepted) {
      if (ep.reject_reason) ++reasons[*ep.reject_reason];
      continue;
    }
    ++accepted;
    std::size_t ep_total = 0, ep_correct = 0;
    for (const auto& f : ep.frames) {
      if (f.gt_region == SemanticRegion::None) continue;
      ++ep_total;
      auto& pr = per_region[f.gt_region];
      ++pr.second;
      if (f.labeler_region == f.gt_region) {
        ++ep_correct;
        ++pr.first;
      }
    }
    total += ep_total;
    correct += ep_correct;
    episode_acc_sum += ep_total ? static_cast<double>(ep_correct) / static_cast<double>(ep_total) : 0.0;
  }
  ordered_json per = ordered_json::object();
  for (const auto& [r, c] : per_region) {
    per[std::string(to_string(r))] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  ordered_json rj = ordered_json::object();
  for (const auto& [r, n] : reasons) rj[std::string(to_string(r))] = n;
  const std::size_t n_eps = d.episodes.size();
  return {{"config_hash", d.hash()},
          {"episodes", n_eps},
          {"accepted", accepted},
          {"acceptance_rate", n_eps ? static_cast<double>(accepted) / static_cast<double>(n_eps) : 0.0},
          {"reject_reasons", rj},
          {"frames_evaluated", total},
          {"no_accepted_frames", total == 0},
          {"accuracy", total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0},
          {"mean_episode_accuracy", accepted ? episode_acc_sum / static_cast<double>(accepted) : 0.0},
          {"per_region_accuracy", per}};
}

std::vector<TrainSample> srp_training_samples(const Dataset& d, Split split) {
  std::vector<TrainSample> out;
  for (const auto& ep : d.episodes) {
    if (ep.split != split || !ep.accepted) continue;
    for (auto& w : extract_windows(ep, d.config.srp, d.config.window_stride, LabelSource::Labeler)) {
      out.push_back(std::move(w.sample));
    }
  }
  return out;
}

SrpEvaluation evaluate_srp(const SrpParams& p, const Dataset& d, Split split) {
  const SrpConfig& cfg = d.config.srp;
  SrpEvaluation ev;
  std::vector<PredictionRecord> cur, fut;
  std::size_t topo_hits = 0;
  std::vector<double> prior(kCombinedRegions, 0.0);
  for (const auto& ep : d.episodes) {
    if (ep.split != Split::Train || !ep.accepted) continue;
    for (const auto& w : extract_windows(ep, cfg, d.config.window_stride, LabelSource::Labeler)) {
      for (SemanticRegion r : w.future) {
        if (r != SemanticRegion::None) prior[static_cast<std::size_t>(combined_region_index(r))] += 1.0;
      }
    }
  }
  std::vector<PredictionRecord> baseline;
  for (const auto& ep : d.episodes) {
    if (ep.split != split) continue;
    for (const auto& w : extract_windows(ep, cfg, d.config.window_stride, LabelSource::GroundTruth)) {
      const SrpOutputs out = forward(p, cfg, w.sample.window);
      const int sel = argmax(out.z.back());
      ++ev.n_windows;
      if (sel == w.topology_class) ++topo_hits;
      const std::int64_t sample = ep.id * 100000 + w.end_frame;
      if (w.current != SemanticRegion::None) {
        cur.push_back(make_record(gated_scores(out.y_e[sel].back(), sel), combined_region_index(w.current), sample,
                                  w.end_frame));
      }
      for (int m = 0; m < cfg.t_d; ++m) {
        const SemanticRegion r = w.future[static_cast<std::size_t>(m)];
        if (r == SemanticRegion::None) continue;
        fut.push_back(make_record(gated_scores(out.y_d[sel][static_cast<std::size_t>(m)], sel),
                                  combined_region_index(r), sample, w.end_frame + m));
        baseline.push_back(make_record(prior, combined_region_index(r), sample, w.end_frame + m));
      }
    }
  }
  if (ev.n_windows == 0) throw ContractError("evaluate_srp: the split has no windows");
  ev.topology_accuracy = static_cast<double>(topo_hits) / static_cast<double>(ev.n_windows);
  ev.current = compute_metrics(cur, kCombinedRegions);
  ev.future = compute_metrics(fut, kCombinedRegions);
  ev.future_majority_map = baseline.empty() ? 0.0 : compute_metrics(baseline, kCombinedRegions).map;
  return ev;
}

ordered_json to_json(const SrpEvaluation& e) {
  const auto names = combined_region_names();
  return {{"windows", e.n_windows},
          {"topology_accuracy", e.topology_accuracy},
          {"current_region", to_json(e.current, names)},
          {"future_region", to_json(e.future, names)},
          {"future_majority_baseline_map", e.future_majority_map}};
}

std::vector<IntentSample> intent_samples(const Dataset& d, Split split) {
  std::vector<std::vector<VectorXd>> features;
  std::vector<std::vector<SemanticRegion>> regions;
  std::vector<AffordedAction> actions;
  std::vector<bool> interactive;
  std::vector<std::int64_t> ids;
  for (const auto& ep : d.episodes) {
    if (ep.split != split) continue;
    std::vector<VectorXd> fs;
    std::vector<SemanticRegion> rs;
    for (const auto& f : ep.frames) {
      fs.push_back(Eigen::Map<const VectorXd>(f.feature.data(), static_cast<Eigen::Index>(f.feature.size())));
      rs.push_back(f.gt_region);
    }
    features.push_back(std::move(fs));
    regions.push_back(std::move(rs));
    actions.push_back(ep.action);
    interactive.push_back(ep.interactive);
    ids.push_back(ep.id);
  }
  auto samples = make_intent_samples(features, regions, actions, interactive, d.config.srp.t_e,
                                     d.config.intent_horizon_min, d.config.intent_horizon_max);
  for (auto& s : samples) s.episode_id = ids[static_cast<std::size_t>(s.episode_id)];
  return samples;
}

IntentModels train_intent_models(const SrpParams& p, const Dataset& d) {
  const auto samples = intent_samples(d, Split::Train);
  if (samples.empty()) throw ContractError("no intent training windows");
  AdamHyper hy = d.config.intent_train;
  hy.seed = d.config.seed;
  return {train_intent(samples, p, d.config.srp, hy), train_intent_ablation(samples, hy)};
}

ordered_json evaluate_intent(const SrpParams& p, const IntentModels& m, const Dataset& d, Split split) {
  const auto samples = intent_samples(d, split);
  if (samples.empty()) throw ContractError("no intent evaluation windows");
  std::vector<PredictionRecord> srp_all, abl_all, srp_int, abl_int;
  for (const auto& s : samples) {
    const int gt = static_cast<int>(s.gt_intention);
    const VectorXd ps = intent_predict(m.srp_head, forward(p, d.config.srp, s.window).accumulator());
    const VectorXd pa = intent_predict(m.ablation_head, window_mean(s.window));
    auto rs = make_record(std::vector<double>(ps.data(), ps.data() + ps.size()), gt, s.episode_id, s.horizon);
    auto ra = make_record(std::vector<double>(pa.data(), pa.data() + pa.size()), gt, s.episode_id, s.horizon);
    if (s.interactive) {
      srp_int.push_back(rs);
      abl_int.push_back(ra);
    }
    srp_all.push_back(std::move(rs));
    abl_all.push_back(std::move(ra));
  }
  const auto names = action_names();
  auto pair_json = [&](const std::vector<PredictionRecord>& a, const std::vector<PredictionRecord>& b) {
    return ordered_json{{"srp", to_json(compute_metrics(a, kIntentClasses), names)},
                        {"ablation", to_json(compute_metrics(b, kIntentClasses), names)}};
  };
  return {{"windows", samples.size()},
          {"interactive_windows", srp_int.size()},
          {"all", pair_json(srp_all, abl_all)},
          {"interactive", srp_int.empty() ? ordered_json(nullptr) : pair_json(srp_int, abl_int)}};
}

RiskEvaluation evaluate_risk(const SrpParams& p, const Dataset& d) {
  const RunConfig& cfg = d.config;
  const double hz = cfg.sim.frame_hz;
  const Egos train_egos = egos_of(d, Split::Train);
  const Egos test_egos = egos_of(d, Split::Test);

  RiskSuiteConfig rc = cfg.risk;
  rc.seed = splitmix64(cfg.seed ^ 0x747261696e000000ull);
  rc.n_scenes = (cfg.risk_train_scenes + 1) / 2;
  std::vector<RiskScene> train = make_risk_suite(train_egos.episodes, rc, true, hz);
  rc.n_scenes = cfg.risk_train_scenes / 2;
  if (rc.n_scenes > 0) {
    for (auto& s : make_risk_suite(train_egos.episodes, rc, false, hz)) train.push_back(std::move(s));
  }
  const auto train_h = scene_hidden(p, cfg.srp, train_egos, train);

  AdamHyper hy = cfg.risk_train;
  hy.seed = cfg.seed;
  const BehaviorModel fused = train_behavior(train, train_h, EgoFusion::random(cfg.risk_fused_dim, cfg.seed), hy);
  const BehaviorModel plain = train_behavior(train, train_h, EgoFusion::plain(), hy);

  rc = cfg.risk;
  rc.seed = splitmix64(cfg.seed ^ 0x7465737400000000ull);
  const auto suite = make_risk_suite(test_egos.episodes, rc, true, hz);
  const auto suite_h = scene_hidden(p, cfg.srp, test_egos, suite);

  RiskEvaluation ev;
  ev.fused = run_variant(fused, suite, suite_h);
  ev.plain = run_variant(plain, suite, suite_h);
  for (const auto& s : suite) ev.gt.push_back(s.gt_risk_index);
  return ev;
}

ordered_json to_json(const RiskEvaluation& e) {
  auto variant = [](const RiskVariantResult& r) {
    return ordered_json{{"identification_rate", r.identification_rate},
                        {"box", box_json(r.boxes)},
                        {"picked", r.picked},
                        {"scores", r.scores}};
  };
  return {{"scenes", e.gt.size()}, {"gt", e.gt}, {"fused", variant(e.fused)}, {"plain", variant(e.plain)}};
}

std::vector<std::string> export_bev(const RunConfig& cfg, const std::string& dir) {
  cfg.validate();
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (TopologyKind kind : kAllTopologyKinds) {
    TopologyParams tp = cfg.topology;
    tp.seed = cfg.seed;
    const RoadTopology t = build_topology(kind, tp);
    SimConfig sim = cfg.sim;
    sim.seed = cfg.seed;
    auto points = sample_point_cloud(t, sim);
    resolve_points(points);
    const BevGrid g = rasterize(points, sim.bev_resolution, t.bounds(), 2.0);
    const std::string stem = "bev_" + std::string(to_string(kind));
    for (const char* ext : {".pgm", ".csv"}) {
      const std::string name = stem + ext;
      std::ofstream os(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
      if (!os) throw IoError("cannot write " + (fs::path(dir) / name).string());
      if (std::string(ext) == ".pgm") {
        write_pgm(g, os);
      } else {
        write_csv(g, os);
      }
      if (!os.flush()) throw IoError("write failed: " + name);
      files.push_back(name);
    }
  }
  return files;
}

OutputLock::OutputLock(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  path_ = (fs::path(dir) / ".roadsr.lock").string();
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    const std::string p = path_;
    path_.clear();
    throw IoError("cannot lock " + dir + " (another run may be using it; remove " + p + " if stale)");
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  if (!path_.empty()) std::remove(path_.c_str());
}

void write_json_file(const ordered_json& j, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << j.dump(2) << '\n';
  if (!os.flush()) throw IoError("write failed: " + path);
}

ordered_json cmd_gen(const RunConfig& cfg, const CommandInputs& in) {
  plan_episodes(cfg);
  OutputLock lock(in.out_dir);
  const Dataset d = build_dataset(cfg);
  save_dataset(d, (fs::path(in.out_dir) / "dataset.jsonl").string());
  const auto bev = export_bev(cfg, (fs::path(in.out_dir) / "bev").string());
  std::size_t frames = 0;
  for (const auto& ep : d.episodes) frames += ep.frames.size();
  ordered_json bev_files = ordered_json::array();
  for (const auto& f : bev) bev_files.push_back("bev/" + f);
  ordered_json j = {{"command", "gen"},
                    {"config_hash", d.hash()},
                    {"episodes", d.episodes.size()},
                    {"frames", frames},
                    {"dataset", "dataset.jsonl"},
                    {"bev", bev_files},
                    {"labeler", labeler_report(d)}};
  write_json_file(j, (fs::path(in.out_dir) / "gen_report.json").string());
  return j;
}

ordered_json cmd_eval_labeler(const CommandInputs& in) {
  const Dataset d = load_checked(in);
  OutputLock lock(in.out_dir);
  ordered_json j = labeler_report(d);
  j["command"] = "eval-labeler";
  write_json_file(j, (fs::path(in.out_dir) / "labeler_report.json").string());
  return j;
}

ordered_json cmd_train_srp(const CommandInputs& in) {
  const Dataset d = load_checked(in);
  OutputLock lock(in.out_dir);
  const auto samples = srp_training_samples(d);
  if (samples.empty()) throw ContractError("no accepted training windows in the dataset");
  AdamHyper hy = d.config.srp_train;
  hy.seed = d.config.seed;
  const TrainResult r = train(samples, d.config.srp, hy);
  TensorArchive a;
  a.meta["kind"] = "srp";
  a.meta["config_hash"] = d.hash();
  a.meta["seed"] = d.config.seed;
  a.meta["epochs"] = hy.epochs;
  put_srp(a, r.params, d.config.srp);
  save_archive(a, (fs::path(in.out_dir) / "srp.ckpt").string());
  const auto val = srp_training_samples(d, Split::Val);
  ordered_json j = {{"command", "train-srp"},
                    {"config_hash", d.hash()},
                    {"checkpoint", "srp.ckpt"},
                    {"train_windows", samples.size()},
                    {"epoch_loss", r.epoch_loss},
                    {"val_loss", val.empty() ? ordered_json(nullptr) : ordered_json(mean_loss(r.params, d.config.srp, val))}};
  write_json_file(j, (fs::path(in.out_dir) / "train_srp_report.json").string());
  return j;
}

ordered_json cmd_eval_srp(const CommandInputs& in) {
  const Dataset d = load_checked(in);
  const SrpParams p = get_srp(load_checkpoint_for(in.checkpoint, d, "srp"));
  OutputLock lock(in.out_dir);
  ordered_json j = {{"command", "eval-srp"}, {"config_hash", d.hash()}};
  j.update(to_json(evaluate_srp(p, d)));
  write_json_file(j, (fs::path(in.out_dir) / "srp_eval.json").string());
  return j;
}

ordered_json cmd_train_intent(const CommandInputs& in) {
  const Dataset d = load_checked(in);
  const std::string before = read_bytes(in.checkpoint);
  const SrpParams p = get_srp(load_checkpoint_for(in.checkpoint, d, "srp"));
  OutputLock lock(in.out_dir);
  const IntentModels m = train_intent_models(p, d);
  if (read_bytes(in.checkpoint) != before) throw std::logic_error("SRP checkpoint changed during intent training");
  TensorArchive a;
  a.meta["kind"] = "intent";
  a.meta["config_hash"] = d.hash();
  a.meta["srp_checksum"] = hex64(p.checksum());
  put_head(a, "intent", m.srp_head);
  put_head(a, "ablation", m.ablation_head);
  save_archive(a, (fs::path(in.out_dir) / "intent.ckpt").string());
  ordered_json j = {{"command", "train-intent"},
                    {"config_hash", d.hash()},
                    {"checkpoint", "intent.ckpt"},
                    {"train_windows", intent_samples(d, Split::Train).size()}};
  write_json_file(j, (fs::path(in.out_dir) / "train_intent_report.json").string());
  return j;
}

ordered_json cmd_eval_intent(const CommandInputs& in) {
  const Dataset d = load_checked(in);
  const SrpParams p = get_srp(load_checkpoint_for(in.checkpoint, d, "srp"));
  const TensorArchive ia = load_checkpoint_for(in.intent_checkpoint, d, "intent");
  if (ia.meta.value("srp_checksum", "") != hex64(p.checksum())) {
    throw ContractError("intent checkpoint was trained on a different SRP checkpoint");
  }
  const IntentModels m{get_head(ia, "intent"), get_head(ia, "ablation")};
  OutputLock lock(in.out_dir);
  ordered_json j = {{"command", "eval-intent"}, {"config_hash", d.hash()}};
  j.update(evaluate_intent(p, m, d));
  write_json_file(j, (fs::path(in.out_dir) / "intent_eval.json").string());
  return j;
}

ordered_json cmd_risk(const CommandInputs& in) {
  const Dataset d = load_checked(in);
  const SrpParams p = get_srp(load_checkpoint_for(in.checkpoint, d, "srp"));
  OutputLock lock(in.out_dir);
  ordered_json j = {{"command", "risk"}, {"config_hash", d.hash()}};
  j.update(to_json(evaluate_risk(p, d)));
  write_json_file(j, (fs::path(in.out_dir) / "risk_report.json").string());
  return j;
}

ordered_json cmd_export_bev(const RunConfig& cfg, const CommandInputs& in) {
  cfg.validate();
  OutputLock lock(in.out_dir);
  const auto files = export_bev(cfg, in.out_dir);
  ordered_json j = {{"command", "export-bev"}, {"config_hash", config_hash(cfg)}, {"files", files}};
  write_json_file(j, (fs::path(in.out_dir) / "export_bev_report.json").string());
  return j;
}

}  // namespace roadsr
