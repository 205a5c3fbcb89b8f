// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "roadsr/checkpoint.hpp"
#include "roadsr/config.hpp"
#include "roadsr/dataset.hpp"
#include "roadsr/pipeline.hpp"
#include "unit/generators.hpp"

using namespace roadsr;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and frozen regression values.
constexpr double kGeometryBudgetS = 10.0;
constexpr double kCleanBudgetS = 60.0;
constexpr double kNumericsBudgetS = 120.0;
constexpr double kLearningBudgetS = 600.0;
constexpr double kGoldenNoisyAccuracy = 0.983537;  // mean over the 200-episode noise suite
constexpr double kNoisyAccuracyTol = 0.005;
constexpr double kFlipMonotonicityTol = 0.02;
constexpr double kHighFlipRate = 0.35;
constexpr double kUniformLossTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kTopologyAccuracyMin = 0.95;
constexpr double kGoldenCurrentMicro = 0.9198;  // current-region micro precision, default config
constexpr double kFutureMarginMin = 0.10;
constexpr double kGoldenRiskRate = 0.88;  // fused identification rate, default config
constexpr double kRiskRateFloor = 0.80;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- 1 ----

SemanticClass enumerated_winner(const VoteCounts& v) {
  std::uint32_t best = 0;
  for (auto c : v) best = std::max(best, c);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == best) return class_from_id(static_cast<int>(i));
  }
  return SemanticClass::Unknown;
}

Outcome geometry_suite() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  std::uniform_int_distribution<int> nv(3, 12);
  int compared = 0, disagree = 0;
  while (compared < 20000) {
    const auto ring = compared % 2 ? testgen::star_ring(rng, nv(rng), 0.0, 0.0, 2.0, 10.0)
                                   : testgen::convex_ring(rng, nv(rng), 0.0, 0.0, 8.0);
    if (!(signed_area(ring) > 0.0) || !is_simple(ring)) continue;
    const Polygon poly(ring);
    for (int k = 0; k < 10; ++k) {
      const Vec2 p{u(rng), u(rng)};
      if (testgen::boundary_distance(p, ring) < 1e-9) continue;
      if (point_in_polygon(p, poly) != (testgen::winding_number(p, ring) != 0)) ++disagree;
      ++compared;
    }
  }
  o.require(disagree == 0, "point_in_polygon disagreements " + std::to_string(disagree));

  int multisets = 0, wrong = 0;
  const int k = static_cast<int>(kSemanticClassCount);
  for (int mask = 1; mask < (1 << k); ++mask) {
    std::vector<int> classes;
    for (int i = 0; i < k; ++i) {
      if (mask & (1 << i)) classes.push_back(i);
    }
    if (classes.size() > 3) continue;
    std::vector<int> counts(classes.size(), 1);
    while (true) {
      VoteCounts v{};
      for (std::size_t i = 0; i < classes.size(); ++i) {
        v[static_cast<std::size_t>(classes[i])] = static_cast<std::uint32_t>(counts[i]);
      }
      if (winner_take_all(v) != enumerated_winner(v)) ++wrong;
      ++multisets;
      std::size_t j = 0;
      while (j < counts.size() && counts[j] == 5) counts[j++] = 1;
      if (j == counts.size()) break;
      ++counts[j];
    }
  }
  o.require(wrong == 0, "winner_take_all mismatches " + std::to_string(wrong));
  const double s = seconds_since(t0);
  o.require(s < kGeometryBudgetS, "runtime");
  o.note(std::to_string(compared) + " pip cases, " + std::to_string(multisets) + " vote multisets, " + fmt(s, 2) +
         " s");
  return o;
}

// ---- 2 ----

Outcome clean_exactness() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int episodes = 0;
  double min_fallback = 1.0;
  for (TopologyKind kind : kAllTopologyKinds) {
    if (!is_intersection(kind)) continue;
    TopologyParams with;
    with.crosswalk_width = 3.0;
    TopologyParams without = with;
    without.crosswalk_width = 0.0;
    const RoadTopology t = build_topology(kind, with);
    const RoadTopology bare = build_topology(kind, without);
    int per_kind = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const AffordedAction a = t.afforded[seed % t.afforded.size()];
      std::vector<SemanticRegion> expected;
      for (const auto& rp : t.partition(a)) expected.push_back(rp.region);
      const std::vector<SemanticRegion> fallback = {expected[0], expected[2], expected[4]};
      SimConfig cfg = SimConfig{}.noiseless();
      cfg.seed = seed;

      const Episode ep = make_episode(t, a, cfg);
      const auto res = label_episode(ep, CoherenceParams{}, LabelerParams{});
      const std::string tag = std::string(to_string(kind)) + "/" + std::string(to_string(a)) + "/" + std::to_string(seed);
      o.require(res.accepted && labeling_accuracy(res, ep.gt_regions) == 1.0, "accuracy " + tag);
      o.require(expected.size() == 5 && run_sequence(res.labels) == expected, "sequence " + tag);

      const Episode eb = make_episode(bare, a, cfg);
      const auto rb = label_episode(eb, CoherenceParams{}, LabelerParams{});
      o.require(rb.accepted && run_sequence(rb.labels) == fallback, "fallback " + tag);
      if (rb.accepted) min_fallback = std::min(min_fallback, labeling_accuracy(rb, eb.gt_regions));
      ++per_kind;
      episodes += 2;
    }
    o.require(per_kind >= 50, "episode count");
  }
  const double s = seconds_since(t0);
  o.require(s < kCleanBudgetS, "runtime");
  o.note(std::to_string(episodes) + " episodes, min no-crosswalk accuracy " + fmt(min_fallback) + ", " + fmt(s, 2) +
         " s");
  return o;
}

// ---- 3 ----

/// Mean per-episode accuracy over the accepted episodes of the 200-episode suite.
double noisy_suite_accuracy(double flip_rate, int* accepted) {
  std::vector<std::pair<TopologyKind, AffordedAction>> pairs;
  std::vector<RoadTopology> topologies;
  for (TopologyKind kind : kAllTopologyKinds) topologies.push_back(build_topology(kind, TopologyParams{}));
  for (std::size_t k = 0; k < topologies.size(); ++k) {
    for (AffordedAction a : topologies[k].afforded) pairs.emplace_back(kAllTopologyKinds[k], a);
  }
  double sum = 0.0;
  *accepted = 0;
  for (int i = 0; i < 200; ++i) {
    const auto [kind, a] = pairs[static_cast<std::size_t>(i) % pairs.size()];
    SimConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(i);
    cfg.label_flip_rate = flip_rate;
    const Episode ep = make_episode(topologies[static_cast<std::size_t>(kind)], a, cfg);
    const auto res = label_episode(ep, CoherenceParams{}, LabelerParams{});
    if (!res.accepted) continue;
    sum += labeling_accuracy(res, ep.gt_regions);
    ++*accepted;
  }
  return *accepted ? sum / *accepted : 0.0;
}

Outcome noise_regression() {
  Outcome o;
  int acc_default = 0, acc_high = 0;
  const double base = noisy_suite_accuracy(SimConfig{}.label_flip_rate, &acc_default);
  const double high = noisy_suite_accuracy(kHighFlipRate, &acc_high);
  o.require(std::abs(base - kGoldenNoisyAccuracy) <= kNoisyAccuracyTol, "golden accuracy " + fmt(kGoldenNoisyAccuracy, 6));
  o.require(high <= base + kFlipMonotonicityTol, "flip monotonicity");
  o.note("mean accuracy " + fmt(base, 6) + " (" + std::to_string(acc_default) + "/200 accepted), flip " +
         fmt(kHighFlipRate, 2) + " -> " + fmt(high, 6));
  return o;
}

// ---- 4 ----

Window random_window(const SrpConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Window w;
  for (int t = 0; t < cfg.t_e; ++t) {
    VectorXd x(cfg.feature_dim);
    for (int i = 0; i < cfg.feature_dim; ++i) x(i) = u(rng);
    w.push_back(x);
  }
  return w;
}

TrainingTarget random_target(const SrpConfig& cfg, std::mt19937_64& rng) {
  const int o = static_cast<int>(rng() % 2);
  std::uniform_int_distribution<int> reg(-1, SrpConfig::regions(o) - 1);
  TrainingTarget t;
  t.topology.assign(static_cast<std::size_t>(cfg.t_e), o);
  for (int i = 0; i < cfg.t_e; ++i) t.current.push_back(reg(rng));
  for (int m = 0; m < cfg.t_d; ++m) t.future.push_back(reg(rng));
  return t;
}

Outcome loss_numerics() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  SrpConfig cfg;
  cfg.feature_dim = 10;
  cfg.hidden_dim = 8;
  cfg.logit_embed_dim = 4;
  std::mt19937_64 rng(44);

  SrpConfig one = cfg;
  one.t_e = 1;
  one.t_d = 1;
  const SrpOutputs zero = forward(SrpParams::zeros(one), one, random_window(one, rng));
  auto constant = [&](int topo, int region) {
    TrainingTarget t;
    t.topology = {topo};
    t.current = {region};
    t.future = {region};
    return t;
  };
  const LossBreakdown li = srp_loss(zero, constant(1, 0), one);
  const LossBreakdown ln = srp_loss(zero, constant(0, 0), one);
  o.require(std::abs(li.topology - std::log(2.0)) < kUniformLossTol, "ln 2");
  o.require(std::abs(li.encoder_region - std::log(13.0)) < kUniformLossTol, "ln 13");
  o.require(std::abs(ln.encoder_region - std::log(5.0)) < kUniformLossTol, "ln 5");

  std::normal_distribution<double> n01(0.0, 3.0);
  int gating_violations = 0;
  for (int draw = 0; draw < 50; ++draw) {
    const SrpParams p = SrpParams::random(cfg, static_cast<std::uint64_t>(draw));
    const TrainingTarget tg = random_target(cfg, rng);
    SrpOutputs out = forward(p, cfg, random_window(cfg, rng));
    const double before = srp_loss(out, tg, cfg).total;
    const int other = 1 - tg.topology.back();
    for (auto& y : out.y_e[other]) y = y.unaryExpr([&](double) { return n01(rng); });
    for (auto& y : out.y_d[other]) y = y.unaryExpr([&](double) { return n01(rng); });
    if (srp_loss(out, tg, cfg).total != before) ++gating_violations;
  }
  o.require(gating_violations == 0, "gating invariance");

  const double h = 1e-4;
  double worst = 0.0;
  const int draws = 20;
  for (int draw = 0; draw < draws; ++draw) {
    SrpParams p = SrpParams::random(cfg, 500 + static_cast<std::uint64_t>(draw));
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto& e : p.tensors()) {
      if (e.is_bias) e.tensor->array() = e.tensor->array().unaryExpr([&](double) { return u(rng); });
    }
    const Window w = random_window(cfg, rng);
    const TrainingTarget tg = random_target(cfg, rng);
    SrpParams g = backward(p, cfg, w, tg);
    auto pt = p.tensors();
    auto gt = g.tensors();
    for (std::size_t k = 0; k < pt.size(); ++k) {
      MatrixXd& m = *pt[k].tensor;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double orig = m.data()[i];
        m.data()[i] = orig + h;
        const double lp = srp_loss(forward(p, cfg, w), tg, cfg).total;
        m.data()[i] = orig - h;
        const double lm = srp_loss(forward(p, cfg, w), tg, cfg).total;
        m.data()[i] = orig;
        const double numeric = (lp - lm) / (2 * h);
        const double analytic = gt[k].tensor->data()[i];
        worst = std::max(worst, std::abs(analytic - numeric) /
                                    std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
      }
    }
  }
  o.require(worst < kGradRelTol, "gradient check");
  const double s = seconds_since(t0);
  o.require(s < kNumericsBudgetS, "runtime");
  o.note("max rel grad error " + std::to_string(worst) + " over " + std::to_string(draws) + " draws, " + fmt(s, 2) +
         " s");
  return o;
}

// ---- 5, 6, 7 share one default-config run ----

struct DefaultRun {
  Dataset dataset;
  SrpParams srp;
  double train_seconds = 0.0;
};

const DefaultRun& default_run() {
  static const DefaultRun run = [] {
    DefaultRun r;
    const auto t0 = std::chrono::steady_clock::now();
    r.dataset = build_dataset(RunConfig{});
    AdamHyper hy = r.dataset.config.srp_train;
    hy.seed = r.dataset.config.seed;
    r.srp = train(srp_training_samples(r.dataset), r.dataset.config.srp, hy).params;
    r.train_seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome desk_learning() {
  Outcome o;
  const DefaultRun& run = default_run();
  const auto t0 = std::chrono::steady_clock::now();
  const SrpEvaluation ev = evaluate_srp(run.srp, run.dataset);
  const double s = run.train_seconds + seconds_since(t0);
  o.require(ev.topology_accuracy >= kTopologyAccuracyMin, "topology accuracy");
  o.require(ev.current.micro_avg_precision >= kGoldenCurrentMicro, "current micro vs " + fmt(kGoldenCurrentMicro, 6));
  o.require(ev.future.map >= ev.future_majority_map + kFutureMarginMin, "future margin");
  o.require(s < kLearningBudgetS, "runtime");
  o.note("topology " + fmt(ev.topology_accuracy) + ", current micro " + fmt(ev.current.micro_avg_precision, 6) +
         ", future mAP " + fmt(ev.future.map) + " vs majority " + fmt(ev.future_majority_map) + ", " + fmt(s, 1) +
         " s");
  return o;
}

std::string srp_bytes(const SrpParams& p, const SrpConfig& cfg) {
  TensorArchive a;
  a.meta["kind"] = "srp";
  put_srp(a, p, cfg);
  std::ostringstream os;
  write_archive(a, os);
  return os.str();
}

Outcome intention_head() {
  Outcome o;
  const DefaultRun& run = default_run();
  const std::string before = srp_bytes(run.srp, run.dataset.config.srp);
  const IntentModels m = train_intent_models(run.srp, run.dataset);
  o.require(srp_bytes(run.srp, run.dataset.config.srp) == before, "checkpoint bytes changed");
  const auto j = evaluate_intent(run.srp, m, run.dataset);
  const double srp = j["all"]["srp"]["macro_avg_precision"].get<double>();
  const double abl = j["all"]["ablation"]["macro_avg_precision"].get<double>();
  o.require(srp > abl, "srp head > ablation");
  o.note("macro precision srp " + fmt(srp) + " vs ablation " + fmt(abl));
  return o;
}

Outcome risk_intervention() {
  Outcome o;
  const DefaultRun& run = default_run();
  const RiskEvaluation ev = evaluate_risk(run.srp, run.dataset);
  o.require(ev.gt.size() == 100, "suite size");
  o.require(ev.fused.identification_rate >= kGoldenRiskRate, "rate vs frozen " + fmt(kGoldenRiskRate));
  o.require(ev.fused.identification_rate >= kRiskRateFloor, "rate floor");
  o.require(ev.fused.identification_rate >= ev.plain.identification_rate, "fused >= plain");
  const Box a{{0, 0}, {2, 1}};
  const Box far{{5, 5}, {6, 6}};
  o.require(box_iou(a, a) == 1.0 && box_iou(a, far) == 0.0, "IoU trivial cases");
  const BoxMetrics same = risk_box_metrics({a, far}, {a, far});
  const BoxMetrics none = risk_box_metrics({a, far}, {far, a});
  o.require(same.acc50 == 1.0 && same.acc75 == 1.0 && same.mean_acc == 1.0, "IoU identity metrics");
  o.require(none.acc50 == 0.0 && none.acc75 == 0.0 && none.mean_acc == 0.0, "IoU disjoint metrics");
  o.note("fused " + fmt(ev.fused.identification_rate) + " vs plain " + fmt(ev.plain.identification_rate) + " on " +
         std::to_string(ev.gt.size()) + " scenes");
  return o;
}

// ---- 8 ----

RunConfig small_run_config() {
  RunConfig c;
  for (auto& row : c.mix) row.fill(0);
  c.seed = 9;
  c.count(TopologyKind::FourWay, AffordedAction::LeftTurn) = 3;
  c.count(TopologyKind::FourWay, AffordedAction::RightTurn) = 3;
  c.count(TopologyKind::ThreeWayLeftStraight, AffordedAction::Straight) = 3;
  c.count(TopologyKind::StraightMultiLane, AffordedAction::Straight) = 3;
  c.count(TopologyKind::StraightMultiLane, AffordedAction::RightLaneChange) = 3;
  c.interactive_fraction = 0.5;
  c.srp.hidden_dim = 8;
  c.srp.logit_embed_dim = 4;
  c.srp_train.epochs = 1;
  c.intent_train.epochs = 2;
  c.risk.n_scenes = 10;
  c.risk_train_scenes = 20;
  c.risk_train.epochs = 2;
  c.risk_fused_dim = 10;
  return c;
}

void run_all_commands(const RunConfig& cfg, const fs::path& dir) {
  CommandInputs in;
  in.out_dir = dir.string();
  cmd_gen(cfg, in);
  in.dataset = (dir / "dataset.jsonl").string();
  in.expected = &cfg;
  cmd_eval_labeler(in);
  cmd_train_srp(in);
  in.checkpoint = (dir / "srp.ckpt").string();
  cmd_eval_srp(in);
  cmd_train_intent(in);
  in.intent_checkpoint = (dir / "intent.ckpt").string();
  cmd_eval_intent(in);
  cmd_risk(in);
  cmd_export_bev(cfg, in);
}

Outcome determinism_and_persistence() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("roadsr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const RunConfig cfg = small_run_config();
  run_all_commands(cfg, root / "a");
  run_all_commands(cfg, root / "b");
  int files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    if (read_bytes(e.path()) != read_bytes(root / "b" / rel)) ++differing;
    ++files;
  }
  o.require(differing == 0, std::to_string(differing) + " output files differ between runs");

  const std::string ds = read_bytes(root / "a" / "dataset.jsonl");
  std::istringstream dsin(ds);
  std::ostringstream dsout;
  write_dataset(read_dataset(dsin), dsout);
  o.require(dsout.str() == ds, "dataset round trip");
  for (const char* ck : {"srp.ckpt", "intent.ckpt"}) {
    const std::string bytes = read_bytes(root / "a" / ck);
    std::istringstream in(bytes);
    std::ostringstream out;
    write_archive(read_archive(in), out);
    o.require(out.str() == bytes, std::string("checkpoint round trip ") + ck);
  }

  const char* golden_env = std::getenv("ROADSR_GOLDEN_DIR");
  if (golden_env == nullptr) {
    o.require(false, "ROADSR_GOLDEN_DIR not set");
  } else {
    const fs::path golden = golden_env;
    export_bev(load_config((golden / "bev.cfg").string()), (root / "golden").string());
    int matched = 0;
    for (TopologyKind k : kAllTopologyKinds) {
      const std::string name = "bev_" + std::string(to_string(k)) + ".pgm";
      const bool same = fs::exists(golden / name) && read_bytes(root / "golden" / name) == read_bytes(golden / name);
      o.require(same, "golden " + name);
      matched += same;
    }
    o.note(std::to_string(matched) + " golden PGMs match");
  }
  fs::remove_all(root);
  o.note(std::to_string(files) + " files compared across two runs of every command");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"geometry oracle suite", geometry_suite},
      {"clean-pipeline exactness", clean_exactness},
      {"noise-robustness regression", noise_regression},
      {"loss numerics", loss_numerics},
      {"desk-scale learning", desk_learning},
      {"intention head", intention_head},
      {"risk intervention", risk_intervention},
      {"determinism and persistence", determinism_and_persistence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
