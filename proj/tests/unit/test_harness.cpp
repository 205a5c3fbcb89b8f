#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "roadsr/checkpoint.hpp"
#include "roadsr/config.hpp"
#include "roadsr/dataset.hpp"
#include "roadsr/pipeline.hpp"

using namespace roadsr;
namespace fs = std::filesystem;

namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  REQUIRE_MESSAGE(v != nullptr, name, " is not set");
  return v;
}

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("roadsr_harness_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

/// Runs the CLI from `cwd`; returns the exit status.
int run_cli(const std::string& args, const fs::path& cwd = scratch()) {
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" + env("ROADSR_CLI") + "' " + args + " > cli.log 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string mix_lines(std::initializer_list<std::pair<const char*, int>> nonzero) {
  std::string s;
  for (auto k : kAllTopologyKinds) {
    for (auto a : kAllActions) {
      const std::string key = "mix." + std::string(to_string(k)) + "." + std::string(to_string(a));
      int n = 0;
      for (const auto& [name, count] : nonzero) {
        if (key == std::string("mix.") + name) n = count;
      }
      s += key + " = " + std::to_string(n) + "\n";
    }
  }
  return s;
}

/// Small end-to-end configuration that runs every command in seconds.
std::string small_config() {
  return "# harness config\nseed = 5\n" +
         mix_lines({{"FourWay.LeftTurn", 3},
                    {"FourWay.Straight", 3},
                    {"FourWay.RightTurn", 3},
                    {"StraightMultiLane.Straight", 3},
                    {"StraightMultiLane.LeftLaneChange", 3}}) +
         "mix.interactive_fraction = 0.5\n"
         "srp.hidden_dim = 8\nsrp.logit_embed_dim = 4\ntrain.epochs = 1\nintent.epochs = 2\n"
         "risk.n_scenes = 10\nrisk.train_scenes = 20\nrisk.epochs = 2\nrisk.fused_dim = 10\n";
}

/// gen, train-srp, eval-srp, train-intent, eval-intent, risk into `out`.
void run_pipeline(const std::string& out) {
  REQUIRE(run_cli("gen --config small.cfg --out " + out) == 0);
  const std::string ds = " --dataset " + out + "/dataset.jsonl";
  REQUIRE(run_cli("eval-labeler --out " + out + ds) == 0);
  REQUIRE(run_cli("train-srp --out " + out + ds) == 0);
  const std::string ck = " --checkpoint " + out + "/srp.ckpt";
  REQUIRE(run_cli("eval-srp --out " + out + ds + ck) == 0);
  REQUIRE(run_cli("train-intent --out " + out + ds + ck) == 0);
  REQUIRE(run_cli("eval-intent --out " + out + ds + ck + " --intent-checkpoint " + out + "/intent.ckpt") == 0);
  REQUIRE(run_cli("risk --out " + out + ds + ck) == 0);
}

struct PipelineRuns {
  PipelineRuns() {
    write_text(scratch() / "small.cfg", small_config());
    run_pipeline("run_a");
    run_pipeline("run_b");
  }
};

const PipelineRuns& pipeline_runs() {
  static const PipelineRuns runs;
  return runs;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_bytes(p)); }

}  // namespace

TEST_CASE("config parsing rejects typos and malformed lines") {
  CHECK_THROWS_AS(parse_config("sim.speed_mps = 5\nsim.sped_mps = 4\n"), ContractError);
  CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2\n"), ContractError);
  CHECK_THROWS_AS(parse_config("sim.speed_mps = fast\n"), ContractError);
  CHECK_THROWS_AS(parse_config("sim.speed_mps 5\n"), ContractError);
  CHECK_THROWS_AS(parse_config("split.train = 0.9\n"), ContractError);
  CHECK_THROWS_AS(parse_config("mix.FourWay.LeftTurn = -1\n"), ContractError);
  try {
    parse_config("\n\nbogus.key = 1\n");
    FAIL("expected an error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  const RunConfig c = parse_config("# comment\n  seed = 42  # trailing\n\nsim.speed_mps = 7.25\n");
  CHECK(c.seed == 42);
  CHECK(c.sim.speed_mps == 7.25);
}

TEST_CASE("canonical config text round-trips and drives the hash") {
  RunConfig c = parse_config(small_config());
  c.sim.position_noise_std = 0.1;  // not exactly representable in short decimal form
  const std::string text = canonical_text(c);
  CHECK(canonical_text(parse_config(text)) == text);
  CHECK(config_hash(parse_config(text)) == config_hash(c));
  RunConfig d = c;
  d.seed += 1;
  CHECK(config_hash(d) != config_hash(c));
  CHECK(config_hash(c).size() == 16);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("checkpoint archives round-trip byte for byte") {
  SrpConfig cfg;
  cfg.hidden_dim = 5;
  cfg.logit_embed_dim = 3;
  const SrpParams p = SrpParams::random(cfg, 17);
  TensorArchive a;
  a.meta["kind"] = "srp";
  put_srp(a, p, cfg);
  put_head(a, "intent", SoftmaxHead::zeros(5, 5));
  std::ostringstream first;
  write_archive(a, first);
  std::istringstream in(first.str());
  const TensorArchive b = read_archive(in);
  std::ostringstream second;
  write_archive(b, second);
  CHECK(first.str() == second.str());
  SrpConfig back;
  CHECK(get_srp(b, &back) == p);
  CHECK(back.hidden_dim == 5);
  CHECK(get_head(b, "intent").classes() == 5);

  const std::string bytes = first.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_archive(truncated), FormatError);
  std::istringstream trailing(bytes + "x");
  CHECK_THROWS_AS(read_archive(trailing), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream badmagic(bad);
  CHECK_THROWS_AS(read_archive(badmagic), FormatError);
  std::string future = bytes;
  future[8] = 9;
  std::istringstream badversion(future);
  CHECK_THROWS_AS(read_archive(badversion), FormatError);
  CHECK_THROWS_AS(load_archive((scratch() / "missing.ckpt").string()), IoError);
}

TEST_CASE("every command is bit-reproducible") {
  pipeline_runs();
  for (const char* name : {"dataset.jsonl", "gen_report.json", "labeler_report.json", "srp.ckpt",
                           "train_srp_report.json", "srp_eval.json", "intent.ckpt", "train_intent_report.json",
                           "intent_eval.json", "risk_report.json"}) {
    CHECK_MESSAGE(read_bytes(scratch() / "run_a" / name) == read_bytes(scratch() / "run_b" / name), name);
  }
  for (auto k : kAllTopologyKinds) {
    const std::string pgm = "bev/bev_" + std::string(to_string(k)) + ".pgm";
    CHECK(read_bytes(scratch() / "run_a" / pgm) == read_bytes(scratch() / "run_b" / pgm));
  }
}

TEST_CASE("reports carry the config hash and the expected sections") {
  pipeline_runs();
  const std::string hash = config_hash(parse_config(small_config()));
  const fs::path a = scratch() / "run_a";
  for (const char* name : {"gen_report.json", "labeler_report.json", "train_srp_report.json", "srp_eval.json",
                           "train_intent_report.json", "intent_eval.json", "risk_report.json"}) {
    CHECK_MESSAGE(read_json(a / name).at("config_hash") == hash, name);
  }
  const auto srp = read_json(a / "srp_eval.json");
  CHECK(srp.contains("current_region"));
  CHECK(srp.contains("future_region"));
  CHECK(srp["current_region"].contains("macro_avg_precision"));
  const auto intent = read_json(a / "intent_eval.json");
  CHECK(intent["all"].contains("srp"));
  CHECK(intent["all"].contains("ablation"));
  CHECK(intent.contains("interactive"));
  const auto risk = read_json(a / "risk_report.json");
  CHECK(risk["fused"].contains("identification_rate"));
  CHECK(risk["plain"].contains("identification_rate"));
}

TEST_CASE("evaluation never changes checkpoints and repeats exactly") {
  pipeline_runs();
  const fs::path a = scratch() / "run_a";
  const std::string before = read_bytes(a / "srp.ckpt");
  const std::string report = read_bytes(a / "srp_eval.json");
  REQUIRE(run_cli("eval-srp --out run_a --dataset run_a/dataset.jsonl --checkpoint run_a/srp.ckpt") == 0);
  CHECK(read_bytes(a / "srp.ckpt") == before);
  CHECK(read_bytes(a / "srp_eval.json") == report);
}

TEST_CASE("dataset files round-trip byte for byte") {
  pipeline_runs();
  const fs::path file = scratch() / "run_a" / "dataset.jsonl";
  const std::string bytes = read_bytes(file);
  std::istringstream in(bytes);
  const Dataset d = read_dataset(in);
  std::ostringstream out;
  write_dataset(d, out);
  CHECK(out.str() == bytes);
  CHECK(d.episodes.size() == 15);

  std::string bumped = bytes;
  const auto pos = bumped.find("\"format_version\":1");
  REQUIRE(pos != std::string::npos);
  bumped.replace(pos, 18, "\"format_version\":2");
  std::istringstream bad(bumped);
  CHECK_THROWS_AS(read_dataset(bad), FormatError);
  std::istringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_dataset(cut), FormatError);
}

TEST_CASE("clean four-way left turns label perfectly") {
  write_text(scratch() / "clean.cfg", "seed = 3\n" + mix_lines({{"FourWay.LeftTurn", 10}}) +
                                          "sim.heading_noise_std = 0\nsim.position_noise_std = 0\n"
                                          "sim.pose_dropout_rate = 0\nsim.label_flip_rate = 0\n");
  REQUIRE(run_cli("gen --config clean.cfg --out clean") == 0);
  const auto r = read_json(scratch() / "clean" / "gen_report.json").at("labeler");
  CHECK(r.at("accepted") == 10);
  CHECK(r.at("episodes") == 10);
  CHECK(r.at("accuracy").get<double>() == 1.0);
  const std::string log = read_bytes(scratch() / "cli.log");
  CHECK(log.find("labeler acceptance 10/10") != std::string::npos);
  CHECK(log.find("labeling accuracy 1.000000") != std::string::npos);
}

TEST_CASE("a dataset with every episode rejected still reports") {
  write_text(scratch() / "reject.cfg", "seed = 1\n" + mix_lines({{"FourWay.Straight", 3}}) +
                                           "sim.pose_dropout_rate = 0.5\nlabeler.min_localized_fraction = 1\n");
  REQUIRE(run_cli("gen --config reject.cfg --out reject") == 0);
  REQUIRE(run_cli("eval-labeler --out reject --dataset reject/dataset.jsonl") == 0);
  const auto r = read_json(scratch() / "reject" / "labeler_report.json");
  CHECK(r.at("accepted") == 0);
  CHECK(r.at("no_accepted_frames") == true);
  CHECK(r.at("frames_evaluated") == 0);
}

TEST_CASE("validation errors exit 1") {
  write_text(scratch() / "typo.cfg", "sim.sped_mps = 3\n");
  CHECK(run_cli("gen --config typo.cfg --out typo") == 1);
  write_text(scratch() / "onelane.cfg", "topology.lanes_per_direction = 1\n" +
                                            mix_lines({{"StraightMultiLane.LeftLaneChange", 2}}));
  CHECK(run_cli("gen --config onelane.cfg --out onelane") == 1);
  CHECK(read_bytes(scratch() / "cli.log").find("afford") != std::string::npos);
  CHECK(run_cli("no-such-command") == 1);
  CHECK(run_cli("eval-srp --out x") == 1);  // required flags missing
}

TEST_CASE("mismatched config hash is refused") {
  pipeline_runs();
  CHECK(run_cli("eval-labeler --seed 99 --out run_a --dataset run_a/dataset.jsonl") == 1);
  CHECK(run_cli("eval-labeler --config small.cfg --out run_a --dataset run_a/dataset.jsonl") == 0);
  // A checkpoint trained on another dataset is refused too.
  REQUIRE(run_cli("gen --config clean.cfg --out other") == 0);
  CHECK(run_cli("eval-srp --out other --dataset other/dataset.jsonl --checkpoint run_a/srp.ckpt") == 1);
}

TEST_CASE("I/O errors exit 2 and the lock guards the output directory") {
  CHECK(run_cli("eval-labeler --out io --dataset does/not/exist.jsonl") == 2);
  CHECK(run_cli("export-bev --out /proc/roadsr_cannot_write") == 2);
  fs::create_directories(scratch() / "locked");
  write_text(scratch() / "locked" / ".roadsr.lock", "");
  CHECK(run_cli("export-bev --out locked") == 2);
  CHECK(read_bytes(scratch() / "cli.log").find("lock") != std::string::npos);
  fs::remove(scratch() / "locked" / ".roadsr.lock");
  CHECK(run_cli("export-bev --out locked") == 0);
  CHECK_FALSE(fs::exists(scratch() / "locked" / ".roadsr.lock"));
}

TEST_CASE("commands write only inside their output directory") {
  const fs::path cwd = scratch() / "confined";
  fs::create_directories(cwd);
  write_text(cwd / "small.cfg", small_config());
  REQUIRE(run_cli("gen --config small.cfg --out result", cwd) == 0);
  REQUIRE(run_cli("eval-labeler --out result --dataset result/dataset.jsonl", cwd) == 0);
  std::vector<std::string> entries;
  for (const auto& e : fs::directory_iterator(cwd)) entries.push_back(e.path().filename().string());
  std::sort(entries.begin(), entries.end());
  CHECK(entries == std::vector<std::string>{"cli.log", "result", "small.cfg"});
}

TEST_CASE("golden BEV maps match byte for byte") {
  const fs::path golden = env("ROADSR_GOLDEN_DIR");
  REQUIRE(run_cli("export-bev --config '" + (golden / "bev.cfg").string() + "' --out golden_bev") == 0);
  for (auto k : kAllTopologyKinds) {
    const std::string name = "bev_" + std::string(to_string(k)) + ".pgm";
    CHECK_MESSAGE(read_bytes(scratch() / "golden_bev" / name) == read_bytes(golden / name), name);
  }
}
