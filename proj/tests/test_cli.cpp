// End-to-end checks of the command-line tool: every case shells out to the
// binary named by the SGNET_CLI environment variable and inspects its exit
// code, streams, and artifacts. Library calls appear only to cross-check
// file contents against the in-process pipeline.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgnet/checkpoint.hpp"
#include "sgnet/config.hpp"
#include "sgnet/data.hpp"
#include "sgnet/training.hpp"

namespace fs = std::filesystem;
using namespace sgnet;

namespace {

std::string cli_binary() {
  const char* p = std::getenv("SGNET_CLI");
  REQUIRE_MESSAGE(p != nullptr, "SGNET_CLI must point at the built binary");
  return p;
}

struct RunResult {
  int exit = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(static_cast<bool>(in), "cannot read " << p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  REQUIRE(static_cast<bool>(out));
}

fs::path scratch_root() {
  static fs::path root = [] {
    fs::path r = fs::temp_directory_path() /
                 ("sgnet_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(r);
    fs::create_directories(r);
    return r;
  }();
  return root;
}

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int serial = 0;
  const fs::path out = scratch_root() / ("stdout_" + std::to_string(serial));
  const fs::path err = scratch_root() / ("stderr_" + std::to_string(serial));
  ++serial;
  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += "\"" + cli_binary() + "\" " + args + " >" + out.string() + " 2>" + err.string();
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t at = hay.find(needle); at != std::string::npos;
       at = hay.find(needle, at + needle.size()))
    ++n;
  return n;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != '\n') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::string points_config_text() {
  return "model.input_dim = 2\n"
         "model.output_dim = 2\n"
         "model.enc_hidden = 16\n"
         "model.dec_hidden = 16\n"
         "model.goal_hidden = 8\n"
         "model.latent_dim = 4\n"
         "model.obs_len = 4\n"
         "model.pred_len = 4\n"
         "model.k = 3\n"
         "train.batch = 16\n"
         "train.epochs = 2\n"
         "train.lr = 0.001\n"
         "train.seed = 7\n"
         "train.decode_last_only = true\n"
         "train.threads = 2\n"
         "data.obs_len = 4\n"
         "data.pred_len = 4\n"
         "data.overlap = 0.5\n"
         "split.train_frac = 0.6\n"
         "split.val_frac = 0.2\n"
         "split.test_frac = 0.2\n"
         "split.seed = 3\n";
}

// Dataset, config, and one finished training run shared by the cases below.
struct Workspace {
  fs::path root, data, config, out_a;
  std::string data_bytes_before_train;
  RunResult synth, train;
};

const Workspace& ws() {
  static Workspace w = [] {
    Workspace s;
    s.root = scratch_root() / "base";
    fs::create_directories(s.root);
    s.data = s.root / "tracks.bev";
    s.config = s.root / "run.cfg";
    s.out_a = s.root / "out_a";
    s.synth = run_cli("synth --kind constant-velocity --tracks 12 --len 20 --seed 5 "
                      "--sigma 0.05 --out " + s.data.string());
    spit(s.config, points_config_text());
    if (fs::exists(s.data)) s.data_bytes_before_train = slurp(s.data);
    s.train = run_cli("train --config " + s.config.string() + " --data " + s.data.string() +
                      " --out " + s.out_a.string());
    return s;
  }();
  return w;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Mirrors the tool's data pipeline so file contents can be compared against
// in-process results.
std::vector<ObservationWindow> test_partition_windows(const fs::path& data) {
  auto tracks = load_bev_text(data.string());
  SplitPlan plan;
  plan.train_frac = 0.6;
  plan.val_frac = 0.2;
  plan.test_frac = 0.2;
  plan.seed = 3;
  auto split = split_tracks(tracks, plan);
  std::vector<AgentTrack> subset;
  for (std::size_t i : split.test) subset.push_back(tracks[i]);
  DatasetSpec spec;
  spec.obs_len = 4;
  spec.pred_len = 4;
  spec.overlap = 0.5;
  auto wins = make_windows(subset, spec);
  for (auto& w : wins) normalize(w, spec);
  return wins;
}

std::string box_csv_text() {
  std::ostringstream os;
  os << "frame,agent_id,x1,y1,x2,y2\n";
  for (int a = 0; a < 8; ++a) {
    const double px = 0.7 * a, py = 0.4 * a;
    const double vx = 0.2 + 0.05 * a, vy = 0.3 - 0.04 * a;
    for (int t = 0; t < 16; ++t) {
      const double x = px + vx * t, y = py + vy * t;
      os << t << ",agent" << a << "," << x << "," << y << "," << (x + 1.5) << ","
         << (y + 1.0) << "\n";
    }
  }
  return os.str();
}

std::string box_config_text() {
  return "model.input_dim = 4\n"
         "model.output_dim = 4\n"
         "model.enc_hidden = 16\n"
         "model.dec_hidden = 16\n"
         "model.goal_hidden = 8\n"
         "model.latent_dim = 4\n"
         "model.obs_len = 4\n"
         "model.pred_len = 4\n"
         "model.k = 2\n"
         "train.batch = 16\n"
         "train.epochs = 1\n"
         "train.lr = 0.001\n"
         "train.seed = 11\n"
         "train.decode_last_only = true\n"
         "data.format = bbox-csv\n"
         "data.obs_len = 4\n"
         "data.pred_len = 4\n"
         "data.overlap = 0.5\n"
         "split.train_frac = 0.5\n"
         "split.val_frac = 0.25\n"
         "split.test_frac = 0.25\n"
         "split.seed = 3\n";
}

}  // namespace

TEST_CASE("synth generates the requested number of distinct agents deterministically") {
  const fs::path dir = fresh_dir("synth");
  const fs::path a = dir / "a.bev", b = dir / "b.bev", c = dir / "c.bev";
  auto r = run_cli("synth --kind constant-velocity --tracks 10 --len 12 --seed 5 --out " +
                   a.string());
  REQUIRE(r.exit == 0);
  CHECK(r.out.find("wrote 10 tracks") != std::string::npos);

  auto tracks = load_bev_text(a.string());
  REQUIRE(tracks.size() == 10);
  std::set<std::string> ids;
  for (const auto& t : tracks) {
    ids.insert(t.agent_id);
    CHECK(t.len() == 12);
  }
  CHECK(ids.size() == 10);

  REQUIRE(run_cli("synth --kind constant-velocity --tracks 10 --len 12 --seed 5 --out " +
                  b.string()).exit == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(run_cli("synth --kind constant-velocity --tracks 10 --len 12 --seed 6 --out " +
                  c.string()).exit == 0);
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("synth circular tracks with zero noise stay on a circle") {
  const fs::path file = fresh_dir("synth_circ") / "circ.bev";
  REQUIRE(run_cli("synth --kind circular --tracks 3 --len 40 --seed 9 --sigma 0 --out " +
                  file.string()).exit == 0);
  for (const auto& t : load_bev_text(file.string())) {
    REQUIRE(t.len() == 40);
    auto px = [&](std::size_t i) { return t.at(i, 0); };
    auto py = [&](std::size_t i) { return t.at(i, 1); };
    // circumcenter of three samples, then every point must keep its radius
    const double ax = px(0), ay = py(0), bx = px(20), by = py(20), cx = px(39), cy = py(39);
    const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    REQUIRE(std::fabs(d) > 1e-9);
    const double ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) +
                       (cx * cx + cy * cy) * (ay - by)) / d;
    const double uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) +
                       (cx * cx + cy * cy) * (bx - ax)) / d;
    const double r0 = std::hypot(ax - ux, ay - uy);
    for (std::size_t i = 0; i < t.len(); ++i)
      CHECK(std::fabs(std::hypot(px(i) - ux, py(i) - uy) - r0) < 1e-6);
  }
}

TEST_CASE("baseline training writes the artifact set and leaves inputs untouched") {
  const auto& w = ws();
  REQUIRE(w.synth.exit == 0);
  REQUIRE_MESSAGE(w.train.exit == 0, w.train.err);
  CHECK(w.train.out.find("training on ") != std::string::npos);
  CHECK(w.train.out.find("artifacts in ") != std::string::npos);

  REQUIRE(fs::exists(w.out_a / "effective.cfg"));
  REQUIRE(fs::exists(w.out_a / "epochs.csv"));
  REQUIRE(fs::exists(w.out_a / "best.sgn1"));
  REQUIRE(fs::exists(w.out_a / "last.sgn1"));

  const auto epochs = lines_of(slurp(w.out_a / "epochs.csv"));
  REQUIRE(epochs.size() == 3);
  CHECK(epochs[0] == "epoch,train_loss,val_loss,lr,seconds");
  CHECK(epochs[1].rfind("1,", 0) == 0);
  CHECK(epochs[2].rfind("2,", 0) == 0);

  const std::string cfg = slurp(w.out_a / "effective.cfg");
  CHECK(cfg.find("model.ablation = ED\n") != std::string::npos);
  CHECK(cfg.find("train.epochs = 2\n") != std::string::npos);
  CHECK(cfg.find("model.k = 3\n") != std::string::npos);

  // the input data file must come through training byte-identical
  CHECK(slurp(w.data) == w.data_bytes_before_train);
}

TEST_CASE("training is reproducible byte for byte across runs and thread caps") {
  const auto& w = ws();
  REQUIRE(w.train.exit == 0);
  const std::string best_a = slurp(w.out_a / "best.sgn1");
  const std::string last_a = slurp(w.out_a / "last.sgn1");

  const fs::path out_b = fresh_dir("train_repeat");
  auto rb = run_cli("train --config " + w.config.string() + " --data " + w.data.string() +
                    " --out " + out_b.string());
  REQUIRE_MESSAGE(rb.exit == 0, rb.err);
  CHECK(slurp(out_b / "best.sgn1") == best_a);
  CHECK(slurp(out_b / "last.sgn1") == last_a);
  CHECK(slurp(out_b / "effective.cfg") == slurp(w.out_a / "effective.cfg"));

  // capping the two configured workers down to one must not change the math
  const fs::path out_c = fresh_dir("train_capped");
  auto rc = run_cli("train --config " + w.config.string() + " --data " + w.data.string() +
                    " --out " + out_c.string(), "SGNET_THREADS=1");
  REQUIRE_MESSAGE(rc.exit == 0, rc.err);
  CHECK(slurp(out_c / "best.sgn1") == best_a);
  CHECK(slurp(out_c / "last.sgn1") == last_a);

  auto bad = run_cli("train --config " + w.config.string() + " --data " + w.data.string() +
                     " --out " + (scratch_root() / "train_badenv").string(),
                     "SGNET_THREADS=abc");
  CHECK(bad.exit == 2);
  CHECK(bad.err.find("SGNET_THREADS must be a positive integer") != std::string::npos);
}

TEST_CASE("command-line overrides land in the effective config") {
  const auto& w = ws();
  REQUIRE(w.synth.exit == 0);
  const fs::path out = fresh_dir("train_override");
  auto r = run_cli("train --config " + w.config.string() + " --data " + w.data.string() +
                   " --out " + out.string() +
                   " --set model.ablation=E --set train.epochs=1");
  REQUIRE_MESSAGE(r.exit == 0, r.err);
  const std::string cfg = slurp(out / "effective.cfg");
  CHECK(cfg.find("model.ablation = E\n") != std::string::npos);
  CHECK(cfg.find("train.epochs = 1\n") != std::string::npos);
  CHECK(lines_of(slurp(out / "epochs.csv")).size() == 2);
}

TEST_CASE("train rejects missing inputs and malformed overrides as usage errors") {
  const auto& w = ws();
  const std::string out = (scratch_root() / "train_err").string();

  auto missing = run_cli("train --data " + (scratch_root() / "no_such.bev").string() +
                         " --out " + out);
  CHECK(missing.exit == 2);
  CHECK(missing.err.find("no_such.bev") != std::string::npos);

  auto noeq = run_cli("train --data " + w.data.string() + " --out " + out +
                      " --set nonsense");
  CHECK(noeq.exit == 2);
  CHECK(noeq.err.find("--set expects key=value") != std::string::npos);

  auto unknown = run_cli("train --data " + w.data.string() + " --out " + out +
                         " --set bogus.key=1");
  CHECK(unknown.exit == 2);
  CHECK(unknown.err.find("bogus.key") != std::string::npos);

  CHECK(run_cli("train --frobnicate").exit == 2);
  CHECK(run_cli("").exit == 2);
}

TEST_CASE("eval writes matching reports and repeated runs are byte-identical") {
  const auto& w = ws();
  REQUIRE(w.train.exit == 0);
  const fs::path ev1 = fresh_dir("eval_1"), ev2 = fresh_dir("eval_2");
  const std::string base = "eval --ckpt " + (w.out_a / "best.sgn1").string() + " --data " +
                           w.data.string() + " --config " + w.config.string() +
                           " --seed 21 --out ";

  auto r1 = run_cli(base + ev1.string());
  REQUIRE_MESSAGE(r1.exit == 0, r1.err);
  REQUIRE(fs::exists(ev1 / "metrics.csv"));
  REQUIRE(fs::exists(ev1 / "metrics.json"));
  REQUIRE(fs::exists(ev1 / "effective.cfg"));
  CHECK(r1.out.find("ade@4") != std::string::npos);

  const auto csv = lines_of(slurp(ev1 / "metrics.csv"));
  REQUIRE(csv.size() == 2);
  const auto head = split_csv(csv[0]);
  const auto row = split_csv(csv[1]);
  REQUIRE(head.size() == row.size());
  REQUIRE(head.size() == 4);
  CHECK(head[0] == "windows");
  CHECK(head[1] == "proposals");
  CHECK(head[2] == "ade@4");
  CHECK(head[3] == "fde@4");
  CHECK(std::stoul(row[0]) == test_partition_windows(w.data).size());
  CHECK(row[1] == "3");
  const double ade_csv = std::strtod(row[2].c_str(), nullptr);
  CHECK(std::isfinite(ade_csv));

  // the json report must carry the same numbers
  const auto json = nlohmann::json::parse(slurp(ev1 / "metrics.json"));
  REQUIRE(json["metrics"].contains("ade@4"));
  REQUIRE(json["metrics"].contains("fde@4"));
  CHECK(json["metrics"]["ade@4"].get<double>() == ade_csv);
  CHECK(json["metrics"]["fde@4"].get<double>() ==
        std::strtod(row[3].c_str(), nullptr));
  CHECK(json["windows"].get<std::size_t>() == std::stoul(row[0]));

  auto r2 = run_cli(base + ev2.string());
  REQUIRE(r2.exit == 0);
  CHECK(slurp(ev2 / "metrics.csv") == slurp(ev1 / "metrics.csv"));
  CHECK(slurp(ev2 / "metrics.json") == slurp(ev1 / "metrics.json"));

  // an explicit proposal count overrides the checkpoint's default
  const fs::path ev5 = fresh_dir("eval_k5");
  auto r5 = run_cli(base + ev5.string() + " --k 5");
  REQUIRE(r5.exit == 0);
  CHECK(split_csv(lines_of(slurp(ev5 / "metrics.csv"))[1])[1] == "5");
}

TEST_CASE("horizon flags accept steps and seconds and must stay within the decoder") {
  const auto& w = ws();
  REQUIRE(w.train.exit == 0);
  const std::string base = "eval --ckpt " + (w.out_a / "best.sgn1").string() + " --data " +
                           w.data.string() + " --config " + w.config.string() + " --out ";

  auto steps = run_cli(base + fresh_dir("eval_h_steps").string() + " --horizons 2,4");
  REQUIRE_MESSAGE(steps.exit == 0, steps.err);
  CHECK(steps.out.find("mse@") == std::string::npos);

  // 1.6 seconds at the 2.5 fps default is step 4
  auto secs = run_cli(base + fresh_dir("eval_h_secs").string() + " --horizons 1.6s");
  REQUIRE_MESSAGE(secs.exit == 0, secs.err);

  auto over = run_cli(base + fresh_dir("eval_h_over").string() + " --horizons 9");
  CHECK(over.exit == 2);
  CHECK(over.err.find("outside") != std::string::npos);

  auto junk = run_cli(base + fresh_dir("eval_h_junk").string() + " --horizons abc");
  CHECK(junk.exit == 2);
  CHECK(junk.err.find("bad horizon") != std::string::npos);
}

TEST_CASE("box checkpoints add one mse column per horizon cutoff") {
  const fs::path dir = fresh_dir("boxes");
  const fs::path data = dir / "boxes.csv";
  const fs::path cfg = dir / "run.cfg";
  spit(data, box_csv_text());
  spit(cfg, box_config_text());

  auto tr = run_cli("train --config " + cfg.string() + " --data " + data.string() +
                    " --out " + (dir / "out").string());
  REQUIRE_MESSAGE(tr.exit == 0, tr.err);

  auto ev = run_cli("eval --ckpt " + (dir / "out" / "best.sgn1").string() + " --data " +
                    data.string() + " --config " + cfg.string() + " --horizons 1,2,4 --out " +
                    (dir / "ev").string());
  REQUIRE_MESSAGE(ev.exit == 0, ev.err);

  const auto csv = lines_of(slurp(dir / "ev" / "metrics.csv"));
  REQUIRE(csv.size() == 2);
  const auto head = split_csv(csv[0]);
  const auto row = split_csv(csv[1]);
  auto col = [&](const std::string& name) -> double {
    for (std::size_t i = 0; i < head.size(); ++i)
      if (head[i] == name) return std::strtod(row[i].c_str(), nullptr);
    FAIL("missing column " << name);
    return 0.0;
  };
  CHECK(count_occurrences(csv[0], ",mse@") == 3);
  CHECK(std::isfinite(col("mse@1")));
  CHECK(std::isfinite(col("mse@2")));
  CHECK(std::isfinite(col("mse@4")));
  CHECK(std::isfinite(col("c_mse@4")));
  CHECK(std::isfinite(col("cf_mse@4")));
  const double f = col("fiou@4");
  CHECK(f >= 0.0);
  CHECK(f <= 1.0);
}

TEST_CASE("deterministic checkpoints ignore the proposal count with a warning") {
  const auto& w = ws();
  REQUIRE(w.synth.exit == 0);
  const fs::path dir = fresh_dir("det");
  auto tr = run_cli("train --config " + w.config.string() + " --data " + w.data.string() +
                    " --out " + (dir / "out").string() +
                    " --set model.mode=deterministic --set train.epochs=1");
  REQUIRE_MESSAGE(tr.exit == 0, tr.err);

  const std::string base = "eval --ckpt " + (dir / "out" / "best.sgn1").string() +
                           " --data " + w.data.string() + " --config " + w.config.string() +
                           " --set model.mode=deterministic --out ";
  auto withk = run_cli(base + (dir / "ev_k").string() + " --k 6");
  REQUIRE_MESSAGE(withk.exit == 0, withk.err);
  CHECK(withk.err.find("ignores --k") != std::string::npos);
  CHECK(split_csv(lines_of(slurp(dir / "ev_k" / "metrics.csv"))[1])[1] == "1");

  auto plain = run_cli(base + (dir / "ev_plain").string());
  REQUIRE(plain.exit == 0);
  CHECK(plain.err.find("ignores --k") == std::string::npos);
}

TEST_CASE("an empty test partition aborts evaluation before any report is written") {
  const auto& w = ws();
  REQUIRE(w.train.exit == 0);
  const fs::path out = scratch_root() / "eval_empty";
  fs::remove_all(out);
  auto r = run_cli("eval --ckpt " + (w.out_a / "best.sgn1").string() + " --data " +
                   w.data.string() + " --config " + w.config.string() +
                   " --set split.train_frac=0.8 --set split.val_frac=0.2"
                   " --set split.test_frac=0 --out " + out.string());
  CHECK(r.exit == 2);
  CHECK(r.err.find("empty test set") != std::string::npos);
  CHECK(!fs::exists(out / "metrics.csv"));
  CHECK(!fs::exists(out / "metrics.json"));
}

TEST_CASE("predict rows cover every window, proposal, and step exactly once") {
  const auto& w = ws();
  REQUIRE(w.train.exit == 0);
  const fs::path file = fresh_dir("predict") / "pred.csv";
  auto r = run_cli("predict --ckpt " + (w.out_a / "best.sgn1").string() + " --data " +
                   w.data.string() + " --config " + w.config.string() +
                   " --k 3 --seed 11 --out " + file.string());
  REQUIRE_MESSAGE(r.exit == 0, r.err);

  const std::string text = slurp(file);
  const auto rows = lines_of(text);
  REQUIRE(!rows.empty());
  CHECK(rows[0] == "scene,agent,window_start,proposal,step,x,y");
  CHECK(count_occurrences(text, "scene,agent,window_start") == 1);

  auto wins = test_partition_windows(w.data);
  REQUIRE(!wins.empty());
  REQUIRE(rows.size() == 1 + wins.size() * 3 * 4);
  CHECK(r.out.find("wrote " + std::to_string(wins.size()) + "x3x4 prediction rows") !=
        std::string::npos);

  // rebuild the same model and compare every coordinate through the text
  // round trip; %.17g preserves doubles exactly
  Checkpoint ck = checkpoint_load((w.out_a / "best.sgn1").string());
  Model<float> model = Model<float>::init(ModelConfig::from_kv(ck.header, "model."), 1);
  restore_model(model, ck);

  std::size_t at = 1;
  for (std::size_t i = 0; i < wins.size(); ++i) {
    auto wp = predict_window(model, wins[i], 3, eval_window_seed(11, i));
    REQUIRE(wp.proposals.size() == 3);
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t t = 0; t < 4; ++t, ++at) {
        const auto f = split_csv(rows[at]);
        REQUIRE(f.size() == 7);
        CHECK(f[0] == wins[i].scene_id);
        CHECK(f[1] == wins[i].agent_id);
        CHECK(f[2] == std::to_string(wins[i].start_frame));
        CHECK(f[3] == std::to_string(p));
        CHECK(f[4] == std::to_string(t + 1));
        CHECK(std::strtod(f[5].c_str(), nullptr) == wp.proposals[p][t * 2 + 0]);
        CHECK(std::strtod(f[6].c_str(), nullptr) == wp.proposals[p][t * 2 + 1]);
      }
    }
  }
}

TEST_CASE("gradcheck passes on a fresh model and reports each parameter block") {
  auto pass = run_cli("gradcheck --size tiny --probes 24 --seed 3 --tol 1e-4");
  REQUIRE_MESSAGE(pass.exit == 0, pass.out);
  CHECK(pass.out.find("embed.w") != std::string::npos);
  CHECK(pass.out.find("traj_reg.b") != std::string::npos);
  CHECK(pass.out.find("-> PASS") != std::string::npos);
  CHECK(lines_of(pass.out).size() >= 20);

  auto fail = run_cli("gradcheck --size tiny --probes 24 --seed 3 --tol 1e-30");
  CHECK(fail.exit == 1);
  CHECK(fail.out.find("-> FAIL") != std::string::npos);

  CHECK(run_cli("gradcheck --size bogus").exit == 2);
}
