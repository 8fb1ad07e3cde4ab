#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgnet/checkpoint.hpp"
#include "sgnet/config.hpp"
#include "sgnet/gradcheck.hpp"
#include "sgnet/synth.hpp"
#include "sgnet/training.hpp"

namespace fs = std::filesystem;
using namespace sgnet;

namespace {

std::size_t thread_cap(std::size_t requested) {
  const char* env = std::getenv("SGNET_THREADS");
  if (!env || !*env) return requested;
  char* end = nullptr;
  const unsigned long cap = std::strtoul(env, &end, 10);
  if (end == env || *end != '\0' || cap == 0)
    throw ConfigError("SGNET_THREADS must be a positive integer, got `" +
                      std::string(env) + "`");
  return std::min<std::size_t>(requested, cap);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write `" + path.string() + "`");
  out << content;
  if (!out) throw IoError("short write to `" + path.string() + "`");
}

std::map<std::string, std::string> overrides_from_sets(
    const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  for (const auto& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got `" + s + "`");
    std::string key = s.substr(0, eq);
    std::string val = s.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!val.empty() && val.front() == ' ') val.erase(val.begin());
    kv[key] = val;
  }
  return kv;
}

std::vector<AgentTrack> load_tracks(const std::string& path, const DatasetSpec& spec) {
  if (spec.format == DataFormat::BboxCsv) return load_bbox_csv(path);
  return load_bev_text(path);
}

// Windows per partition, motion features derived when the model's input width
// asks for them, normalized and ready for the model.
struct PreparedData {
  std::vector<ObservationWindow> train, val, test;
};

std::vector<ObservationWindow> cut_and_normalize(const std::vector<AgentTrack>& tracks,
                                                 const std::vector<std::size_t>& idx,
                                                 const DatasetSpec& spec) {
  std::vector<AgentTrack> subset;
  subset.reserve(idx.size());
  for (std::size_t i : idx) subset.push_back(tracks[i]);
  auto windows = make_windows(subset, spec);
  for (auto& w : windows) normalize(w, spec);
  return windows;
}

PreparedData prepare_data(const std::string& data_path, const RunConfig& rc) {
  auto tracks = load_tracks(data_path, rc.data);
  if (tracks.empty()) throw ConfigError("no tracks found in `" + data_path + "`");
  const std::size_t raw = tracks.front().feat_dim;
  const std::size_t pos = tracks.front().pos_dim;
  const std::size_t want = rc.model.input_dim;
  if (want == raw + 2 * pos) {
    std::vector<std::string> warnings;
    tracks = derive_motion_features_all(tracks, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  } else if (want != raw) {
    throw ConfigError("model.input_dim=" + std::to_string(want) +
                      " matches neither the raw feature width " + std::to_string(raw) +
                      " nor the with-motion width " + std::to_string(raw + 2 * pos));
  }
  auto split = split_tracks(tracks, rc.split);
  PreparedData out;
  out.train = cut_and_normalize(tracks, split.train, rc.data);
  out.val = cut_and_normalize(tracks, split.val, rc.data);
  out.test = cut_and_normalize(tracks, split.test, rc.data);
  return out;
}

std::vector<std::size_t> parse_horizons(const std::string& raw, const DatasetSpec& spec) {
  std::vector<std::size_t> out;
  if (raw.empty()) return out;
  std::stringstream ss(raw);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
    while (!tok.empty() && tok.back() == ' ') tok.pop_back();
    if (tok.empty()) continue;
    try {
      if (tok.back() == 's') {
        const double sec = std::stod(tok.substr(0, tok.size() - 1));
        const double steps = sec * spec.fps / static_cast<double>(spec.annotation_stride);
        out.push_back(static_cast<std::size_t>(std::llround(steps)));
      } else {
        std::size_t used = 0;
        out.push_back(static_cast<std::size_t>(std::stoull(tok, &used)));
        if (used != tok.size()) throw std::invalid_argument(tok);
      }
    } catch (const std::exception&) {
      throw ConfigError("bad horizon `" + tok + "` (expected steps or `<seconds>s`)");
    }
  }
  return out;
}

// Model config comes from the checkpoint; the config file may repeat it only
// with identical values. Window lengths follow the checkpoint unless the file
// pins them explicitly.
RunConfig eval_run_config(const Checkpoint& ck, const std::string& config_path,
                          const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = read_kv_file(config_path);
  for (const auto& [k, v] : overrides) kv[k] = v;

  std::map<std::string, std::string> ck_kv;
  ModelConfig::from_kv(ck.header, "model.").to_kv(ck_kv, "model.");
  ck_kv["data.obs_len"] = ck_kv["model.obs_len"];
  ck_kv["data.pred_len"] = ck_kv["model.pred_len"];
  for (const auto& [k, v] : ck_kv) {
    auto it = kv.find(k);
    if (it == kv.end())
      kv[k] = v;
    else if (it->second != v)
      throw ConfigError("config/checkpoint dimension mismatch: " + k + " is `" +
                        it->second + "` in the config but `" + v + "` in the checkpoint");
  }
  return run_config_from_kv(kv);
}

struct EvalSetup {
  Checkpoint ck;
  RunConfig rc;
  Model<float> model;
  std::vector<ObservationWindow> windows;
  std::size_t k = 1;
};

EvalSetup eval_setup(const std::string& ckpt_path, const std::string& data_path,
                     const std::string& config_path,
                     const std::map<std::string, std::string>& overrides, std::size_t k_flag) {
  Checkpoint ck = checkpoint_load(ckpt_path);
  RunConfig rc = eval_run_config(ck, config_path, overrides);
  Model<float> model = Model<float>::init(rc.model, 1);
  restore_model(model, ck);
  auto data = prepare_data(data_path, rc);
  if (data.test.empty())
    throw ConfigError("empty test set: no windows in the test partition of `" +
                      data_path + "`");
  std::size_t k = 1;
  if (model.config().mode == ModelMode::Deterministic) {
    if (k_flag > 1)
      std::cerr << "warning: deterministic checkpoint ignores --k " << k_flag << "\n";
  } else {
    k = k_flag ? k_flag : model.config().k;
  }
  return EvalSetup{std::move(ck), std::move(rc), std::move(model), std::move(data.test), k};
}

int cmd_synth(const SynthConfig& cfg, const std::string& out) {
  auto tracks = synth_generate(cfg);
  write_bev_text(out, tracks);
  std::cout << "wrote " << tracks.size() << " tracks to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path,
              const std::map<std::string, std::string>& overrides,
              const std::string& data_path, const std::string& out_dir,
              const std::string& resume_path) {
  RunConfig rc = load_run_config(config_path, overrides);
  rc.train.threads = thread_cap(rc.train.threads);
  auto data = prepare_data(data_path, rc);
  if (data.train.empty())
    throw ConfigError("training set is empty after splitting and windowing `" +
                      data_path + "`");

  auto model = Model<float>::init(rc.model, rc.train.seed);
  Checkpoint resume;
  const bool resuming = !resume_path.empty();
  if (resuming) resume = checkpoint_load(resume_path);

  std::cout << "training on " << data.train.size() << " windows (val "
            << data.val.size() << ", test " << data.test.size() << ")\n";
  auto result =
      train(model, data.train, data.val, rc.train, resuming ? &resume : nullptr, &std::cout);

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_file(out / "effective.cfg", rc.to_text());
  write_file(out / "epochs.csv", epochs_to_csv(result.epochs));
  checkpoint_save((out / "best.sgn1").string(), result.best);
  checkpoint_save((out / "last.sgn1").string(), result.last);
  std::cout << "best val " << result.best_val << " at epoch " << result.best_epoch
            << "; artifacts in " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& config_path,
             const std::map<std::string, std::string>& overrides, std::size_t k_flag,
             const std::string& horizons_raw, std::uint64_t seed, std::size_t threads,
             const std::string& out_dir) {
  auto s = eval_setup(ckpt_path, data_path, config_path, overrides, k_flag);
  auto horizons = parse_horizons(horizons_raw, s.rc.data);
  auto report =
      evaluate(s.model, s.windows, s.k, horizons, seed, thread_cap(threads));
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_file(out / "metrics.csv", report.to_csv());
  write_file(out / "metrics.json", report.to_json());
  write_file(out / "effective.cfg", s.rc.to_text());
  std::cout << report.to_csv();
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::string& config_path,
                const std::map<std::string, std::string>& overrides, std::size_t k_flag,
                std::uint64_t seed, const std::string& out_file) {
  auto s = eval_setup(ckpt_path, data_path, config_path, overrides, k_flag);
  const std::size_t ld = s.model.config().pred_len;
  const std::size_t d = s.model.config().output_dim;
  std::ostringstream os;
  os << (d == 4 ? "scene,agent,window_start,proposal,step,x,y,x2,y2"
                : "scene,agent,window_start,proposal,step,x,y")
     << "\n";
  char buf[64];
  for (std::size_t i = 0; i < s.windows.size(); ++i) {
    const auto& w = s.windows[i];
    auto wp = predict_window(s.model, w, s.k, eval_window_seed(seed, i));
    for (std::size_t p = 0; p < wp.proposals.size(); ++p) {
      for (std::size_t t = 0; t < ld; ++t) {
        os << w.scene_id << "," << w.agent_id << "," << w.start_frame << "," << p << ","
           << (t + 1);
        for (std::size_t c = 0; c < d; ++c) {
          std::snprintf(buf, sizeof(buf), ",%.17g", wp.proposals[p][t * d + c]);
          os << buf;
        }
        os << "\n";
      }
    }
  }
  write_file(out_file, os.str());
  std::cout << "wrote " << s.windows.size() << "x" << s.k << "x" << ld
            << " prediction rows to " << out_file << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& size, std::uint64_t seed, std::size_t probes,
                  double tol, const std::string& sge, const std::string& mode,
                  const std::string& ablation) {
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.output_dim = 2;
  if (size == "tiny") {
    cfg.enc_hidden = 8;
    cfg.dec_hidden = 8;
    cfg.goal_hidden = 4;
    cfg.latent_dim = 2;
    cfg.obs_len = 3;
    cfg.pred_len = 3;
    cfg.k = 2;
  } else if (size == "small") {
    cfg.input_dim = 6;
    cfg.enc_hidden = 16;
    cfg.dec_hidden = 16;
    cfg.goal_hidden = 8;
    cfg.latent_dim = 4;
    cfg.obs_len = 4;
    cfg.pred_len = 4;
    cfg.k = 3;
  } else {
    throw ConfigError("unknown gradcheck size `" + size + "` (expected tiny or small)");
  }
  cfg.sge = sge_variant_from_string(sge);
  cfg.mode = model_mode_from_string(mode);
  cfg.ablation = ablation_from_string(ablation);
  auto rep = gradcheck_model(cfg, seed, probes, tol);
  std::cout << gradcheck_to_text(rep);
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stepwise-goal trajectory prediction toolkit"};
  app.require_subcommand(1);

  SynthConfig sy;
  std::string sy_kind = "constant-velocity";
  std::string sy_out;
  auto* synth = app.add_subcommand("synth", "generate synthetic tracks as bev-text");
  synth->add_option("--kind", sy_kind, "constant-velocity | piecewise-goal | circular");
  synth->add_option("--tracks", sy.tracks, "number of agents");
  synth->add_option("--len", sy.len, "frames per agent");
  synth->add_option("--seed", sy.seed, "generator seed");
  synth->add_option("--sigma", sy.sigma, "Gaussian position noise");
  synth->add_option("--goal-every", sy.goal_every, "goal resample period");
  synth->add_option("--speed", sy.speed, "base speed");
  synth->add_option("--fps", sy.fps, "frames per second");
  synth->add_option("--out", sy_out, "output file")->required();

  std::string tr_config, tr_data, tr_out, tr_resume;
  std::vector<std::string> tr_sets;
  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--data", tr_data, "input data file")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--resume", tr_resume, "checkpoint to continue from");
  tr->add_option("--set", tr_sets, "override, e.g. --set train.epochs=5");

  std::string ev_ckpt, ev_data, ev_config, ev_out, ev_horizons;
  std::vector<std::string> ev_sets;
  std::size_t ev_k = 0, ev_threads = 1;
  std::uint64_t ev_seed = 1;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test partition");
  ev->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "input data file")->required();
  ev->add_option("--config", ev_config, "key = value config file");
  ev->add_option("--set", ev_sets, "override, e.g. --set split.test_frac=1");
  ev->add_option("--k", ev_k, "proposals per window (0 = checkpoint config)");
  ev->add_option("--horizons", ev_horizons, "MSE cutoffs: steps or `<seconds>s`, comma-separated");
  ev->add_option("--seed", ev_seed, "sampling seed");
  ev->add_option("--threads", ev_threads, "worker threads");
  ev->add_option("--out", ev_out, "output directory")->required();

  std::string pr_ckpt, pr_data, pr_config, pr_out;
  std::vector<std::string> pr_sets;
  std::size_t pr_k = 0;
  std::uint64_t pr_seed = 1;
  auto* pr = app.add_subcommand("predict", "write best-of-K trajectories as CSV");
  pr->add_option("--ckpt", pr_ckpt, "checkpoint file")->required();
  pr->add_option("--data", pr_data, "input data file")->required();
  pr->add_option("--config", pr_config, "key = value config file");
  pr->add_option("--set", pr_sets, "override");
  pr->add_option("--k", pr_k, "proposals per window (0 = checkpoint config)");
  pr->add_option("--seed", pr_seed, "sampling seed");
  pr->add_option("--out", pr_out, "output CSV file")->required();

  std::string gc_size = "tiny", gc_sge = "recurrent", gc_mode = "stochastic",
              gc_abl = "ED";
  std::uint64_t gc_seed = 11;
  std::size_t gc_probes = 120;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gc->add_option("--size", gc_size, "tiny | small");
  gc->add_option("--seed", gc_seed, "init seed");
  gc->add_option("--probes", gc_probes, "minimum parameters to probe");
  gc->add_option("--tol", gc_tol, "relative error tolerance");
  gc->add_option("--sge", gc_sge, "recurrent | feedforward | convolutional");
  gc->add_option("--mode", gc_mode, "stochastic | deterministic");
  gc->add_option("--ablation", gc_abl, "ED | E | D");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      sy.kind = synth_kind_from_string(sy_kind);
      return cmd_synth(sy, sy_out);
    }
    if (*tr)
      return cmd_train(tr_config, overrides_from_sets(tr_sets), tr_data, tr_out,
                       tr_resume);
    if (*ev)
      return cmd_eval(ev_ckpt, ev_data, ev_config, overrides_from_sets(ev_sets), ev_k,
                      ev_horizons, ev_seed, ev_threads, ev_out);
    if (*pr)
      return cmd_predict(pr_ckpt, pr_data, pr_config, overrides_from_sets(pr_sets), pr_k,
                         pr_seed, pr_out);
    if (*gc) return cmd_gradcheck(gc_size, gc_seed, gc_probes, gc_tol, gc_sge, gc_mode, gc_abl);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
