// Python bindings for the trajectory-prediction core: synthetic data, track
// loading, windowing, model training, evaluation, prediction, checkpoints,
// and the gradient audit.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgnet/checkpoint.hpp"
#include "sgnet/gradcheck.hpp"
#include "sgnet/synth.hpp"
#include "sgnet/training.hpp"

namespace py = pybind11;
using namespace sgnet;

namespace {

std::string kwarg_to_string(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  return py::str(v).cast<std::string>();
}

std::map<std::string, std::string> kwargs_to_kv(const py::kwargs& kw,
                                                const std::map<std::string, std::string>& known,
                                                const char* what) {
  std::map<std::string, std::string> kv;
  for (const auto& item : kw) {
    const std::string key = py::str(item.first).cast<std::string>();
    if (!known.count(key))
      throw py::key_error("unknown " + std::string(what) + " option `" + key + "`");
    kv[key] = kwarg_to_string(item.second);
  }
  return kv;
}

ModelConfig model_config_from_kwargs(const py::kwargs& kw) {
  std::map<std::string, std::string> known;
  ModelConfig{}.to_kv(known, "");
  auto cfg = ModelConfig::from_kv(kwargs_to_kv(kw, known, "model"), "");
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from_kwargs(const py::kwargs& kw) {
  std::map<std::string, std::string> known;
  TrainConfig{}.to_kv(known, "");
  return TrainConfig::from_kv(kwargs_to_kv(kw, known, "train"), "");
}

py::array_t<double> matrix(const std::vector<double>& flat, std::size_t rows,
                           std::size_t cols) {
  py::array_t<double> out({rows, cols});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

py::dict report_to_dict(const MetricReport& rep) {
  py::dict d;
  d["windows"] = rep.windows;
  d["proposals"] = rep.proposals;
  for (const auto& e : rep.entries)
    d[py::str(e.name + "@" + std::to_string(e.horizon_steps))] = e.value;
  return d;
}

class PyModel {
 public:
  PyModel(std::uint64_t seed, const py::kwargs& kw)
      : model_(Model<float>::init(model_config_from_kwargs(kw), seed)) {}

  explicit PyModel(Model<float> m) : model_(std::move(m)) {}

  static PyModel load(const std::string& path) {
    Checkpoint ck = checkpoint_load(path);
    Model<float> m = Model<float>::init(ck.model_config(), 1);
    restore_model(m, ck);
    return PyModel(std::move(m));
  }

  py::dict config() const {
    std::map<std::string, std::string> kv;
    model_.config().to_kv(kv, "");
    py::dict d;
    for (const auto& [k, v] : kv) d[py::str(k)] = v;
    return d;
  }

  py::dict train_on(const std::vector<ObservationWindow>& train_set,
                    const std::vector<ObservationWindow>& val_set, const py::kwargs& kw) {
    TrainConfig tc = train_config_from_kwargs(kw);
    TrainResult result;
    {
      py::gil_scoped_release release;
      result = train(model_, train_set, val_set, tc);
    }
    best_ = result.best;
    last_ = result.last;
    py::dict out;
    py::list epochs;
    for (const auto& r : result.epochs) {
      py::dict row;
      row["epoch"] = r.epoch;
      row["train_loss"] = r.train_loss;
      row["val_loss"] = r.val_loss;
      row["lr"] = r.lr;
      row["seconds"] = r.seconds;
      epochs.append(row);
    }
    out["epochs"] = epochs;
    py::array_t<float> steps(static_cast<py::ssize_t>(result.step_losses.size()));
    std::copy(result.step_losses.begin(), result.step_losses.end(), steps.mutable_data());
    out["step_losses"] = steps;
    out["best_epoch"] = result.best_epoch;
    out["best_val"] = result.best_val;
    return out;
  }

  void restore(const std::string& which) {
    const Checkpoint& ck = pick(which);
    restore_model(model_, ck);
  }

  py::dict evaluate_on(const std::vector<ObservationWindow>& windows, std::size_t k,
                       const std::vector<std::size_t>& horizons, std::uint64_t seed,
                       std::size_t threads) {
    MetricReport rep;
    {
      py::gil_scoped_release release;
      rep = evaluate(model_, windows, k, horizons, seed, threads);
    }
    return report_to_dict(rep);
  }

  py::dict predict_on(const ObservationWindow& w, std::size_t k, std::uint64_t seed) {
    auto wp = predict_window(model_, w, k, seed);
    const std::size_t ld = model_.config().pred_len;
    const std::size_t d = model_.config().output_dim;
    py::array_t<double> proposals({wp.proposals.size(), ld, d});
    double* dst = proposals.mutable_data();
    for (const auto& p : wp.proposals) dst = std::copy(p.begin(), p.end(), dst);
    py::dict out;
    out["proposals"] = proposals;
    out["gt"] = matrix(wp.gt, ld, d);
    out["goals"] = matrix(wp.goals, ld, d);
    return out;
  }

  void save(const std::string& path, const std::string& which) const {
    if (which == "current") {
      checkpoint_save(path, snapshot(model_, nullptr, {}));
      return;
    }
    checkpoint_save(path, pick(which));
  }

 private:
  const Checkpoint& pick(const std::string& which) const {
    if (which == "best" && best_) return *best_;
    if (which == "last" && last_) return *last_;
    throw py::value_error("no `" + which + "` checkpoint; train first or use `current`");
  }

  Model<float> model_;
  std::optional<Checkpoint> best_, last_;
};

}  // namespace

PYBIND11_MODULE(_sgnet, m) {
  m.doc() = "stepwise-goal trajectory prediction core";
#ifdef SGNET_VERSION
  m.attr("__version__") = SGNET_VERSION;
#else
  m.attr("__version__") = "dev";
#endif

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DimError>(m, "DimError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<AgentTrack>(m, "Track")
      .def_readonly("scene_id", &AgentTrack::scene_id)
      .def_readonly("agent_id", &AgentTrack::agent_id)
      .def_readonly("fps", &AgentTrack::fps)
      .def_readonly("frame_stride", &AgentTrack::frame_stride)
      .def_property_readonly("frames",
                             [](const AgentTrack& t) {
                               py::array_t<std::int64_t> out(
                                   static_cast<py::ssize_t>(t.frames.size()));
                               std::copy(t.frames.begin(), t.frames.end(),
                                         out.mutable_data());
                               return out;
                             })
      .def_property_readonly(
          "state", [](const AgentTrack& t) { return matrix(t.state, t.len(), t.feat_dim); })
      .def("__len__", &AgentTrack::len)
      .def("__repr__", [](const AgentTrack& t) {
        return "<Track " + t.scene_id + "/" + t.agent_id + " len " +
               std::to_string(t.len()) + ">";
      });

  py::class_<ObservationWindow>(m, "Window")
      .def_readonly("scene_id", &ObservationWindow::scene_id)
      .def_readonly("agent_id", &ObservationWindow::agent_id)
      .def_readonly("start_frame", &ObservationWindow::start_frame)
      .def_readonly("normalized", &ObservationWindow::normalized)
      .def_property_readonly(
          "obs",
          [](const ObservationWindow& w) { return matrix(w.obs, w.obs_len, w.in_dim); })
      .def_property_readonly(
          "fut",
          [](const ObservationWindow& w) { return matrix(w.fut, w.pred_len, w.out_dim); })
      .def("__repr__", [](const ObservationWindow& w) {
        return "<Window " + w.scene_id + "/" + w.agent_id + " @ " +
               std::to_string(w.start_frame) + ">";
      });

  m.def(
      "synth",
      [](const std::string& kind, std::size_t tracks, std::size_t length,
         std::uint64_t seed, double sigma, std::size_t goal_every, double speed,
         double fps) {
        SynthConfig sc;
        sc.kind = synth_kind_from_string(kind);
        sc.tracks = tracks;
        sc.len = length;
        sc.seed = seed;
        sc.sigma = sigma;
        sc.goal_every = goal_every;
        sc.speed = speed;
        sc.fps = fps;
        return synth_generate(sc);
      },
      py::arg("kind") = "constant-velocity", py::arg("tracks") = 10,
      py::arg("length") = 30, py::arg("seed") = 1, py::arg("sigma") = 0.0,
      py::arg("goal_every") = 6, py::arg("speed") = 1.0, py::arg("fps") = 2.5,
      "Generate synthetic agent tracks (constant-velocity | piecewise-goal | circular).");

  m.def("load_bev_text", &load_bev_text, py::arg("path"),
        "Load `frame agent_id x y` text tracks.");
  m.def("load_bbox_csv", &load_bbox_csv, py::arg("path"),
        "Load `frame,agent_id,x1,y1,x2,y2[,...]` CSV tracks.");
  m.def("write_bev_text", &write_bev_text, py::arg("path"), py::arg("tracks"));
  m.def(
      "with_motion_features",
      [](const std::vector<AgentTrack>& tracks) {
        std::vector<std::string> warnings;
        auto out = derive_motion_features_all(tracks, &warnings);
        return py::make_tuple(out, warnings);
      },
      py::arg("tracks"),
      "Append velocity/acceleration columns; returns (tracks, warnings).");

  m.def(
      "make_windows",
      [](const std::vector<AgentTrack>& tracks, std::size_t obs_len, std::size_t pred_len,
         double overlap, bool normalized, const std::string& norm, double frame_width,
         double frame_height) {
        DatasetSpec spec;
        spec.obs_len = obs_len;
        spec.pred_len = pred_len;
        spec.overlap = overlap;
        spec.norm = norm == "pixel" ? NormKind::Pixel : NormKind::Offset;
        spec.frame_width = frame_width;
        spec.frame_height = frame_height;
        auto wins = make_windows(tracks, spec);
        if (normalized)
          for (auto& w : wins) normalize(w, spec);
        return wins;
      },
      py::arg("tracks"), py::arg("obs_len") = 8, py::arg("pred_len") = 12,
      py::arg("overlap") = 0.5, py::arg("normalize") = true, py::arg("norm") = "offset",
      py::arg("frame_width") = 1920.0, py::arg("frame_height") = 1080.0,
      "Cut sliding windows from tracks, optionally normalizing them in place.");

  py::class_<PyModel>(m, "Model")
      .def(py::init<std::uint64_t, py::kwargs>(), py::arg("seed") = 1,
           "Model(seed=1, **config) with config keys matching the `model.*` options.")
      .def_static("load", &PyModel::load, py::arg("path"))
      .def_property_readonly("config", &PyModel::config)
      .def("train", &PyModel::train_on, py::arg("train_windows"),
           py::arg("val_windows") = std::vector<ObservationWindow>{},
           "Run the optimizer; returns history. Keyword options match `train.*`.")
      .def("restore", &PyModel::restore, py::arg("which") = "best",
           "Reset parameters to the `best` or `last` checkpoint of the last train run.")
      .def("evaluate", &PyModel::evaluate_on, py::arg("windows"), py::arg("k") = 0,
           py::arg("horizons") = std::vector<std::size_t>{}, py::arg("seed") = 1,
           py::arg("threads") = 1)
      .def("predict", &PyModel::predict_on, py::arg("window"), py::arg("k") = 1,
           py::arg("seed") = 1)
      .def("save", &PyModel::save, py::arg("path"), py::arg("which") = "current");

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t probes, double tol, const py::kwargs& kw) {
        auto rep = gradcheck_model(model_config_from_kwargs(kw), seed, probes, tol);
        py::dict d;
        d["pass"] = rep.pass;
        d["checked"] = rep.checked;
        d["failed"] = rep.failed;
        d["skipped"] = rep.skipped;
        d["worst_rel"] = rep.worst_rel;
        d["worst_block"] = rep.worst_block;
        d["text"] = gradcheck_to_text(rep);
        return d;
      },
      py::arg("seed") = 11, py::arg("probes") = 60, py::arg("tol") = 1e-4,
      "Finite-difference audit of the backward pass; config keys as for Model.");
}
