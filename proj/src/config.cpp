#include "sgnet/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sgnet {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": `" + raw + "`");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(raw, &used);
    if (used != raw.size() || raw.find('-') != std::string::npos)
      throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": `" + raw + "`");
  }
}

std::string format_to_string(DataFormat f) {
  switch (f) {
    case DataFormat::BevText: return "bev-text";
    case DataFormat::BboxCsv: return "bbox-csv";
    case DataFormat::Synthetic: return "synthetic";
  }
  return "bev-text";
}

DataFormat format_from_string(const std::string& s) {
  if (s == "bev-text") return DataFormat::BevText;
  if (s == "bbox-csv") return DataFormat::BboxCsv;
  if (s == "synthetic") return DataFormat::Synthetic;
  throw ConfigError("unknown data format `" + s +
                    "` (expected bev-text, bbox-csv, or synthetic)");
}

std::string norm_to_string(NormKind n) {
  return n == NormKind::Pixel ? "pixel" : "offset";
}

NormKind norm_from_string(const std::string& s) {
  if (s == "offset") return NormKind::Offset;
  if (s == "pixel") return NormKind::Pixel;
  throw ConfigError("unknown normalization `" + s + "` (expected offset or pixel)");
}

std::string join_scenes(const std::vector<std::string>& scenes) {
  std::string out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (i) out += ',';
    out += scenes[i];
  }
  return out;
}

std::vector<std::string> split_scenes(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void data_to_kv(const DatasetSpec& d, std::map<std::string, std::string>& kv) {
  kv["data.format"] = format_to_string(d.format);
  kv["data.fps"] = fmt_g17(d.fps);
  kv["data.annotation_stride"] = std::to_string(d.annotation_stride);
  kv["data.obs_len"] = std::to_string(d.obs_len);
  kv["data.pred_len"] = std::to_string(d.pred_len);
  kv["data.overlap"] = fmt_g17(d.overlap);
  kv["data.norm"] = norm_to_string(d.norm);
  kv["data.frame_width"] = fmt_g17(d.frame_width);
  kv["data.frame_height"] = fmt_g17(d.frame_height);
}

DatasetSpec data_from_kv(const std::map<std::string, std::string>& kv) {
  DatasetSpec d;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("data.format")) d.format = format_from_string(*v);
  if (auto* v = get("data.fps")) d.fps = parse_double("data.fps", *v);
  if (auto* v = get("data.annotation_stride"))
    d.annotation_stride = static_cast<std::size_t>(parse_u64("data.annotation_stride", *v));
  if (auto* v = get("data.obs_len"))
    d.obs_len = static_cast<std::size_t>(parse_u64("data.obs_len", *v));
  if (auto* v = get("data.pred_len"))
    d.pred_len = static_cast<std::size_t>(parse_u64("data.pred_len", *v));
  if (auto* v = get("data.overlap")) d.overlap = parse_double("data.overlap", *v);
  if (auto* v = get("data.norm")) d.norm = norm_from_string(*v);
  if (auto* v = get("data.frame_width"))
    d.frame_width = parse_double("data.frame_width", *v);
  if (auto* v = get("data.frame_height"))
    d.frame_height = parse_double("data.frame_height", *v);
  return d;
}

void split_to_kv(const SplitPlan& s, std::map<std::string, std::string>& kv) {
  kv["split.train_frac"] = fmt_g17(s.train_frac);
  kv["split.val_frac"] = fmt_g17(s.val_frac);
  kv["split.test_frac"] = fmt_g17(s.test_frac);
  kv["split.train_scenes"] = join_scenes(s.train_scenes);
  kv["split.val_scenes"] = join_scenes(s.val_scenes);
  kv["split.test_scenes"] = join_scenes(s.test_scenes);
  kv["split.seed"] = std::to_string(s.seed);
}

SplitPlan split_from_kv(const std::map<std::string, std::string>& kv) {
  SplitPlan s;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("split.train_frac")) s.train_frac = parse_double("split.train_frac", *v);
  if (auto* v = get("split.val_frac")) s.val_frac = parse_double("split.val_frac", *v);
  if (auto* v = get("split.test_frac")) s.test_frac = parse_double("split.test_frac", *v);
  if (auto* v = get("split.train_scenes")) s.train_scenes = split_scenes(*v);
  if (auto* v = get("split.val_scenes")) s.val_scenes = split_scenes(*v);
  if (auto* v = get("split.test_scenes")) s.test_scenes = split_scenes(*v);
  if (auto* v = get("split.seed")) s.seed = parse_u64("split.seed", *v);
  return s;
}

void check_data(const DatasetSpec& d) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("data config: " + what);
  };
  need(d.fps > 0.0, "fps must be > 0");
  need(d.annotation_stride >= 1, "annotation_stride must be >= 1");
  need(d.obs_len >= 1, "obs_len must be >= 1");
  need(d.pred_len >= 1, "pred_len must be >= 1");
  need(d.overlap >= 0.0 && d.overlap < 1.0, "overlap must lie in [0, 1)");
  need(d.frame_width > 0.0, "frame_width must be > 0");
  need(d.frame_height > 0.0, "frame_height must be > 0");
}

void check_split(const SplitPlan& s) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("split config: " + what);
  };
  need(s.train_frac >= 0.0 && s.val_frac >= 0.0 && s.test_frac >= 0.0,
       "fractions must be >= 0");
  const double sum = s.train_frac + s.val_frac + s.test_frac;
  need(std::abs(sum - 1.0) < 1e-9 || sum == 0.0,
       "fractions must sum to 1 (or all be 0 when scene lists are given)");
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  check_data(data);
  check_split(split);
  if (data.obs_len != model.obs_len)
    throw ConfigError("data.obs_len=" + std::to_string(data.obs_len) +
                      " disagrees with model.obs_len=" + std::to_string(model.obs_len));
  if (data.pred_len != model.pred_len)
    throw ConfigError("data.pred_len=" + std::to_string(data.pred_len) +
                      " disagrees with model.pred_len=" + std::to_string(model.pred_len));
}

std::string RunConfig::to_text() const {
  std::map<std::string, std::string> kv;
  model.to_kv(kv, "model.");
  train.to_kv(kv, "train.");
  data_to_kv(data, kv);
  split_to_kv(split, kv);
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected `key = value`, got `" + line + "`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (kv.count(key)) throw ConfigError(where + ": duplicate key `" + key + "`");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file `" + path + "`");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_kv_text(os.str(), path);
}

RunConfig run_config_from_kv(const std::map<std::string, std::string>& kv) {
  RunConfig defaults;
  std::map<std::string, std::string> known;
  defaults.model.to_kv(known, "model.");
  defaults.train.to_kv(known, "train.");
  data_to_kv(defaults.data, known);
  split_to_kv(defaults.split, known);
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw ConfigError("unknown config key `" + k + "`");

  RunConfig rc;
  rc.model = ModelConfig::from_kv(kv, "model.");
  rc.train = TrainConfig::from_kv(kv, "train.");
  rc.data = data_from_kv(kv);
  rc.split = split_from_kv(kv);
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path,
                          const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (!path.empty()) kv = read_kv_file(path);
  for (const auto& [k, v] : overrides) kv[k] = v;
  return run_config_from_kv(kv);
}

}  // namespace sgnet
