#include "sgnet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace sgnet {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'N', '1'};
constexpr std::uint64_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) {
    if (pos + n > buf.size()) throw IoError("truncated checkpoint: " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

const ParamBlock* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

void checkpoint_save(const std::string& path, const Checkpoint& c) {
  std::string header_text;
  {
    std::map<std::string, std::string> h = c.header;
    h["version"] = std::to_string(kVersion);
    h["blocks"] = std::to_string(c.blocks.size());
    std::ostringstream os;
    for (const auto& [k, v] : h) os << k << '=' << v << '\n';
    header_text = os.str();
  }
  std::string out;
  out.append(kMagic, 4);
  put_u64(out, header_text.size());
  out += header_text;
  for (const auto& b : c.blocks) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
    std::size_t n = 1;
    for (std::size_t d : b.shape) {
      put_u64(out, d);
      n *= d;
    }
    check_contract(n == b.data.size(), "checkpoint_save: block " + b.name +
                                           " shape does not match its data");
    for (float v : b.data) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();
  Reader r{buf, 0, path};
  if (r.bytes(4) != std::string(kMagic, 4))
    throw IoError("not a checkpoint (bad magic bytes): " + path);
  const std::uint64_t header_len = r.u64();
  std::istringstream hs(r.bytes(header_len));
  Checkpoint c;
  std::string line;
  while (std::getline(hs, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("malformed checkpoint header line `" + line + "`: " + path);
    c.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto vit = c.header.find("version");
  if (vit == c.header.end() || vit->second != std::to_string(kVersion))
    throw IoError("unsupported checkpoint version `" +
                  (vit == c.header.end() ? std::string("?") : vit->second) + "`: " + path);
  const auto bit = c.header.find("blocks");
  if (bit == c.header.end()) throw IoError("checkpoint header missing block count: " + path);
  const std::size_t n_blocks = std::stoull(bit->second);
  c.blocks.reserve(n_blocks);
  for (std::size_t i = 0; i < n_blocks; ++i) {
    ParamBlock b;
    b.name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      b.shape.push_back(r.u64());
      n *= b.shape.back();
    }
    b.data.resize(n);
    for (auto& v : b.data) v = r.f32();
    c.blocks.push_back(std::move(b));
  }
  if (r.pos != buf.size()) throw IoError("trailing bytes after checkpoint data: " + path);
  return c;
}

Checkpoint snapshot(const Model<float>& m, const AdamState<float>* adam,
                    const std::map<std::string, std::string>& extra) {
  Checkpoint c;
  c.header = extra;
  m.config().to_kv(c.header, "model.");
  for (const auto& np : m.params()) {
    ParamBlock b;
    b.name = np.name;
    b.shape = np.tensor.shape();
    b.data.assign(np.tensor.values().begin(), np.tensor.values().end());
    c.blocks.push_back(std::move(b));
  }
  if (adam) {
    c.header["adam.step"] = std::to_string(adam->step);
    for (const auto& np : m.params()) {
      auto it = adam->moments.find(np.name);
      if (it == adam->moments.end()) continue;
      c.blocks.push_back({"adam.m." + np.name, np.tensor.shape(), it->second.m});
      c.blocks.push_back({"adam.v." + np.name, np.tensor.shape(), it->second.v});
    }
  }
  return c;
}

void restore_model(Model<float>& m, const Checkpoint& c) {
  if (!(m.config() == c.model_config()))
    throw ConfigError("checkpoint was produced by a different model configuration");
  for (auto& np : m.params()) {
    const ParamBlock* b = c.find(np.name);
    if (!b) throw ConfigError("checkpoint is missing parameter block `" + np.name + "`");
    if (b->shape != np.tensor.shape())
      throw ConfigError("checkpoint block `" + np.name + "` has shape " +
                        shape_str(b->shape) + ", model expects " +
                        shape_str(np.tensor.shape()));
    auto dst = np.tensor.values_mut();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = b->data[i];
  }
}

void restore_adam(AdamState<float>& a, const Checkpoint& c) {
  const auto it = c.header.find("adam.step");
  if (it == c.header.end()) throw ConfigError("checkpoint holds no optimizer state");
  a.step = std::stoull(it->second);
  a.moments.clear();
  for (const auto& b : c.blocks) {
    if (b.name.rfind("adam.m.", 0) == 0) a.moments[b.name.substr(7)].m = b.data;
    else if (b.name.rfind("adam.v.", 0) == 0) a.moments[b.name.substr(7)].v = b.data;
  }
}

}  // namespace sgnet
