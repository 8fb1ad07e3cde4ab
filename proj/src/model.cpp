#include "sgnet/model.hpp"

#include <algorithm>
#include <cmath>

namespace sgnet {

std::string to_string(SgeVariant v) {
  switch (v) {
    case SgeVariant::Recurrent: return "recurrent";
    case SgeVariant::Feedforward: return "feedforward";
    case SgeVariant::Convolutional: return "convolutional";
  }
  return "recurrent";
}

std::string to_string(ModelMode m) {
  return m == ModelMode::Deterministic ? "deterministic" : "stochastic";
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::ED: return "ED";
    case Ablation::E: return "E";
    case Ablation::D: return "D";
  }
  return "ED";
}

SgeVariant sge_variant_from_string(const std::string& s) {
  if (s == "recurrent") return SgeVariant::Recurrent;
  if (s == "feedforward") return SgeVariant::Feedforward;
  if (s == "convolutional") return SgeVariant::Convolutional;
  throw ConfigError("unknown goal-estimator variant `" + s +
                    "` (expected recurrent, feedforward or convolutional)");
}

ModelMode model_mode_from_string(const std::string& s) {
  if (s == "stochastic") return ModelMode::Stochastic;
  if (s == "deterministic") return ModelMode::Deterministic;
  throw ConfigError("unknown mode `" + s + "` (expected stochastic or deterministic)");
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "ED") return Ablation::ED;
  if (s == "E") return Ablation::E;
  if (s == "D") return Ablation::D;
  throw ConfigError("unknown ablation `" + s + "` (expected ED, E or D)");
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model config: " + what);
  };
  need(input_dim >= 1, "input_dim must be >= 1");
  need(aux_dim < input_dim, "aux_dim must leave at least one base input column");
  need(output_dim == 2 || output_dim == 4, "output_dim must be 2 or 4");
  need(input_dim >= output_dim, "input_dim must cover the position columns");
  need(enc_hidden >= 1 && dec_hidden >= 1 && goal_hidden >= 1,
       "hidden sizes must be >= 1");
  need(obs_len >= 1, "obs_len must be >= 1");
  need(pred_len >= 1, "pred_len must be >= 1");
  need(k >= 1, "k must be >= 1");
  if (mode == ModelMode::Stochastic) need(latent_dim >= 1, "latent_dim must be >= 1");
}

namespace {

std::string kv_get(const std::map<std::string, std::string>& kv, const std::string& key,
                   const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::size_t kv_size(const std::map<std::string, std::string>& kv, const std::string& key,
                    std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size() || v < 0) throw std::invalid_argument(it->second);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": `" + it->second + "`");
  }
}

bool kv_bool(const std::map<std::string, std::string>& kv, const std::string& key,
             bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("bad value for " + key + ": `" + it->second + "` (expected true/false)");
}

}  // namespace

void ModelConfig::to_kv(std::map<std::string, std::string>& kv,
                        const std::string& prefix) const {
  kv[prefix + "input_dim"] = std::to_string(input_dim);
  kv[prefix + "aux_dim"] = std::to_string(aux_dim);
  kv[prefix + "output_dim"] = std::to_string(output_dim);
  kv[prefix + "enc_hidden"] = std::to_string(enc_hidden);
  kv[prefix + "dec_hidden"] = std::to_string(dec_hidden);
  kv[prefix + "goal_hidden"] = std::to_string(goal_hidden);
  kv[prefix + "latent_dim"] = std::to_string(latent_dim);
  kv[prefix + "obs_len"] = std::to_string(obs_len);
  kv[prefix + "pred_len"] = std::to_string(pred_len);
  kv[prefix + "k"] = std::to_string(k);
  kv[prefix + "sge"] = to_string(sge);
  kv[prefix + "mode"] = to_string(mode);
  kv[prefix + "ablation"] = to_string(ablation);
  kv[prefix + "faithful_relu"] = faithful_relu ? "true" : "false";
  kv[prefix + "embed_dim"] = std::to_string(embed_dim);
  kv[prefix + "dec_embed_dim"] = std::to_string(dec_embed_dim);
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv,
                                 const std::string& prefix) {
  ModelConfig c;
  c.input_dim = kv_size(kv, prefix + "input_dim", c.input_dim);
  c.aux_dim = kv_size(kv, prefix + "aux_dim", c.aux_dim);
  c.output_dim = kv_size(kv, prefix + "output_dim", c.output_dim);
  c.enc_hidden = kv_size(kv, prefix + "enc_hidden", c.enc_hidden);
  c.dec_hidden = kv_size(kv, prefix + "dec_hidden", c.dec_hidden);
  c.goal_hidden = kv_size(kv, prefix + "goal_hidden", c.goal_hidden);
  c.latent_dim = kv_size(kv, prefix + "latent_dim", c.latent_dim);
  c.obs_len = kv_size(kv, prefix + "obs_len", c.obs_len);
  c.pred_len = kv_size(kv, prefix + "pred_len", c.pred_len);
  c.k = kv_size(kv, prefix + "k", c.k);
  c.sge = sge_variant_from_string(kv_get(kv, prefix + "sge", to_string(c.sge)));
  c.mode = model_mode_from_string(kv_get(kv, prefix + "mode", to_string(c.mode)));
  c.ablation = ablation_from_string(kv_get(kv, prefix + "ablation", to_string(c.ablation)));
  c.faithful_relu = kv_bool(kv, prefix + "faithful_relu", c.faithful_relu);
  c.embed_dim = kv_size(kv, prefix + "embed_dim", c.embed_dim);
  c.dec_embed_dim = kv_size(kv, prefix + "dec_embed_dim", c.dec_embed_dim);
  c.validate();
  return c;
}

namespace {

// Length after a stride-2, kernel-3, pad-1 convolution.
std::size_t halved(std::size_t l) { return (l + 2 - 3) / 2 + 1; }

// Output padding making the matching transposed convolution hit `target`.
std::size_t up_pad(std::size_t target) { return target % 2 == 0 ? 1 : 0; }

}  // namespace

template <typename S>
Model<S> Model<S>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  RandomStream rng(seed);
  auto mat = [&](std::size_t r, std::size_t c) {
    return glorot_uniform<S>({r, c}, r, c, rng, true);
  };
  auto vec = [&](std::size_t n) { return Tensor<S>::zeros({n}, true); };
  auto conv_w = [&](std::size_t k, std::size_t cin, std::size_t cout) {
    return glorot_uniform<S>({k, cin, cout}, k * cin, k * cout, rng, true);
  };

  const std::size_t base_in = cfg.input_dim - cfg.aux_dim;
  const std::size_t ew = cfg.embed_width();
  const std::size_t gh = cfg.goal_hidden;
  const std::size_t d = cfg.output_dim;

  m.embed_w_ = mat(base_in, ew);
  m.embed_b_ = vec(ew);
  if (cfg.aux_dim > 0) {
    m.embed_aux_w_ = mat(cfg.aux_dim, ew);
    m.embed_aux_b_ = vec(ew);
  }
  m.enc_ = GruParams<S>::init(cfg.embed_total() + gh, cfg.enc_hidden, rng);
  m.sge_in_w_ = mat(cfg.enc_hidden, gh);
  m.sge_in_b_ = vec(gh);
  switch (cfg.sge) {
    case SgeVariant::Recurrent:
      m.sge_rnn_ = GruParams<S>::init(gh, gh, rng);
      break;
    case SgeVariant::Feedforward:
      m.sge_mlp_w_ = mat(gh, cfg.pred_len * gh);
      m.sge_mlp_b_ = vec(cfg.pred_len * gh);
      break;
    case SgeVariant::Convolutional:
      m.sge_conv1_w_ = conv_w(3, gh, gh);
      m.sge_conv1_b_ = vec(gh);
      m.sge_conv2_w_ = conv_w(3, gh, gh);
      m.sge_conv2_b_ = vec(gh);
      m.sge_deconv1_w_ = conv_w(3, gh, gh);
      m.sge_deconv1_b_ = vec(gh);
      m.sge_deconv2_w_ = conv_w(3, gh, gh);
      m.sge_deconv2_b_ = vec(gh);
      break;
  }
  m.goal_reg_w_ = mat(gh, d);
  m.goal_reg_b_ = vec(d);
  m.enc_att_w_ = mat(gh, 1);
  m.enc_att_b_ = vec(1);
  m.dec_att_w_ = mat(gh, 1);
  m.dec_att_b_ = vec(1);
  if (cfg.mode == ModelMode::Stochastic) {
    m.tgt_enc_ = GruParams<S>::init(d, gh, rng);
    m.recog_w_ = mat(cfg.enc_hidden + gh, 2 * cfg.latent_dim);
    m.recog_b_ = vec(2 * cfg.latent_dim);
    m.prior_w_ = mat(cfg.enc_hidden, 2 * cfg.latent_dim);
    m.prior_b_ = vec(2 * cfg.latent_dim);
    m.gen_w_ = mat(cfg.enc_hidden + cfg.latent_dim, cfg.dec_hidden);
    m.gen_b_ = vec(cfg.dec_hidden);
  } else {
    m.det_emb_w_ = mat(cfg.enc_hidden, cfg.dec_hidden);
    m.det_emb_b_ = vec(cfg.dec_hidden);
  }
  m.dec_in_w_ = mat(cfg.dec_hidden, cfg.dec_embed_width());
  m.dec_in_b_ = vec(cfg.dec_embed_width());
  m.dec_ = GruParams<S>::init(cfg.dec_embed_width() + gh, cfg.dec_hidden, rng);
  m.traj_reg_w_ = mat(cfg.dec_hidden, d);
  m.traj_reg_b_ = vec(d);
  return m;
}

template <typename S>
ParamList<S> Model<S>::params() const {
  ParamList<S> out;
  auto put = [&](const char* name, const Tensor<S>& t) {
    if (t.defined()) out.push_back({name, t});
  };
  put("embed.w", embed_w_);
  put("embed.b", embed_b_);
  put("embed_aux.w", embed_aux_w_);
  put("embed_aux.b", embed_aux_b_);
  enc_.collect("enc", out);
  put("sge_in.w", sge_in_w_);
  put("sge_in.b", sge_in_b_);
  if (cfg_.sge == SgeVariant::Recurrent) sge_rnn_.collect("sge_rnn", out);
  put("sge_mlp.w", sge_mlp_w_);
  put("sge_mlp.b", sge_mlp_b_);
  put("sge_conv1.w", sge_conv1_w_);
  put("sge_conv1.b", sge_conv1_b_);
  put("sge_conv2.w", sge_conv2_w_);
  put("sge_conv2.b", sge_conv2_b_);
  put("sge_deconv1.w", sge_deconv1_w_);
  put("sge_deconv1.b", sge_deconv1_b_);
  put("sge_deconv2.w", sge_deconv2_w_);
  put("sge_deconv2.b", sge_deconv2_b_);
  put("goal_reg.w", goal_reg_w_);
  put("goal_reg.b", goal_reg_b_);
  put("enc_att.w", enc_att_w_);
  put("enc_att.b", enc_att_b_);
  put("dec_att.w", dec_att_w_);
  put("dec_att.b", dec_att_b_);
  if (cfg_.mode == ModelMode::Stochastic) tgt_enc_.collect("tgt_enc", out);
  put("recog.w", recog_w_);
  put("recog.b", recog_b_);
  put("prior.w", prior_w_);
  put("prior.b", prior_b_);
  put("gen.w", gen_w_);
  put("gen.b", gen_b_);
  put("det_emb.w", det_emb_w_);
  put("det_emb.b", det_emb_b_);
  put("dec_in.w", dec_in_w_);
  put("dec_in.b", dec_in_b_);
  dec_.collect("dec", out);
  put("traj_reg.w", traj_reg_w_);
  put("traj_reg.b", traj_reg_b_);
  return out;
}

template <typename S>
Model<S> Model<S>::shared_clone() const {
  Model m;
  m.cfg_ = cfg_;
  auto view = [](const Tensor<S>& t) {
    return t.defined() ? t.leaf_view(true) : Tensor<S>{};
  };
  auto view_gru = [&](const GruParams<S>& g) {
    GruParams<S> v;
    if (!g.w_xz.defined()) return v;
    v.w_xz = view(g.w_xz);
    v.w_hz = view(g.w_hz);
    v.b_z = view(g.b_z);
    v.w_xr = view(g.w_xr);
    v.w_hr = view(g.w_hr);
    v.b_r = view(g.b_r);
    v.w_xc = view(g.w_xc);
    v.w_hc = view(g.w_hc);
    v.b_c = view(g.b_c);
    return v;
  };
  m.embed_w_ = view(embed_w_);
  m.embed_b_ = view(embed_b_);
  m.embed_aux_w_ = view(embed_aux_w_);
  m.embed_aux_b_ = view(embed_aux_b_);
  m.enc_ = view_gru(enc_);
  m.sge_in_w_ = view(sge_in_w_);
  m.sge_in_b_ = view(sge_in_b_);
  m.sge_rnn_ = view_gru(sge_rnn_);
  m.sge_mlp_w_ = view(sge_mlp_w_);
  m.sge_mlp_b_ = view(sge_mlp_b_);
  m.sge_conv1_w_ = view(sge_conv1_w_);
  m.sge_conv1_b_ = view(sge_conv1_b_);
  m.sge_conv2_w_ = view(sge_conv2_w_);
  m.sge_conv2_b_ = view(sge_conv2_b_);
  m.sge_deconv1_w_ = view(sge_deconv1_w_);
  m.sge_deconv1_b_ = view(sge_deconv1_b_);
  m.sge_deconv2_w_ = view(sge_deconv2_w_);
  m.sge_deconv2_b_ = view(sge_deconv2_b_);
  m.goal_reg_w_ = view(goal_reg_w_);
  m.goal_reg_b_ = view(goal_reg_b_);
  m.enc_att_w_ = view(enc_att_w_);
  m.enc_att_b_ = view(enc_att_b_);
  m.dec_att_w_ = view(dec_att_w_);
  m.dec_att_b_ = view(dec_att_b_);
  m.tgt_enc_ = view_gru(tgt_enc_);
  m.recog_w_ = view(recog_w_);
  m.recog_b_ = view(recog_b_);
  m.prior_w_ = view(prior_w_);
  m.prior_b_ = view(prior_b_);
  m.gen_w_ = view(gen_w_);
  m.gen_b_ = view(gen_b_);
  m.det_emb_w_ = view(det_emb_w_);
  m.det_emb_b_ = view(det_emb_b_);
  m.dec_in_w_ = view(dec_in_w_);
  m.dec_in_b_ = view(dec_in_b_);
  m.dec_ = view_gru(dec_);
  m.traj_reg_w_ = view(traj_reg_w_);
  m.traj_reg_b_ = view(traj_reg_b_);
  return m;
}

template <typename S>
Tensor<S> Model<S>::embed_input(const Tensor<S>& x_raw) const {
  check_dim(x_raw.shape().size() == 2 && x_raw.shape()[1] == cfg_.input_dim,
            "embed_input: expected [n x " + std::to_string(cfg_.input_dim) + "]");
  const std::size_t base_in = cfg_.input_dim - cfg_.aux_dim;
  auto base = cfg_.aux_dim > 0 ? slice_lastaxis(x_raw, 0, base_in) : x_raw;
  auto emb = relu(affine(base, embed_w_, embed_b_));
  if (cfg_.aux_dim == 0) return emb;
  auto aux = slice_lastaxis(x_raw, base_in, cfg_.aux_dim);
  return concat_lastaxis(emb, relu(affine(aux, embed_aux_w_, embed_aux_b_)));
}

template <typename S>
Tensor<S> Model<S>::encoder_step(const Tensor<S>& x_emb, const Tensor<S>& goal_in,
                                 const Tensor<S>& h) const {
  return gru_cell(concat_lastaxis(x_emb, goal_in), h, enc_);
}

template <typename S>
Tensor<S> Model<S>::sge_hidden_seq(const Tensor<S>& h_enc) const {
  const std::size_t ld = cfg_.pred_len;
  const std::size_t gh = cfg_.goal_hidden;
  auto su = relu(affine(h_enc, sge_in_w_, sge_in_b_));  // [1 x gh]
  switch (cfg_.sge) {
    case SgeVariant::Recurrent: {
      std::vector<Tensor<S>> hiddens;
      hiddens.reserve(ld);
      Tensor<S> h = su;
      Tensor<S> x = Tensor<S>::zeros({1, gh});
      for (std::size_t i = 0; i < ld; ++i) {
        h = gru_cell(x, h, sge_rnn_);
        hiddens.push_back(h);
        x = h;
      }
      return stack_rows(hiddens);
    }
    case SgeVariant::Feedforward:
      return reshape(affine(su, sge_mlp_w_, sge_mlp_b_), {ld, gh});
    case SgeVariant::Convolutional: {
      auto seq = tile_rows(su, ld);  // [ld x gh]
      const std::size_t l1 = halved(ld);
      auto c1 = relu(conv1d(seq, sge_conv1_w_, sge_conv1_b_, 2, 1));
      auto c2 = relu(conv1d(c1, sge_conv2_w_, sge_conv2_b_, 2, 1));
      auto d1 = relu(deconv1d(c2, sge_deconv1_w_, sge_deconv1_b_, 2, 1, up_pad(l1)));
      return deconv1d(d1, sge_deconv2_w_, sge_deconv2_b_, 2, 1, up_pad(ld));
    }
  }
  throw ConfigError("sge_forward: unknown goal-estimator variant");
}

template <typename S>
typename Model<S>::GoalSeq Model<S>::sge_forward(const Tensor<S>& h_enc) const {
  GoalSeq g;
  g.hiddens = sge_hidden_seq(h_enc);
  g.positions = regress_goal_positions(g.hiddens);
  return g;
}

template <typename S>
Tensor<S> Model<S>::regress_output(const Tensor<S>& h, const Tensor<S>& w,
                                   const Tensor<S>& b) const {
  auto y = affine(h, w, b);
  return cfg_.faithful_relu ? relu(y) : y;
}

template <typename S>
Tensor<S> Model<S>::regress_goal_positions(const Tensor<S>& hiddens) const {
  return regress_output(hiddens, goal_reg_w_, goal_reg_b_);
}

template <typename S>
typename Model<S>::Attention Model<S>::attend(const Tensor<S>& hiddens, const Tensor<S>& w,
                                              const Tensor<S>& b) const {
  check_dim(hiddens.shape().size() == 2 && hiddens.shape()[0] >= 1,
            "attend: need a non-empty hidden sequence");
  auto scores = transpose(affine(tanh_op(hiddens), w, b));  // [1 x n]
  Attention a;
  a.weights = softmax_lastaxis(scores);
  a.out = matmul(a.weights, hiddens);  // [1 x width]
  return a;
}

template <typename S>
typename Model<S>::Attention Model<S>::aggregate_goals_encoder(
    const Tensor<S>& goal_hiddens) const {
  return attend(goal_hiddens, enc_att_w_, enc_att_b_);
}

template <typename S>
typename Model<S>::Attention Model<S>::aggregate_goals_decoder(const Tensor<S>& goal_hiddens,
                                                               std::size_t step_i) const {
  const std::size_t ld = goal_hiddens.shape()[0];
  check_contract(step_i >= 1 && step_i <= ld,
                 "aggregate_goals_decoder: step " + std::to_string(step_i) +
                     " outside 1.." + std::to_string(ld));
  auto suffix = slice_rows(goal_hiddens, step_i - 1, ld - step_i + 1);
  return attend(suffix, dec_att_w_, dec_att_b_);
}

template <typename S>
Tensor<S> Model<S>::target_encode(const Tensor<S>& y) const {
  if (cfg_.mode == ModelMode::Deterministic)
    throw ModeError("target encoder absent in deterministic mode");
  check_dim(y.shape().size() == 2 && y.shape()[1] == cfg_.output_dim,
            "target_encode: expected [n x " + std::to_string(cfg_.output_dim) + "]");
  Tensor<S> h = Tensor<S>::zeros({1, cfg_.goal_hidden});
  for (std::size_t i = 0; i < y.shape()[0]; ++i)
    h = gru_cell(slice_rows(y, i, 1), h, tgt_enc_);
  return h;
}

template <typename S>
Gaussian<S> Model<S>::cvae_recognize(const Tensor<S>& h_enc, const Tensor<S>& h_y) const {
  if (cfg_.mode == ModelMode::Deterministic)
    throw ModeError("recognition network absent in deterministic mode");
  auto out = affine(concat_lastaxis(h_enc, h_y), recog_w_, recog_b_);
  return {slice_lastaxis(out, 0, cfg_.latent_dim),
          slice_lastaxis(out, cfg_.latent_dim, cfg_.latent_dim)};
}

template <typename S>
Gaussian<S> Model<S>::cvae_prior(const Tensor<S>& h_enc) const {
  if (cfg_.mode == ModelMode::Deterministic)
    throw ModeError("prior network absent in deterministic mode");
  auto out = affine(h_enc, prior_w_, prior_b_);
  return {slice_lastaxis(out, 0, cfg_.latent_dim),
          slice_lastaxis(out, cfg_.latent_dim, cfg_.latent_dim)};
}

template <typename S>
Tensor<S> Model<S>::sample_latent(const Gaussian<S>& g, std::size_t k, RandomStream& rng,
                                  bool clamp_sigma) const {
  if (cfg_.mode == ModelMode::Deterministic)
    throw ModeError("latent sampling absent in deterministic mode");
  check_contract(k >= 1, "sample_latent: k must be >= 1");
  const std::size_t L = cfg_.latent_dim;
  check_dim(g.mu.defined() && g.mu.size() == L && g.logvar.size() == L,
            "sample_latent: distribution width mismatch");
  auto mu_k = tile_rows(g.mu, k);
  if (clamp_sigma) return mu_k;
  std::vector<S> eps(k * L);
  for (auto& e : eps) e = static_cast<S>(rng.normal());
  auto sigma = exp_op(scale(g.logvar, 0.5));
  return add(mu_k, mul(tile_rows(sigma, k), Tensor<S>::constant({k, L}, std::move(eps))));
}

template <typename S>
Tensor<S> Model<S>::cvae_generate(const Tensor<S>& h_enc, const Tensor<S>& z) const {
  if (cfg_.mode == ModelMode::Deterministic)
    throw ModeError("generation network absent in deterministic mode");
  check_dim(z.shape().size() == 2 && z.shape()[1] == cfg_.latent_dim,
            "cvae_generate: z must be [k x latent_dim]");
  auto h_k = tile_rows(h_enc, z.shape()[0]);
  return affine(concat_lastaxis(h_k, z), gen_w_, gen_b_);
}

template <typename S>
ForwardResult<S> Model<S>::forward_window(const ObservationWindow& w,
                                          const ForwardOptions& opt) const {
  check_dim(w.obs_len == cfg_.obs_len, "forward_window: window obs_len " +
                                           std::to_string(w.obs_len) + " vs model " +
                                           std::to_string(cfg_.obs_len));
  check_dim(w.in_dim == cfg_.input_dim, "forward_window: window in_dim " +
                                            std::to_string(w.in_dim) + " vs model " +
                                            std::to_string(cfg_.input_dim));
  check_dim(w.out_dim == cfg_.output_dim, "forward_window: window out_dim mismatch");
  check_dim(w.pred_len == cfg_.pred_len, "forward_window: window pred_len mismatch");
  if (opt.train_mode)
    check_contract(w.fut.size() == cfg_.pred_len * cfg_.output_dim,
                   "forward_window: training needs future ground truth");

  const std::size_t le = cfg_.obs_len;
  const std::size_t gh = cfg_.goal_hidden;
  const std::size_t K = cfg_.mode == ModelMode::Deterministic
                            ? 1
                            : (opt.k_override ? opt.k_override : cfg_.k);
  RandomStream rng(opt.seed);

  Tensor<S> h_e = Tensor<S>::zeros({1, cfg_.enc_hidden});
  Tensor<S> goal_feat = Tensor<S>::zeros({1, gh});
  Tensor<S> h_y;
  ForwardResult<S> out;
  out.enc_hiddens.reserve(le);

  for (std::size_t t = 0; t < le; ++t) {
    std::vector<S> row(cfg_.input_dim);
    for (std::size_t c = 0; c < cfg_.input_dim; ++c)
      row[c] = static_cast<S>(w.obs[t * w.in_dim + c]);
    auto x_emb = embed_input(Tensor<S>::constant({1, cfg_.input_dim}, std::move(row)));
    auto enc_goal =
        cfg_.ablation == Ablation::D ? Tensor<S>::zeros({1, gh}) : goal_feat;
    h_e = encoder_step(x_emb, enc_goal, h_e);
    out.enc_hiddens.emplace_back(h_e.values().begin(), h_e.values().end());

    auto goals = sge_hidden_seq(h_e);
    if (opt.goal_perturb_step == -1 || opt.goal_perturb_step == static_cast<int>(t))
      goals = add_scalar(goals, opt.goal_perturb);
    auto enc_att = aggregate_goals_encoder(goals);
    goal_feat = enc_att.out;

    if (!(opt.decode_all || t + 1 == le)) continue;

    PredictionSet<S> ps;
    ps.encoder_step = t;
    ps.goal_positions = regress_goal_positions(goals);
    ps.enc_attention = enc_att.weights;

    Tensor<S> h_d;
    if (cfg_.mode == ModelMode::Stochastic) {
      auto prior = cvae_prior(h_e);
      ps.mu_p = prior.mu;
      ps.logvar_p = prior.logvar;
      Gaussian<S> source = prior;
      if (opt.train_mode) {
        if (!h_y.defined()) {
          std::vector<S> fut(w.fut.size());
          for (std::size_t i = 0; i < fut.size(); ++i) fut[i] = static_cast<S>(w.fut[i]);
          h_y = target_encode(
              Tensor<S>::constant({cfg_.pred_len, cfg_.output_dim}, std::move(fut)));
        }
        auto q = cvae_recognize(h_e, h_y);
        ps.mu_q = q.mu;
        ps.logvar_q = q.logvar;
        source = q;
      }
      auto z = sample_latent(source, K, rng, opt.clamp_sigma);
      h_d = cvae_generate(h_e, z);
    } else {
      h_d = relu(affine(h_e, det_emb_w_, det_emb_b_));
    }

    std::vector<std::vector<Tensor<S>>> rows(K);
    for (std::size_t i = 1; i <= cfg_.pred_len; ++i) {
      auto x_d = relu(affine(h_d, dec_in_w_, dec_in_b_));
      auto agg = aggregate_goals_decoder(goals, i);
      ps.dec_attention.push_back(agg.weights);
      auto dec_goal = cfg_.ablation == Ablation::E ? Tensor<S>::zeros({K, gh})
                                                   : tile_rows(agg.out, K);
      h_d = gru_cell(concat_lastaxis(x_d, dec_goal), h_d, dec_);
      auto y = regress_output(h_d, traj_reg_w_, traj_reg_b_);  // [K x d]
      for (std::size_t k = 0; k < K; ++k) rows[k].push_back(slice_rows(y, k, 1));
    }
    ps.trajectories.reserve(K);
    for (std::size_t k = 0; k < K; ++k) ps.trajectories.push_back(stack_rows(rows[k]));
    out.steps.push_back(std::move(ps));
  }
  return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace sgnet
