#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgnet/data.hpp"
#include "sgnet/gru.hpp"
#include "sgnet/params.hpp"
#include "sgnet/tensor.hpp"

namespace sgnet {

enum class SgeVariant { Recurrent, Feedforward, Convolutional };
enum class ModelMode { Stochastic, Deterministic };
enum class Ablation { ED, E, D };

std::string to_string(SgeVariant v);
std::string to_string(ModelMode m);
std::string to_string(Ablation a);
SgeVariant sge_variant_from_string(const std::string& s);
ModelMode model_mode_from_string(const std::string& s);
Ablation ablation_from_string(const std::string& s);

struct ModelConfig {
  std::size_t input_dim = 6;
  std::size_t aux_dim = 0;  // trailing auxiliary columns get their own embedding
  std::size_t output_dim = 2;
  std::size_t enc_hidden = 512;
  std::size_t dec_hidden = 512;
  std::size_t goal_hidden = 128;
  std::size_t latent_dim = 32;
  std::size_t obs_len = 8;
  std::size_t pred_len = 12;
  std::size_t k = 20;
  SgeVariant sge = SgeVariant::Recurrent;
  ModelMode mode = ModelMode::Stochastic;
  Ablation ablation = Ablation::ED;
  bool faithful_relu = false;  // rectify regressed coordinates (disabled by default)
  std::size_t embed_dim = 0;      // 0 -> max(4, enc_hidden / 4)
  std::size_t dec_embed_dim = 0;  // 0 -> max(4, dec_hidden / 4)

  void validate() const;
  std::size_t effective_k() const { return mode == ModelMode::Deterministic ? 1 : k; }
  std::size_t embed_width() const {
    return embed_dim ? embed_dim : std::max<std::size_t>(4, enc_hidden / 4);
  }
  std::size_t embed_total() const { return embed_width() * (aux_dim > 0 ? 2 : 1); }
  std::size_t dec_embed_width() const {
    return dec_embed_dim ? dec_embed_dim : std::max<std::size_t>(4, dec_hidden / 4);
  }

  void to_kv(std::map<std::string, std::string>& kv, const std::string& prefix) const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv,
                             const std::string& prefix);
  bool operator==(const ModelConfig&) const = default;
};

// How one forward pass runs; fields beyond `seed` are evaluation/test knobs.
struct ForwardOptions {
  bool train_mode = false;  // enables the recognition branch (needs window.fut)
  bool decode_all = true;   // decode at every encoder step, not just the last
  std::uint64_t seed = 1;
  std::size_t k_override = 0;  // proposals to draw; 0 = model config
  bool clamp_sigma = false;    // force sigma = 0 when sampling latents
  // Adds a constant to every goal hidden produced at `goal_perturb_step`
  // (-1 = every encoder step) before regression and aggregation.
  double goal_perturb = 0.0;
  int goal_perturb_step = -2;  // -2 = disabled
};

// Outputs of one decode: K proposal trajectories, the stepwise goals, and the
// attention weight rows that produced them.
template <typename S>
struct PredictionSet {
  std::vector<Tensor<S>> trajectories;  // K tensors [pred_len x d]
  Tensor<S> goal_positions;             // [pred_len x d]
  Tensor<S> enc_attention;              // [1 x pred_len]
  std::vector<Tensor<S>> dec_attention;  // step i (1-based): [1 x (pred_len - i + 1)]
  Tensor<S> mu_q, logvar_q;  // defined only in stochastic training
  Tensor<S> mu_p, logvar_p;  // defined only in stochastic mode
  std::size_t encoder_step = 0;
};

template <typename S>
struct ForwardResult {
  std::vector<PredictionSet<S>> steps;       // one per decoded encoder step
  std::vector<std::vector<S>> enc_hiddens;   // snapshot per encoder step
};

template <typename S>
struct Gaussian {
  Tensor<S> mu, logvar;
};

template <typename S>
class Model {
 public:
  static Model init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  // Registration order is fixed; checkpoints and the optimizer rely on it.
  ParamList<S> params() const;
  // Same values (shared storage), fresh gradient slots; for worker threads.
  Model shared_clone() const;

  Tensor<S> embed_input(const Tensor<S>& x_raw) const;
  Tensor<S> encoder_step(const Tensor<S>& x_emb, const Tensor<S>& goal_in,
                         const Tensor<S>& h) const;

  struct GoalSeq {
    Tensor<S> hiddens;    // [pred_len x goal_hidden]
    Tensor<S> positions;  // [pred_len x d]
  };
  // Runs the configured goal-estimator variant from the current encoder
  // hidden and regresses goal positions from the hiddens.
  GoalSeq sge_forward(const Tensor<S>& h_enc) const;
  Tensor<S> regress_goal_positions(const Tensor<S>& hiddens) const;

  struct Attention {
    Tensor<S> out;      // [1 x goal_hidden]
    Tensor<S> weights;  // [1 x n]
  };
  Attention aggregate_goals_encoder(const Tensor<S>& goal_hiddens) const;
  // step_i is 1-based; attends the suffix of length pred_len - step_i + 1.
  Attention aggregate_goals_decoder(const Tensor<S>& goal_hiddens, std::size_t step_i) const;

  Tensor<S> target_encode(const Tensor<S>& y) const;
  Gaussian<S> cvae_recognize(const Tensor<S>& h_enc, const Tensor<S>& h_y) const;
  Gaussian<S> cvae_prior(const Tensor<S>& h_enc) const;
  // [K x latent_dim], reparameterized draws.
  Tensor<S> sample_latent(const Gaussian<S>& g, std::size_t k, RandomStream& rng,
                          bool clamp_sigma = false) const;
  Tensor<S> cvae_generate(const Tensor<S>& h_enc, const Tensor<S>& z) const;

  ForwardResult<S> forward_window(const ObservationWindow& w,
                                  const ForwardOptions& opt) const;

 private:
  ModelConfig cfg_;

  Tensor<S> embed_w_, embed_b_;          // base feature group
  Tensor<S> embed_aux_w_, embed_aux_b_;  // auxiliary group (aux_dim > 0)
  GruParams<S> enc_;
  Tensor<S> sge_in_w_, sge_in_b_;
  GruParams<S> sge_rnn_;                       // recurrent variant
  Tensor<S> sge_mlp_w_, sge_mlp_b_;            // feedforward variant
  Tensor<S> sge_conv1_w_, sge_conv1_b_;        // convolutional variant
  Tensor<S> sge_conv2_w_, sge_conv2_b_;
  Tensor<S> sge_deconv1_w_, sge_deconv1_b_;
  Tensor<S> sge_deconv2_w_, sge_deconv2_b_;
  Tensor<S> goal_reg_w_, goal_reg_b_;
  Tensor<S> enc_att_w_, enc_att_b_;
  Tensor<S> dec_att_w_, dec_att_b_;
  GruParams<S> tgt_enc_;                 // stochastic mode
  Tensor<S> recog_w_, recog_b_;
  Tensor<S> prior_w_, prior_b_;
  Tensor<S> gen_w_, gen_b_;
  Tensor<S> det_emb_w_, det_emb_b_;      // deterministic mode
  Tensor<S> dec_in_w_, dec_in_b_;
  GruParams<S> dec_;
  Tensor<S> traj_reg_w_, traj_reg_b_;

  Tensor<S> regress_output(const Tensor<S>& h, const Tensor<S>& w, const Tensor<S>& b) const;
  Attention attend(const Tensor<S>& hiddens, const Tensor<S>& w, const Tensor<S>& b) const;
  Tensor<S> sge_hidden_seq(const Tensor<S>& h_enc) const;
};

}  // namespace sgnet
