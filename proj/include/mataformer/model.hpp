#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mataformer/attention.hpp"
#include "mataformer/tensor.hpp"

namespace mata {

TimeMode time_mode_from_string(const std::string& s);
std::string time_mode_to_string(TimeMode m);

struct ModelConfig {
  size_t d_model = 64;
  size_t n_layers = 2;
  size_t n_heads = 4;
  size_t d_ff = 172;
  size_t n_risks = 8;
  std::vector<double> horizons = {6, 12, 24, 48};  // hours
  size_t input_dim = 64;
  double tau = 60.0;
  double gamma_mu = 10.0;
  double lambda = 4.0;
  double alpha_base = 1.0;
  TimeMode time_mode = TimeMode::kMata;

  // optional keys with defaults
  bool gated_ffn = true;
  bool dynamic_alpha = true;
  bool dynamic_mu = true;
  double sin_gamma = 64.0;          // embedding scale for the additive path
  double sin_horizon = 1209600.0;   // temporal scaling horizon T

  size_t output_width() const { return n_risks * horizons.size(); }
  void validate() const;

  static ModelConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ModelConfig load(const std::string& path);
};

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool predictor_group = false;  // residual perceptron parameters
};

struct TransformerBlock {
  Tensor attn_norm_gain;
  MataAttentionLayer attn;
  Tensor ffn_norm_gain;
  Tensor w_gate, w_up, w_down;  // gated FFN (w_gate undefined when plain)
  bool gated = true;
};

// Input projection, N pre-norm blocks (attention + feed-forward), final norm,
// sigmoid risk head of width n_risks * n_horizons.
class MataFormer {
 public:
  MataFormer() = default;
  static MataFormer init(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // embeddings: one unit vector per event; t: nondecreasing timestamps.
  // Output [S, n_risks * n_horizons], entries in (0, 1). Position i depends
  // only on events with t_j <= t_i.
  Tensor forward(const std::vector<std::vector<double>>& embeddings,
                 const std::vector<int64_t>& t,
                 std::vector<AttnCapture>* capture = nullptr) const;

  std::vector<NamedParam> parameters();
  std::vector<NamedParam> parameters() const;

  size_t count_parameters(bool predictor_group_only = false) const;
  // closed-form count from the configuration alone
  static size_t expected_parameter_count(const ModelConfig& cfg, bool predictor_group_only = false);

  const std::vector<TransformerBlock>& blocks() const { return blocks_; }
  std::vector<TransformerBlock>& blocks() { return blocks_; }

  void set_dynamic(bool dynamic_alpha, bool dynamic_mu);

  void save_checkpoint(const std::string& path) const;
  static MataFormer load_checkpoint(const std::string& path);

 private:
  ModelConfig cfg_;
  Tensor input_proj_;  // [input_dim, d_model]
  std::vector<TransformerBlock> blocks_;
  Tensor final_norm_gain_;
  Tensor head_w_, head_b_;  // [d_model, R*K], [R*K]

  friend class ModelTestAccess;
};

}  // namespace mata
