#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mataformer/rng.hpp"
#include "mataformer/tensor.hpp"

namespace mata {

enum class TimeMode { kMata, kSinusoidal, kNone };

// Constants of the constrained parameter projections.
struct BiasProjection {
  double tau = 60.0;            // seconds; log-distance granularity
  double gamma_mu = 10.0;       // upper bound of the peak offset
  double lambda = 4.0;          // residual sensitivity in logit space
  double alpha_floor = 1e-4;    // hard lower clamp on the decay rate
  double alpha_ceiling = 2.5;   // hard upper clamp on the decay rate
};

double log_distance(int64_t ti, int64_t tj, double tau);

// D[i][j] = ln(|t_i - t_j| / tau + 1); symmetric, zero diagonal, nonnegative
Tensor log_distance_matrix(const std::vector<int64_t>& t, double tau);

// M[i][j] = 0 where t_j <= t_i else -inf; simultaneous events see each other
Tensor causal_mask(const std::vector<int64_t>& t);

// clamp(alpha_bar * exp(delta_alpha), floor, ceiling)
double project_alpha(double alpha_bar, double delta_alpha, double floor = 1e-4,
                     double ceiling = 2.5);

// sigmoid(logit(mu_bar / gamma_mu) + lambda * delta_mu) * gamma_mu;
// mu_bar / gamma_mu must lie strictly inside (0, 1)
double project_mu(double mu_bar, double delta_mu, double lambda = 4.0, double gamma_mu = 10.0);

// Static per-head priors. Peaks tile the span [0, 0.95 * gamma_mu] linearly;
// the implied probabilities are clamped to [0.05, 0.95] and stored as logits.
// Slopes anchor to alpha_base with a uniform perturbation in [-0.05, 0.05].
struct PriorInit {
  std::vector<double> alpha_bar;
  std::vector<double> mu_prob;   // clamped probabilities mu_bar / gamma_mu
  std::vector<double> mu_logit;  // logit(mu_prob), the stored parameter
};

PriorInit init_priors(size_t n_heads, double gamma_mu, double alpha_base, Rng& rng);

// two-layer perceptron residuals: [delta_alpha, delta_mu] = tanh(q W1 + b1) W2 + b2
Tensor predict_residuals(const Tensor& q_head, const Tensor& w1, const Tensor& b1,
                         const Tensor& w2, const Tensor& b2);

// per-head diagnostics captured during a forward pass
struct HeadCapture {
  std::vector<double> mu;     // per query
  std::vector<double> alpha;  // per query
  std::vector<double> bias;   // [S, S] row-major, -alpha_i |D_ij - mu_i|
};

struct AttnCapture {
  std::vector<HeadCapture> heads;
};

// Multi-head self-attention with the query-conditioned Laplacian temporal
// bias and the timestamp causal mask. Weights use the row-vector convention
// (x W); projections carry no bias, the residual perceptron does.
struct MataAttentionLayer {
  size_t d_model = 0;
  size_t n_heads = 0;
  BiasProjection proj;

  Tensor wq, wk, wv, wo;              // [d_model, d_model]
  Tensor alpha_bar;                   // [H]
  Tensor mu_logit;                    // [H] peak priors in logit space
  Tensor fphi_w1, fphi_b1, fphi_w2, fphi_b2;  // [d_h,64],[64],[64,2],[2]

  bool dynamic_alpha = true;  // false freezes delta_alpha at zero
  bool dynamic_mu = true;     // false freezes delta_mu at zero

  static constexpr size_t kResidualHidden = 64;

  static MataAttentionLayer init(size_t d_model, size_t n_heads, const BiasProjection& proj,
                                 double alpha_base, Rng& rng);

  size_t head_dim() const { return d_model / n_heads; }

  // x: [S, d_model]; t: timestamps aligned with rows. time_mode selects the
  // Laplacian-bias path (kMata) or plain causal attention (others).
  Tensor forward(const Tensor& x, const std::vector<int64_t>& t, TimeMode time_mode,
                 AttnCapture* capture = nullptr) const;

  double static_alpha(size_t head) const;
  double static_mu(size_t head) const;
};

// Phi(t)[2j] = sin(w_j t), Phi(t)[2j+1] = cos(w_j t), w_j = T^(-2j/d).
// ||Phi(t)||^2 = d/2 for every t. Used only by the additive-encoding path.
std::vector<double> sinusoidal_time_encoding(double t, size_t d, double t_horizon);

}  // namespace mata
