#include "mataformer/attention.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mataformer/errors.hpp"

namespace mata {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> xavier_uniform(size_t fan_in, size_t fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (auto& x : w) x = rng.uniform(-bound, bound);
  return w;
}
}  // namespace

double log_distance(int64_t ti, int64_t tj, double tau) {
  return std::log(std::fabs(static_cast<double>(ti - tj)) / tau + 1.0);
}

Tensor log_distance_matrix(const std::vector<int64_t>& t, double tau) {
  if (tau <= 0) throw std::invalid_argument("log_distance_matrix: tau must be > 0");
  size_t s = t.size();
  std::vector<double> d(s * s, 0.0);
  for (size_t i = 0; i < s; ++i)
    for (size_t j = i + 1; j < s; ++j) {
      double v = log_distance(t[i], t[j], tau);
      d[i * s + j] = v;
      d[j * s + i] = v;
    }
  return Tensor::from_data({s, s}, std::move(d));
}

Tensor causal_mask(const std::vector<int64_t>& t) {
  size_t s = t.size();
  std::vector<double> m(s * s, 0.0);
  for (size_t i = 0; i < s; ++i)
    for (size_t j = 0; j < s; ++j)
      if (t[j] > t[i]) m[i * s + j] = kNegInf;
  return Tensor::from_data({s, s}, std::move(m));
}

double project_alpha(double alpha_bar, double delta_alpha, double floor, double ceiling) {
  double v = alpha_bar * std::exp(delta_alpha);
  return std::min(ceiling, std::max(floor, v));
}

double project_mu(double mu_bar, double delta_mu, double lambda, double gamma_mu) {
  double p = mu_bar / gamma_mu;
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("project_mu: mu_bar/gamma_mu must lie in (0, 1)");
  double logit = std::log(p / (1.0 - p));
  double z = logit + lambda * delta_mu;
  // same operation order as the tensor path so warm-start equality is bitwise
  double sig = 1.0 / (1.0 + std::exp(-z));
  return sig * gamma_mu;
}

PriorInit init_priors(size_t n_heads, double gamma_mu, double alpha_base, Rng& rng) {
  if (n_heads < 2) throw std::invalid_argument("init_priors: need at least 2 heads");
  PriorInit out;
  out.alpha_bar.resize(n_heads);
  out.mu_prob.resize(n_heads);
  out.mu_logit.resize(n_heads);
  for (size_t h = 0; h < n_heads; ++h) {
    double mu_bar =
        static_cast<double>(h) / static_cast<double>(n_heads - 1) * 0.95 * gamma_mu;
    double p = mu_bar / gamma_mu;
    p = std::min(0.95, std::max(0.05, p));
    out.mu_prob[h] = p;
    out.mu_logit[h] = std::log(p / (1.0 - p));
    out.alpha_bar[h] = alpha_base + rng.uniform(-0.05, 0.05);
  }
  return out;
}

Tensor predict_residuals(const Tensor& q_head, const Tensor& w1, const Tensor& b1,
                         const Tensor& w2, const Tensor& b2) {
  if (q_head.ndim() != 2 || q_head.dim(1) != w1.dim(0))
    throw std::invalid_argument("predict_residuals: query width " +
                                std::to_string(q_head.ndim() == 2 ? q_head.dim(1) : 0) +
                                " does not match W1 rows " + std::to_string(w1.dim(0)));
  Tensor hidden = tanh(add(matmul(q_head, w1), b1));
  return add(matmul(hidden, w2), b2);
}

MataAttentionLayer MataAttentionLayer::init(size_t d_model, size_t n_heads,
                                            const BiasProjection& proj, double alpha_base,
                                            Rng& rng) {
  if (n_heads == 0 || d_model % n_heads != 0)
    throw std::invalid_argument("attention: d_model must be divisible by n_heads");
  MataAttentionLayer layer;
  layer.d_model = d_model;
  layer.n_heads = n_heads;
  layer.proj = proj;
  layer.wq = Tensor::param({d_model, d_model}, xavier_uniform(d_model, d_model, rng));
  layer.wk = Tensor::param({d_model, d_model}, xavier_uniform(d_model, d_model, rng));
  layer.wv = Tensor::param({d_model, d_model}, xavier_uniform(d_model, d_model, rng));
  layer.wo = Tensor::param({d_model, d_model}, xavier_uniform(d_model, d_model, rng));

  PriorInit priors = init_priors(n_heads, proj.gamma_mu, alpha_base, rng);
  layer.alpha_bar = Tensor::param({n_heads}, priors.alpha_bar);
  layer.mu_logit = Tensor::param({n_heads}, priors.mu_logit);

  size_t dh = d_model / n_heads;
  layer.fphi_w1 = Tensor::param({dh, kResidualHidden}, xavier_uniform(dh, kResidualHidden, rng));
  layer.fphi_b1 = Tensor::param({kResidualHidden}, std::vector<double>(kResidualHidden, 0.0));
  // zero final layer: the dynamic bias starts exactly at the static priors
  layer.fphi_w2 =
      Tensor::param({kResidualHidden, 2}, std::vector<double>(kResidualHidden * 2, 0.0));
  layer.fphi_b2 = Tensor::param({2}, {0.0, 0.0});
  return layer;
}

double MataAttentionLayer::static_alpha(size_t head) const {
  return project_alpha(alpha_bar.data()[head], 0.0, proj.alpha_floor, proj.alpha_ceiling);
}

double MataAttentionLayer::static_mu(size_t head) const {
  double logit = mu_logit.data()[head];
  double sig = 1.0 / (1.0 + std::exp(-logit));
  return sig * proj.gamma_mu;
}

Tensor MataAttentionLayer::forward(const Tensor& x, const std::vector<int64_t>& t,
                                   TimeMode time_mode, AttnCapture* capture) const {
  size_t s = x.dim(0);
  if (t.size() != s)
    throw std::invalid_argument("attention: timestamps do not align with sequence positions");
  size_t dh = head_dim();
  double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = matmul(x, wq);
  Tensor k = matmul(x, wk);
  Tensor v = matmul(x, wv);

  Tensor mask = causal_mask(t);
  Tensor dist;
  if (time_mode == TimeMode::kMata) dist = log_distance_matrix(t, proj.tau);

  if (capture) capture->heads.assign(n_heads, HeadCapture{});

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(n_heads);
  for (size_t h = 0; h < n_heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);

    Tensor scores = mul(matmul(qh, transpose(kh)), inv_sqrt_dh);

    if (time_mode == TimeMode::kMata) {
      Tensor residuals = predict_residuals(qh, fphi_w1, fphi_b1, fphi_w2, fphi_b2);
      Tensor delta_alpha = slice_cols(residuals, 0, 1);  // [S,1]
      Tensor delta_mu = slice_cols(residuals, 1, 1);
      if (!dynamic_alpha) delta_alpha = mul(delta_alpha, 0.0);
      if (!dynamic_mu) delta_mu = mul(delta_mu, 0.0);

      Tensor ab = slice_cols(reshape(alpha_bar, {1, n_heads}), h, 1);  // [1,1]
      Tensor ml = slice_cols(reshape(mu_logit, {1, n_heads}), h, 1);

      Tensor alpha = clamp(mul(ab, exp(delta_alpha)), proj.alpha_floor, proj.alpha_ceiling);
      Tensor mu = mul(sigmoid(add(ml, mul(delta_mu, proj.lambda))), proj.gamma_mu);

      Tensor bias = neg(mul(alpha, abs(sub(dist, mu))));  // [S,1] broadcast over [S,S]
      if (capture) {
        auto& hc = capture->heads[h];
        hc.alpha = alpha.data();
        hc.mu = mu.data();
        hc.bias = bias.data();
      }
      scores = add(scores, bias);
    }
    scores = add(scores, mask);

    const auto& sv = scores.data();
    for (size_t i = 0; i < sv.size(); ++i)
      if (std::isnan(sv[i]))
        throw NumericalError("attention: NaN score at head " + std::to_string(h) + ", query " +
                             std::to_string(i / s) + ", key " + std::to_string(i % s));

    Tensor attn = softmax_lastdim(scores);
    head_outputs.push_back(matmul(attn, vh));
  }
  return matmul(concat_cols(head_outputs), wo);
}

std::vector<double> sinusoidal_time_encoding(double t, size_t d, double t_horizon) {
  if (d % 2 != 0) throw std::invalid_argument("sinusoidal_time_encoding: d must be even");
  std::vector<double> phi(d);
  for (size_t j = 0; j < d / 2; ++j) {
    double omega = std::pow(t_horizon, -2.0 * static_cast<double>(j) / static_cast<double>(d));
    phi[2 * j] = std::sin(omega * t);
    phi[2 * j + 1] = std::cos(omega * t);
  }
  return phi;
}

}  // namespace mata
