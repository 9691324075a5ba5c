#include "mataformer/horizon.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mataformer/errors.hpp"

namespace mata {

double relative_attention_ratio(double gamma) {
  if (gamma < 0) throw std::invalid_argument("relative_attention_ratio: gamma must be >= 0");
  return std::exp(-gamma);
}

PhysicalBounds physical_bounds(double mu, double alpha, double gamma_cutoff, double tau) {
  if (alpha <= 0) throw std::invalid_argument("physical_bounds: alpha must be > 0");
  if (tau <= 0) throw std::invalid_argument("physical_bounds: tau must be > 0");
  double x = gamma_cutoff / alpha;
  PhysicalBounds b;
  b.t_min = std::max(0.0, tau * (std::exp(mu - x) - 1.0));
  b.t_max = tau * (std::exp(mu + x) - 1.0);
  return b;
}

double bandwidth(double mu, double alpha, double gamma_cutoff, double tau) {
  if (alpha <= 0) throw std::invalid_argument("bandwidth: alpha must be > 0");
  double x = gamma_cutoff / alpha;
  return tau * std::exp(mu) * (std::exp(x) - std::exp(-x));
}

double mu_time_anchor(double mu, double tau) {
  if (tau <= 0) throw std::invalid_argument("mu_time_anchor: tau must be > 0");
  return tau * (std::exp(mu) - 1.0);
}

nlohmann::json ReceptiveField::to_json() const {
  nlohmann::json j;
  j["layer"] = layer;
  j["head"] = head;
  j["mu"] = mu;
  j["alpha"] = alpha;
  j["gamma_cutoff"] = gamma_cutoff;
  j["log_radius"] = x;
  j["t_min_seconds"] = t_min;
  j["t_max_seconds"] = t_max;
  j["bandwidth_seconds"] = bandwidth;
  return j;
}

ReceptiveField make_receptive_field(size_t layer, size_t head, double mu, double alpha,
                                    double gamma_cutoff, double tau) {
  ReceptiveField f;
  f.layer = layer;
  f.head = head;
  f.mu = mu;
  f.alpha = alpha;
  f.gamma_cutoff = gamma_cutoff;
  f.x = gamma_cutoff / alpha;
  auto b = physical_bounds(mu, alpha, gamma_cutoff, tau);
  f.t_min = b.t_min;
  f.t_max = b.t_max;
  f.bandwidth = mata::bandwidth(mu, alpha, gamma_cutoff, tau);
  return f;
}

namespace {

nlohmann::json histogram_json(const std::vector<double>& values, double lo, double hi,
                              size_t bins) {
  std::vector<size_t> counts(bins, 0);
  if (hi <= lo) hi = lo + 1.0;
  for (double v : values) {
    auto b = static_cast<size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    counts[std::min(b, bins - 1)]++;
  }
  std::vector<double> edges(bins + 1);
  for (size_t i = 0; i <= bins; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  return nlohmann::json{{"edges", edges}, {"counts", counts}};
}

nlohmann::json distribution_json(const std::vector<double>& values, double lo, double hi,
                                 size_t bins) {
  double mn = 0, mx = 0, mean = 0, sd = 0;
  if (!values.empty()) {
    mn = *std::min_element(values.begin(), values.end());
    mx = *std::max_element(values.begin(), values.end());
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    for (double v : values) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / static_cast<double>(values.size()));
  }
  nlohmann::json j;
  j["count"] = values.size();
  j["mean"] = mean;
  j["std"] = sd;
  j["min"] = mn;
  j["max"] = mx;
  j["histogram"] = histogram_json(values, lo, hi, bins);
  return j;
}

nlohmann::json joint_histogram_json(const std::vector<double>& mu, const std::vector<double>& alpha,
                                    double mu_hi, double alpha_hi, size_t bins) {
  std::vector<std::vector<size_t>> counts(bins, std::vector<size_t>(bins, 0));
  for (size_t i = 0; i < mu.size(); ++i) {
    auto bm = static_cast<size_t>(mu[i] / mu_hi * static_cast<double>(bins));
    auto ba = static_cast<size_t>(alpha[i] / alpha_hi * static_cast<double>(bins));
    counts[std::min(bm, bins - 1)][std::min(ba, bins - 1)]++;
  }
  std::vector<double> mu_edges(bins + 1), alpha_edges(bins + 1);
  for (size_t i = 0; i <= bins; ++i) {
    mu_edges[i] = mu_hi * static_cast<double>(i) / static_cast<double>(bins);
    alpha_edges[i] = alpha_hi * static_cast<double>(i) / static_cast<double>(bins);
  }
  return nlohmann::json{
      {"mu_edges", mu_edges}, {"alpha_edges", alpha_edges}, {"counts", counts}};
}

}  // namespace

nlohmann::json report_fields(const MataFormer& model, const std::vector<Trajectory>& probes,
                             double gamma_cutoff, size_t histogram_bins) {
  const auto& cfg = model.config();
  if (cfg.time_mode != TimeMode::kMata)
    throw DataError("report_fields: checkpoint was not trained with the temporal-bias path");

  // dynamic (mu, alpha) per layer/head over every probe query
  std::vector<std::vector<std::vector<double>>> mu(cfg.n_layers), alpha(cfg.n_layers);
  for (size_t l = 0; l < cfg.n_layers; ++l) {
    mu[l].resize(cfg.n_heads);
    alpha[l].resize(cfg.n_heads);
  }
  for (const auto& traj : probes) {
    std::vector<int64_t> t;
    for (const auto& e : traj.events) t.push_back(e.t);
    std::vector<AttnCapture> capture;
    model.forward(traj.embeddings, t, &capture);
    for (size_t l = 0; l < cfg.n_layers; ++l)
      for (size_t h = 0; h < cfg.n_heads; ++h) {
        auto& hc = capture[l].heads[h];
        mu[l][h].insert(mu[l][h].end(), hc.mu.begin(), hc.mu.end());
        alpha[l][h].insert(alpha[l][h].end(), hc.alpha.begin(), hc.alpha.end());
      }
  }

  nlohmann::json layers = nlohmann::json::array();
  for (size_t l = 0; l < cfg.n_layers; ++l) {
    nlohmann::json heads = nlohmann::json::array();
    for (size_t h = 0; h < cfg.n_heads; ++h) {
      const auto& attn = model.blocks()[l].attn;
      double s_mu = attn.static_mu(h);
      double s_alpha = attn.static_alpha(h);
      double mean_mu = 0, mean_alpha = 0;
      for (double v : mu[l][h]) mean_mu += v;
      for (double v : alpha[l][h]) mean_alpha += v;
      size_t n = std::max<size_t>(1, mu[l][h].size());
      mean_mu /= static_cast<double>(n);
      mean_alpha /= static_cast<double>(n);

      nlohmann::json hj;
      hj["head"] = h;
      hj["static_prior"] = {{"mu", s_mu},
                            {"alpha", s_alpha},
                            {"receptive_field",
                             make_receptive_field(l, h, s_mu, s_alpha, gamma_cutoff, cfg.tau)
                                 .to_json()}};
      hj["dynamic"] = {
          {"mu", distribution_json(mu[l][h], 0.0, cfg.gamma_mu, histogram_bins)},
          {"alpha", distribution_json(alpha[l][h], 0.0, 2.5, histogram_bins)},
          {"joint", joint_histogram_json(mu[l][h], alpha[l][h], cfg.gamma_mu, 2.5,
                                         histogram_bins)},
          {"receptive_field_at_mean",
           make_receptive_field(l, h, mean_mu, mean_alpha, gamma_cutoff, cfg.tau).to_json()}};
      heads.push_back(hj);
    }
    layers.push_back({{"layer", l}, {"heads", heads}});
  }

  nlohmann::json out;
  out["gamma_cutoff"] = gamma_cutoff;
  out["relative_attention_ratio_at_cutoff"] = relative_attention_ratio(gamma_cutoff);
  out["tau"] = cfg.tau;
  out["n_probe_trajectories"] = probes.size();
  out["layers"] = layers;
  return out;
}

}  // namespace mata
