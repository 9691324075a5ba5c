#pragma once

#include <vector>

#include "json.hpp"
#include "mataformer/events.hpp"
#include "mataformer/model.hpp"

namespace mata {

// attention mass retained at penalty magnitude gamma: exp(-gamma)
double relative_attention_ratio(double gamma);

struct PhysicalBounds {
  double t_min = 0;  // seconds, rectified at zero
  double t_max = 0;  // seconds
};

// Inverts the log-distance receptive field [mu - X, mu + X], X = gamma/alpha,
// back to physical seconds: t_min = max(0, tau(e^(mu-X) - 1)),
// t_max = tau(e^(mu+X) - 1).
PhysicalBounds physical_bounds(double mu, double alpha, double gamma_cutoff, double tau);

// Unrectified analytic width tau e^mu (e^X - e^-X); may exceed the rectified
// t_max - t_min near mu - X < 0. Satisfies d(BW)/d(mu) = BW.
double bandwidth(double mu, double alpha, double gamma_cutoff, double tau);

// physical lag whose log-distance equals mu: tau(e^mu - 1)
double mu_time_anchor(double mu, double tau);

struct ReceptiveField {
  size_t layer = 0;
  size_t head = 0;
  double mu = 0;
  double alpha = 0;
  double gamma_cutoff = 5.0;
  double x = 0;          // log radius gamma / alpha
  double t_min = 0;      // seconds
  double t_max = 0;      // seconds
  double bandwidth = 0;  // seconds, unrectified

  nlohmann::json to_json() const;
};

ReceptiveField make_receptive_field(size_t layer, size_t head, double mu, double alpha,
                                    double gamma_cutoff, double tau);

// Runs the probe trajectories through the model, collects the dynamic
// (mu, alpha) of every query per layer/head, and reports distributions,
// histograms, static priors, and derived receptive-field rows at the cutoff.
nlohmann::json report_fields(const MataFormer& model, const std::vector<Trajectory>& probes,
                             double gamma_cutoff, size_t histogram_bins = 20);

}  // namespace mata
