#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mataformer/events.hpp"

namespace mata {

// Expert-annotated active window [t_start, t_end] for one risk, in seconds.
struct RiskInterval {
  std::string patient_id;
  int risk = 0;
  int64_t t_start = 0;
  int64_t t_end = 0;
};

// Distance in hours from an event time to the nearest point of the interval;
// zero inside the window.
double displacement_hours(int64_t t, const RiskInterval& interval);

// Unnormalized Gaussian kernel exp(-delta^2 / (2 sigma^2)); the plateau case
// delta = 0 yields exactly 1.
double soft_label(double delta_hours, double sigma_hours);

// Per-event continuous targets of shape [n_events, n_risks, n_horizons],
// entries in [0, 1], exactly 1 wherever the event lies inside a matching
// interval. Horizons are in hours and double as the decay scales.
struct SoftLabelMatrix {
  size_t n_events = 0;
  size_t n_risks = 0;
  std::vector<double> horizons;
  std::vector<double> values;  // row-major [event][risk][horizon]

  double at(size_t event, size_t risk, size_t k) const {
    return values[(event * n_risks + risk) * horizons.size() + k];
  }
  size_t cells() const { return values.size(); }
};

// Combines multiple intervals of the same risk by max, which preserves the
// plateau-equals-1 property under overlap. Risks with no interval stay 0.
SoftLabelMatrix build_label_matrix(const Trajectory& traj,
                                   const std::vector<RiskInterval>& intervals, size_t n_risks,
                                   const std::vector<double>& horizons);

// indicator y > beta (strict); beta must lie in (0, 1)
std::vector<uint8_t> binarize(const SoftLabelMatrix& y, double beta);

// Interval JSONL: {"patient_id": str, "risk": int, "t_start": int, "t_end": int}
std::vector<RiskInterval> load_intervals(const std::string& path);
void save_intervals(const std::string& path, const std::vector<RiskInterval>& intervals);

}  // namespace mata
