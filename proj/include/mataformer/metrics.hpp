#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "mataformer/psl.hpp"

namespace mata {

// Average precision over a descending-score ranking. Tied scores form one
// group; each group contributes (TP gained) * (precision at the group end).
// Undefined (nullopt) when there is no positive label.
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<uint8_t>& labels);

// Normalized Mann-Whitney U: P(score_pos > score_neg) + 0.5 P(tie).
// Undefined when either class is empty.
std::optional<double> auroc(const std::vector<double>& scores,
                            const std::vector<uint8_t>& labels);

// Fraction of the top-K scored entries that are positive. Ties straddling the
// cut are resolved by stable input order.
double precision_at_k(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
                      size_t k);

// Mean squared difference between predictions and binary labels.
double brier_score(const std::vector<double>& pred, const std::vector<uint8_t>& labels);

// Per-event predictions for one set of trajectories, flattened as
// [event][risk][horizon] alongside matching binarized targets.
struct CellTable {
  size_t n_risks = 0;
  size_t n_horizons = 0;
  std::vector<size_t> event_offsets;  // start cell of each event
  std::vector<double> pred;
  std::vector<uint8_t> label;

  size_t n_events() const { return event_offsets.size(); }
  size_t cells_per_event() const { return n_risks * n_horizons; }
};

struct MetricsReport {
  double sample_auprc = 0;  // per-event AP, averaged over events with a positive
  double micro_auprc = 0;   // AP over all cells flattened
  double auroc = 0;
  double p_at_1 = 0;
  double p_at_5 = 0;
  double brier = 0;
  size_t n_events = 0;
  size_t n_events_with_positive = 0;
  size_t n_cells = 0;
  size_t n_positive_cells = 0;
  double prevalence = 0;

  nlohmann::json to_json() const;
};

// Computes the full metric suite on binarized targets. Precision@K is taken
// per (event, horizon) slice across risks and averaged over slices owning at
// least one positive.
MetricsReport compute_metrics(const CellTable& table);

}  // namespace mata
