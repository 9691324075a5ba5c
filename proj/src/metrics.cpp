#include "mataformer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mata {

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("average_precision: size mismatch");
  size_t total_pos = 0;
  for (auto l : labels) total_pos += l ? 1 : 0;
  if (total_pos == 0) return std::nullopt;

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double ap = 0;
  size_t tp = 0, seen = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    size_t group_tp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_tp += labels[order[j]] ? 1 : 0;
      ++j;
    }
    seen += j - i;
    tp += group_tp;
    if (group_tp > 0)
      ap += static_cast<double>(group_tp) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    i = j;
  }
  return ap / static_cast<double>(total_pos);
}

std::optional<double> auroc(const std::vector<double>& scores,
                            const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
  size_t n_pos = 0, n_neg = 0;
  for (auto l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  // midrank formulation of the Mann-Whitney statistic
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum_pos += midrank;
    i = j;
  }
  double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double precision_at_k(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
                      size_t k) {
  if (scores.size() != labels.size()) throw std::invalid_argument("precision_at_k: size mismatch");
  if (k == 0 || k > scores.size())
    throw std::invalid_argument("precision_at_k: K must be in [1, n]");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  size_t hits = 0;
  for (size_t i = 0; i < k; ++i) hits += labels[order[i]] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double brier_score(const std::vector<double>& pred, const std::vector<uint8_t>& labels) {
  if (pred.size() != labels.size()) throw std::invalid_argument("brier_score: size mismatch");
  if (pred.empty()) return 0.0;
  double s = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - (labels[i] ? 1.0 : 0.0);
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["sample_auprc"] = sample_auprc;
  j["micro_auprc"] = micro_auprc;
  j["auroc"] = auroc;
  j["p_at_1"] = p_at_1;
  j["p_at_5"] = p_at_5;
  j["brier"] = brier;
  j["n_events"] = n_events;
  j["n_events_with_positive"] = n_events_with_positive;
  j["n_cells"] = n_cells;
  j["n_positive_cells"] = n_positive_cells;
  j["prevalence"] = prevalence;
  return j;
}

MetricsReport compute_metrics(const CellTable& table) {
  MetricsReport rep;
  rep.n_events = table.n_events();
  rep.n_cells = table.pred.size();
  for (auto l : table.label) rep.n_positive_cells += l ? 1 : 0;
  rep.prevalence =
      rep.n_cells ? static_cast<double>(rep.n_positive_cells) / static_cast<double>(rep.n_cells)
                  : 0.0;

  size_t cpe = table.cells_per_event();
  double ap_sum = 0;
  size_t ap_count = 0;
  for (size_t e = 0; e < table.n_events(); ++e) {
    size_t off = table.event_offsets[e];
    std::vector<double> s(table.pred.begin() + off, table.pred.begin() + off + cpe);
    std::vector<uint8_t> l(table.label.begin() + off, table.label.begin() + off + cpe);
    if (auto ap = average_precision(s, l)) {
      ap_sum += *ap;
      ++ap_count;
    }
  }
  rep.n_events_with_positive = ap_count;
  rep.sample_auprc = ap_count ? ap_sum / static_cast<double>(ap_count) : 0.0;

  rep.micro_auprc = average_precision(table.pred, table.label).value_or(0.0);
  rep.auroc = auroc(table.pred, table.label).value_or(0.0);
  rep.brier = brier_score(table.pred, table.label);

  // P@K per (event, horizon) slice across the risk axis
  auto p_at = [&](size_t k) {
    if (k > table.n_risks) return 0.0;
    double sum = 0;
    size_t count = 0;
    std::vector<double> s(table.n_risks);
    std::vector<uint8_t> l(table.n_risks);
    for (size_t e = 0; e < table.n_events(); ++e) {
      size_t off = table.event_offsets[e];
      for (size_t h = 0; h < table.n_horizons; ++h) {
        bool any = false;
        for (size_t r = 0; r < table.n_risks; ++r) {
          s[r] = table.pred[off + r * table.n_horizons + h];
          l[r] = table.label[off + r * table.n_horizons + h];
          any |= l[r] != 0;
        }
        if (!any) continue;
        sum += precision_at_k(s, l, k);
        ++count;
      }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
  };
  rep.p_at_1 = p_at(1);
  rep.p_at_5 = p_at(5);
  return rep;
}

}  // namespace mata
