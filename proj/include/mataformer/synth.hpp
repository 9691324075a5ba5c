#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mataformer/embeddings.hpp"
#include "mataformer/events.hpp"
#include "mataformer/psl.hpp"

namespace mata {

// When a trigger event of `trigger_type` is armed, an interval for `risk`
// opens lag +- jitter seconds later and stays active for `duration` seconds.
struct LagSpec {
  size_t trigger_type = 0;
  size_t risk = 0;
  int64_t lag_s = 3600;
  int64_t jitter_s = 0;
  int64_t duration_s = 7200;
};

struct SynthConfig {
  size_t n_patients = 60;
  double mean_events_per_patient = 50;
  size_t n_event_types = 12;
  size_t n_risks = 8;
  std::vector<LagSpec> lag_table;  // defaults span minutes to most of a day
  double gap_median_s = 900;       // log-normal inter-event gaps
  double gap_sigma = 1.2;
  double simultaneous_prob = 0.03;  // chance of a zero gap (tied timestamps)
  double length_sigma = 0.6;        // heavy-tailed length distribution
  double trigger_probability = 0.35;
  double signal_strength = 3.0;  // amplitude of the planted embedding signal
  size_t embed_dim = 64;
  uint64_t seed = 42;

  static SynthConfig defaults();
  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::vector<std::string> categories() const;
};

struct Cohort {
  std::vector<Trajectory> trajectories;  // embeddings attached
  std::vector<RiskInterval> intervals;
  EmbeddingStore embeddings;
  // bookkeeping for verification: (patient, event index, interval index)
  struct ArmedTrigger {
    std::string patient_id;
    size_t event_index;
    size_t interval_index;
  };
  std::vector<ArmedTrigger> armed;
};

// Deterministic generator: log-normal gaps, planted trigger-to-interval lags,
// embeddings with a linearly decodable signal subspace (event type plus armed
// trigger identity) on top of hash noise. Per-patient seed streams keep the
// output byte-stable regardless of generation order.
Cohort generate_cohort(const SynthConfig& cfg);

}  // namespace mata
