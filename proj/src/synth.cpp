#include "mataformer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mataformer/errors.hpp"
#include "mataformer/rng.hpp"

namespace mata {

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  // lags span the peak-prior anchor scales (minutes, hours, most of a day)
  c.lag_table = {
      {0, 0, 1800, 300, 7200},     // 30 min lag, 2 h window
      {1, 1, 7200, 600, 10800},    // 2 h lag, 3 h window
      {2, 2, 21600, 1800, 14400},  // 6 h lag, 4 h window
      {3, 3, 57600, 3600, 21600},  // 16 h lag, 6 h window
  };
  c.gap_median_s = 8400;  // ~2.3 h median gap, ~10 day trajectories
  c.gap_sigma = 1.2;
  c.trigger_probability = 0.05;
  return c;
}

std::vector<std::string> SynthConfig::categories() const {
  std::vector<std::string> cats;
  cats.reserve(n_event_types);
  for (size_t i = 0; i < n_event_types; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "type_%02zu", i);
    cats.emplace_back(buf);
  }
  return cats;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c = defaults();
  c.n_patients = j.value("n_patients", c.n_patients);
  c.mean_events_per_patient = j.value("mean_events_per_patient", c.mean_events_per_patient);
  c.n_event_types = j.value("n_event_types", c.n_event_types);
  c.n_risks = j.value("n_risks", c.n_risks);
  c.gap_median_s = j.value("gap_median_s", c.gap_median_s);
  c.gap_sigma = j.value("gap_sigma", c.gap_sigma);
  c.simultaneous_prob = j.value("simultaneous_prob", c.simultaneous_prob);
  c.length_sigma = j.value("length_sigma", c.length_sigma);
  c.trigger_probability = j.value("trigger_probability", c.trigger_probability);
  c.signal_strength = j.value("signal_strength", c.signal_strength);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.seed = j.value("seed", c.seed);
  if (j.contains("lag_table")) {
    c.lag_table.clear();
    for (const auto& row : j.at("lag_table")) {
      LagSpec spec;
      spec.trigger_type = row.at("trigger_type").get<size_t>();
      spec.risk = row.at("risk").get<size_t>();
      spec.lag_s = row.at("lag_s").get<int64_t>();
      spec.jitter_s = row.value("jitter_s", int64_t{0});
      spec.duration_s = row.at("duration_s").get<int64_t>();
      c.lag_table.push_back(spec);
    }
  }
  return c;
}

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json j;
  j["n_patients"] = n_patients;
  j["mean_events_per_patient"] = mean_events_per_patient;
  j["n_event_types"] = n_event_types;
  j["n_risks"] = n_risks;
  j["gap_median_s"] = gap_median_s;
  j["gap_sigma"] = gap_sigma;
  j["simultaneous_prob"] = simultaneous_prob;
  j["length_sigma"] = length_sigma;
  j["trigger_probability"] = trigger_probability;
  j["signal_strength"] = signal_strength;
  j["embed_dim"] = embed_dim;
  j["seed"] = seed;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& spec : lag_table)
    table.push_back({{"trigger_type", spec.trigger_type},
                     {"risk", spec.risk},
                     {"lag_s", spec.lag_s},
                     {"jitter_s", spec.jitter_s},
                     {"duration_s", spec.duration_s}});
  j["lag_table"] = table;
  return j;
}

namespace {

void validate_config(const SynthConfig& cfg) {
  if (cfg.n_patients == 0 || cfg.mean_events_per_patient < 1)
    throw DataError("synth: empty cohort configuration");
  if (cfg.embed_dim < cfg.n_event_types + cfg.n_risks)
    throw DataError("synth: embed_dim must be at least n_event_types + n_risks to hold the "
                    "signal subspace");
  for (const auto& spec : cfg.lag_table) {
    if (spec.lag_s <= 0) throw DataError("synth: lags must be positive");
    if (spec.trigger_type >= cfg.n_event_types)
      throw DataError("synth: trigger type out of range");
    if (spec.risk >= cfg.n_risks) throw DataError("synth: risk index out of range");
    if (spec.duration_s < 0 || spec.jitter_s < 0)
      throw DataError("synth: negative duration or jitter");
  }
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

Cohort generate_cohort(const SynthConfig& cfg) {
  validate_config(cfg);
  Cohort cohort;
  cohort.embeddings = EmbeddingStore(static_cast<uint32_t>(cfg.embed_dim));
  Rng base(cfg.seed);
  auto categories = cfg.categories();

  size_t max_events = static_cast<size_t>(6.0 * cfg.mean_events_per_patient);
  for (size_t p = 0; p < cfg.n_patients; ++p) {
    Rng rng = base.split(p + 1);
    char pid_buf[16];
    std::snprintf(pid_buf, sizeof(pid_buf), "p%04zu", p);
    std::string pid(pid_buf);

    auto n_events = static_cast<size_t>(
        std::llround(rng.lognormal(cfg.mean_events_per_patient, cfg.length_sigma)));
    n_events = std::clamp<size_t>(n_events, 8, max_events);

    Trajectory traj;
    traj.patient_id = pid;
    int64_t t = 0;
    for (size_t i = 0; i < n_events; ++i) {
      if (i > 0) {
        int64_t gap = 0;
        if (rng.uniform01() >= cfg.simultaneous_prob)
          gap = std::max<int64_t>(1, std::llround(rng.lognormal(cfg.gap_median_s, cfg.gap_sigma)));
        t += gap;
      }
      size_t type = rng.next_below(cfg.n_event_types);

      EventRecord e;
      e.patient_id = pid;
      e.t = t;
      e.category = categories[type];
      // upper half of the type range emits structured metric events
      if (type >= cfg.n_event_types / 2) {
        e.metrics.emplace_back("reading", format_value(rng.uniform(0.0, 100.0)));
      } else {
        e.text = pid + ":evt" + std::to_string(i);
      }

      std::vector<size_t> armed_risks;
      for (size_t s = 0; s < cfg.lag_table.size(); ++s) {
        const auto& spec = cfg.lag_table[s];
        if (spec.trigger_type != type) continue;
        if (rng.uniform01() >= cfg.trigger_probability) continue;
        int64_t jitter = spec.jitter_s > 0
                             ? std::llround(rng.uniform(-static_cast<double>(spec.jitter_s),
                                                        static_cast<double>(spec.jitter_s)))
                             : 0;
        RiskInterval iv;
        iv.patient_id = pid;
        iv.risk = static_cast<int>(spec.risk);
        iv.t_start = t + spec.lag_s + jitter;
        iv.t_end = iv.t_start + spec.duration_s;
        cohort.armed.push_back({pid, i, cohort.intervals.size()});
        cohort.intervals.push_back(iv);
        armed_risks.push_back(spec.risk);
      }

      // hash-noise base plus the planted signal subspace, renormalized
      auto vec = embed_synthetic(textualize(e), cfg.embed_dim, cfg.seed);
      vec[type] += cfg.signal_strength;
      for (size_t r : armed_risks) vec[cfg.n_event_types + r] += cfg.signal_strength;
      double norm2 = 0;
      for (double x : vec) norm2 += x * x;
      double inv = 1.0 / std::sqrt(norm2);
      for (double& x : vec) x *= inv;

      cohort.embeddings.put(event_key(pid, i), vec);
      traj.embeddings.push_back(std::move(vec));
      traj.events.push_back(std::move(e));
    }
    cohort.trajectories.push_back(std::move(traj));
  }
  return cohort;
}

}  // namespace mata
