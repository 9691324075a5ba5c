#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mata {

// One timestamped clinical event. Structured events carry ordered
// (key, value) metric pairs; unstructured events carry free text only.
struct EventRecord {
  std::string patient_id;
  int64_t t = 0;  // seconds since cohort epoch
  std::string category;
  std::string text;
  std::vector<std::pair<std::string, std::string>> metrics;

  bool structured() const { return !metrics.empty(); }
};

// One patient's ordered event stream. Timestamps are nondecreasing with
// input order preserved on ties. Embeddings, when attached, are unit vectors
// aligned one-to-one with events.
struct Trajectory {
  std::string patient_id;
  std::vector<EventRecord> events;
  std::vector<std::vector<double>> embeddings;
};

struct TextualizeOptions {
  // insert a single space between metric segments (default: strict
  // no-delimiter concatenation, so the rendering feeding the embedder is fixed)
  bool space_between_segments = false;
};

// Unstructured events pass through verbatim. Structured events render as
// "[" + category + "]" + key + ":" + value per metric, concatenated.
std::string textualize(const EventRecord& event, const TextualizeOptions& opts = {});

// throws DataError on any invariant violation; `categories` empty accepts any
// nonempty category
void validate_event(const EventRecord& e, const std::vector<std::string>& categories = {});

// Reads event JSONL, groups records by patient (first-appearance order) and
// stable-sorts each patient's events by t. Line numbers are reported on error.
std::vector<Trajectory> load_trajectories(const std::string& path,
                                          const std::vector<std::string>& categories = {});

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajs);

// lookup key for per-event embeddings: "<patient_id>#<index in sorted order>"
std::string event_key(const std::string& patient_id, size_t index);

}  // namespace mata
