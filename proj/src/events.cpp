#include "mataformer/events.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "mataformer/errors.hpp"

namespace mata {

std::string textualize(const EventRecord& event, const TextualizeOptions& opts) {
  if (!event.structured()) return event.text;
  std::string out;
  bool first = true;
  for (const auto& [key, value] : event.metrics) {
    if (!first && opts.space_between_segments) out += ' ';
    out += '[';
    out += event.category;
    out += ']';
    out += key;
    out += ':';
    out += value;
    first = false;
  }
  return out;
}

void validate_event(const EventRecord& e, const std::vector<std::string>& categories) {
  if (e.t < 0) throw DataError("event for patient '" + e.patient_id + "': negative timestamp");
  if (e.category.empty())
    throw DataError("event for patient '" + e.patient_id + "': empty category");
  if (!categories.empty() &&
      std::find(categories.begin(), categories.end(), e.category) == categories.end()) {
    std::string allowed;
    for (const auto& c : categories) {
      if (!allowed.empty()) allowed += ", ";
      allowed += c;
    }
    throw DataError("unknown category '" + e.category + "' (allowed: " + allowed + ")");
  }
  if (!e.structured() && e.text.empty())
    throw DataError("unstructured event for patient '" + e.patient_id + "' has empty text");
}

std::string event_key(const std::string& patient_id, size_t index) {
  return patient_id + "#" + std::to_string(index);
}

namespace {

EventRecord parse_event_line(const nlohmann::json& j) {
  EventRecord e;
  e.patient_id = j.at("patient_id").get<std::string>();
  if (!j.at("t").is_number_integer())
    throw DataError("field 't' must be an integer (seconds)");
  e.t = j.at("t").get<int64_t>();
  e.category = j.at("category").get<std::string>();
  e.text = j.value("text", std::string());
  if (j.contains("metrics")) {
    for (const auto& pair : j.at("metrics")) {
      if (!pair.is_array() || pair.size() != 2)
        throw DataError("each metric must be a [key, value] pair");
      e.metrics.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
    }
  }
  return e;
}

}  // namespace

std::vector<Trajectory> load_trajectories(const std::string& path,
                                          const std::vector<std::string>& categories) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open events file: " + path);

  std::vector<Trajectory> out;
  std::unordered_map<std::string, size_t> index;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    EventRecord e;
    try {
      e = parse_event_line(nlohmann::json::parse(line));
      validate_event(e, categories);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& ex) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    auto it = index.find(e.patient_id);
    if (it == index.end()) {
      index.emplace(e.patient_id, out.size());
      out.push_back(Trajectory{e.patient_id, {}, {}});
      it = index.find(e.patient_id);
    }
    out[it->second].events.push_back(std::move(e));
  }
  for (auto& traj : out) {
    std::stable_sort(traj.events.begin(), traj.events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.t < b.t; });
    if (traj.events.empty())
      throw DataError("trajectory for patient '" + traj.patient_id + "' is empty");
  }
  return out;
}

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write events file: " + path);
  for (const auto& traj : trajs) {
    for (const auto& e : traj.events) {
      nlohmann::json j;
      j["patient_id"] = e.patient_id;
      j["t"] = e.t;
      j["category"] = e.category;
      j["text"] = e.text;
      if (e.structured()) {
        nlohmann::json m = nlohmann::json::array();
        for (const auto& [k, v] : e.metrics) m.push_back({k, v});
        j["metrics"] = m;
      }
      out << j.dump() << "\n";
    }
  }
}

}  // namespace mata
