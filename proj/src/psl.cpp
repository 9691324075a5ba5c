#include "mataformer/psl.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mataformer/errors.hpp"

namespace mata {

namespace {
constexpr double kSecondsPerHour = 3600.0;
}

double displacement_hours(int64_t t, const RiskInterval& interval) {
  if (interval.t_start > interval.t_end)
    throw DataError("interval for patient '" + interval.patient_id + "': t_start > t_end");
  if (t < interval.t_start) return static_cast<double>(interval.t_start - t) / kSecondsPerHour;
  if (t > interval.t_end) return static_cast<double>(t - interval.t_end) / kSecondsPerHour;
  return 0.0;
}

double soft_label(double delta_hours, double sigma_hours) {
  if (sigma_hours <= 0) throw DataError("soft_label: sigma must be > 0");
  return std::exp(-(delta_hours * delta_hours) / (2.0 * sigma_hours * sigma_hours));
}

SoftLabelMatrix build_label_matrix(const Trajectory& traj,
                                   const std::vector<RiskInterval>& intervals, size_t n_risks,
                                   const std::vector<double>& horizons) {
  SoftLabelMatrix y;
  y.n_events = traj.events.size();
  y.n_risks = n_risks;
  y.horizons = horizons;
  y.values.assign(y.n_events * n_risks * horizons.size(), 0.0);
  for (const auto& iv : intervals) {
    if (iv.patient_id != traj.patient_id) continue;
    if (iv.risk < 0 || static_cast<size_t>(iv.risk) >= n_risks)
      throw DataError("interval risk index " + std::to_string(iv.risk) + " out of range [0, " +
                      std::to_string(n_risks) + ")");
    for (size_t i = 0; i < y.n_events; ++i) {
      double delta = displacement_hours(traj.events[i].t, iv);
      for (size_t k = 0; k < horizons.size(); ++k) {
        double v = soft_label(delta, horizons[k]);
        size_t idx = (i * n_risks + iv.risk) * horizons.size() + k;
        if (v > y.values[idx]) y.values[idx] = v;
      }
    }
  }
  return y;
}

std::vector<uint8_t> binarize(const SoftLabelMatrix& y, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DataError("binarize: beta must lie in (0, 1)");
  std::vector<uint8_t> out(y.values.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = y.values[i] > beta ? 1 : 0;
  return out;
}

std::vector<RiskInterval> load_intervals(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open intervals file: " + path);
  std::vector<RiskInterval> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      RiskInterval iv;
      iv.patient_id = j.at("patient_id").get<std::string>();
      iv.risk = j.at("risk").get<int>();
      iv.t_start = j.at("t_start").get<int64_t>();
      iv.t_end = j.at("t_end").get<int64_t>();
      if (iv.t_start > iv.t_end) throw DataError("t_start > t_end");
      if (iv.risk < 0) throw DataError("risk index must be >= 0");
      out.push_back(std::move(iv));
    } catch (const std::exception& ex) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

void save_intervals(const std::string& path, const std::vector<RiskInterval>& intervals) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write intervals file: " + path);
  for (const auto& iv : intervals) {
    nlohmann::json j;
    j["patient_id"] = iv.patient_id;
    j["risk"] = iv.risk;
    j["t_start"] = iv.t_start;
    j["t_end"] = iv.t_end;
    out << j.dump() << "\n";
  }
}

}  // namespace mata
