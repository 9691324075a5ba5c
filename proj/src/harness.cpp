#include "mataformer/harness.hpp"

#include "mataformer/embeddings.hpp"
#include "mataformer/errors.hpp"

namespace mata {

std::vector<TrainSample> make_samples(const std::vector<Trajectory>& trajs,
                                      const std::vector<RiskInterval>& intervals, size_t n_risks,
                                      const std::vector<double>& horizons) {
  std::vector<TrainSample> out;
  out.reserve(trajs.size());
  for (const auto& traj : trajs) {
    TrainSample s;
    s.traj = &traj;
    s.labels = build_label_matrix(traj, intervals, n_risks, horizons);
    out.push_back(std::move(s));
  }
  return out;
}

void attach_embeddings(std::vector<Trajectory>& trajs, const EmbeddingStore& store) {
  for (auto& traj : trajs) {
    traj.embeddings.clear();
    traj.embeddings.reserve(traj.events.size());
    for (size_t i = 0; i < traj.events.size(); ++i) {
      const auto* vec = store.find(event_key(traj.patient_id, i));
      if (!vec)
        throw DataError("no embedding for event key '" + event_key(traj.patient_id, i) + "'");
      traj.embeddings.push_back(*vec);
    }
  }
}

CellTable predict_cell_table(const MataFormer& model, const std::vector<TrainSample>& samples,
                             double beta) {
  CellTable table;
  table.n_risks = model.config().n_risks;
  table.n_horizons = model.config().horizons.size();
  size_t cpe = table.cells_per_event();
  for (const auto& s : samples) {
    std::vector<int64_t> t;
    t.reserve(s.traj->events.size());
    for (const auto& e : s.traj->events) t.push_back(e.t);
    Tensor pred = model.forward(s.traj->embeddings, t);
    auto bin = binarize(s.labels, beta);
    for (size_t i = 0; i < s.traj->events.size(); ++i) {
      table.event_offsets.push_back(table.pred.size());
      for (size_t c = 0; c < cpe; ++c) {
        table.pred.push_back(pred.data()[i * cpe + c]);
        table.label.push_back(bin[i * cpe + c]);
      }
    }
  }
  return table;
}

}  // namespace mata
