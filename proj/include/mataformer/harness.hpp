#pragma once

#include <vector>

#include "mataformer/embeddings.hpp"
#include "mataformer/events.hpp"
#include "mataformer/metrics.hpp"
#include "mataformer/model.hpp"
#include "mataformer/psl.hpp"

namespace mata {

// A trajectory paired with its soft-label targets. Holds a pointer into the
// owning trajectory vector, which must outlive the sample.
struct TrainSample {
  const Trajectory* traj = nullptr;
  SoftLabelMatrix labels;
};

std::vector<TrainSample> make_samples(const std::vector<Trajectory>& trajs,
                                      const std::vector<RiskInterval>& intervals, size_t n_risks,
                                      const std::vector<double>& horizons);

// attach store vectors to each trajectory by event key; throws on misses
void attach_embeddings(std::vector<Trajectory>& trajs, const EmbeddingStore& store);

// forward every sequence and assemble the flattened cell table against
// targets binarized at beta
CellTable predict_cell_table(const MataFormer& model, const std::vector<TrainSample>& samples,
                             double beta);

}  // namespace mata
