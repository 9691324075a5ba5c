#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mataformer/events.hpp"
#include "mataformer/harness.hpp"
#include "mataformer/model.hpp"
#include "mataformer/psl.hpp"
#include "mataformer/tensor.hpp"

namespace mata {

enum class LossMode { kMse, kFocal, kBce };

LossMode loss_mode_from_string(const std::string& s);
std::string loss_mode_to_string(LossMode m);

struct TrainConfig {
  double base_lr = 1e-3;
  double predictor_lr_multiplier = 10.0;
  double weight_decay = 0.01;
  double warmup_ratio = 0.05;
  int max_epochs = 40;
  int early_stop_patience = 10;
  uint64_t seed = 1;
  LossMode loss_mode = LossMode::kMse;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  int batch_size = 4;
  double eval_beta = 0.5;  // binarization threshold for the monitored metric

  void validate() const;
};

// Sum of squared errors over valid positions divided by
// Z = n_risks * n_horizons * sum(lengths). Padded positions are excluded.
// pred/target: [B, S, R, K]; lengths: number of valid positions per sequence.
Tensor mse_loss(const Tensor& pred, const Tensor& target, const std::vector<size_t>& lengths);

// Soft-target focal loss, mean over valid cells:
//   -[a (1-p)^g y ln p + (1-a) p^g (1-y) ln(1-p)]
// Predictions are clamped to [1e-7, 1 - 1e-7] before the logs.
Tensor focal_loss_soft(const Tensor& pred, const Tensor& target,
                       const std::vector<size_t>& lengths, double gamma, double alpha_bal);

// Binary cross-entropy, mean over valid cells, with the same clamp.
Tensor bce_loss(const Tensor& pred, const Tensor& target, const std::vector<size_t>& lengths);

// Greedy longest-first assignment of patients to the lightest fold by event
// count. Same (counts, folds, seed) always yields the same assignment.
std::vector<int> split_by_counts(const std::vector<size_t>& event_counts, size_t folds,
                                 uint64_t seed);
std::vector<int> balanced_patient_split(const std::vector<Trajectory>& trajs, size_t folds,
                                        uint64_t seed);

// Linear warmup from zero for warmup_ratio of total steps, then cosine decay
// to zero at the final step.
double lr_at_step(size_t step, size_t total_steps, double warmup_ratio, double base_lr);

// Decoupled-weight-decay adaptive-moment optimizer over named parameter
// groups (backbone vs residual-perceptron predictor).
class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);

  void step(double lr_backbone, double lr_predictor);
  void zero_grad();
  const std::vector<NamedParam>& params() const { return params_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_, v_;
  double weight_decay_, beta1_, beta2_, eps_;
  size_t t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double lr_backbone = 0;
  double lr_predictor = 0;
  double val_sample_auprc = 0;
  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_sample_auprc = 0;
  int epochs_run = 0;
};

// Full optimization loop: dual learning rates (predictor at
// predictor_lr_multiplier times the backbone), warmup + cosine schedule,
// early stopping on validation sample-wise AUPRC, best weights restored.
TrainResult train(MataFormer& model, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = nullptr);

}  // namespace mata
