#include "mataformer/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mataformer/errors.hpp"
#include "mataformer/metrics.hpp"
#include "mataformer/rng.hpp"

namespace mata {

namespace {
constexpr double kLogClamp = 1e-7;

// constant [B, S, 1, 1] mask marking valid positions
Tensor length_mask(size_t b, size_t s, const std::vector<size_t>& lengths) {
  std::vector<double> m(b * s, 0.0);
  for (size_t bi = 0; bi < b; ++bi)
    for (size_t i = 0; i < lengths[bi]; ++i) m[bi * s + i] = 1.0;
  return Tensor::from_data({b, s, 1, 1}, std::move(m));
}

size_t check_loss_shapes(const Tensor& pred, const Tensor& target,
                         const std::vector<size_t>& lengths) {
  if (pred.ndim() != 4 || target.ndim() != 4 || pred.shape() != target.shape())
    throw std::invalid_argument("loss: pred and target must be matching [B,S,R,K] tensors");
  if (lengths.size() != pred.dim(0))
    throw std::invalid_argument("loss: one length per sequence required");
  size_t total = 0;
  for (size_t bi = 0; bi < lengths.size(); ++bi) {
    if (lengths[bi] > pred.dim(1)) throw std::invalid_argument("loss: length exceeds S");
    total += lengths[bi];
  }
  return total;
}
}  // namespace

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "mse") return LossMode::kMse;
  if (s == "focal") return LossMode::kFocal;
  if (s == "bce") return LossMode::kBce;
  throw DataError("unknown loss mode '" + s + "' (expected mse | focal | bce)");
}

std::string loss_mode_to_string(LossMode m) {
  switch (m) {
    case LossMode::kMse: return "mse";
    case LossMode::kFocal: return "focal";
    case LossMode::kBce: return "bce";
  }
  return "mse";
}

void TrainConfig::validate() const {
  if (predictor_lr_multiplier <= 0)
    throw DataError("train config: predictor_lr_multiplier must be > 0");
  if (warmup_ratio < 0 || warmup_ratio >= 0.5)
    throw DataError("train config: warmup_ratio must lie in [0, 0.5)");
  if (max_epochs < 1 || batch_size < 1) throw DataError("train config: bad epoch/batch counts");
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, const std::vector<size_t>& lengths) {
  size_t total_len = check_loss_shapes(pred, target, lengths);
  if (total_len == 0) throw std::invalid_argument("mse_loss: zero total length");
  size_t r = pred.dim(2), k = pred.dim(3);
  double z = static_cast<double>(r * k) * static_cast<double>(total_len);
  Tensor mask = length_mask(pred.dim(0), pred.dim(1), lengths);
  Tensor diff = mul(sub(pred, target), mask);
  return div(sum(square(diff)), z);
}

Tensor focal_loss_soft(const Tensor& pred, const Tensor& target,
                       const std::vector<size_t>& lengths, double gamma, double alpha_bal) {
  size_t total_len = check_loss_shapes(pred, target, lengths);
  if (total_len == 0) throw std::invalid_argument("focal_loss_soft: zero total length");
  size_t r = pred.dim(2), k = pred.dim(3);
  double n_cells = static_cast<double>(r * k) * static_cast<double>(total_len);
  Tensor mask = length_mask(pred.dim(0), pred.dim(1), lengths);
  Tensor p = clamp(pred, kLogClamp, 1.0 - kLogClamp);
  Tensor one_minus_p = sub(1.0, p);
  // (1-p)^gamma and p^gamma via exp(gamma ln .)
  Tensor pos_w = exp(mul(log(one_minus_p), gamma));
  Tensor neg_w = exp(mul(log(p), gamma));
  Tensor pos_term = mul(mul(mul(pos_w, target), log(p)), alpha_bal);
  Tensor neg_term = mul(mul(mul(neg_w, sub(1.0, target)), log(one_minus_p)), 1.0 - alpha_bal);
  Tensor cell = neg(add(pos_term, neg_term));
  return div(sum(mul(cell, mask)), n_cells);
}

Tensor bce_loss(const Tensor& pred, const Tensor& target, const std::vector<size_t>& lengths) {
  size_t total_len = check_loss_shapes(pred, target, lengths);
  if (total_len == 0) throw std::invalid_argument("bce_loss: zero total length");
  size_t r = pred.dim(2), k = pred.dim(3);
  double n_cells = static_cast<double>(r * k) * static_cast<double>(total_len);
  Tensor mask = length_mask(pred.dim(0), pred.dim(1), lengths);
  Tensor p = clamp(pred, kLogClamp, 1.0 - kLogClamp);
  Tensor cell = neg(add(mul(target, log(p)), mul(sub(1.0, target), log(sub(1.0, p)))));
  return div(sum(mul(cell, mask)), n_cells);
}

std::vector<int> split_by_counts(const std::vector<size_t>& event_counts, size_t folds,
                                 uint64_t seed) {
  if (folds < 2) throw DataError("split: need at least 2 folds");
  if (event_counts.size() < folds)
    throw DataError("split: fewer patients (" + std::to_string(event_counts.size()) +
                    ") than folds (" + std::to_string(folds) + ")");
  std::vector<size_t> order(event_counts.size());
  std::iota(order.begin(), order.end(), 0);
  // seeded shuffle fixes the tie order, then stable longest-first
  Rng rng(seed ^ 0xa0761d6478bd642full);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return event_counts[a] > event_counts[b]; });

  std::vector<int> assignment(event_counts.size(), -1);
  std::vector<size_t> fold_load(folds, 0);
  for (size_t idx : order) {
    size_t lightest = 0;
    for (size_t f = 1; f < folds; ++f)
      if (fold_load[f] < fold_load[lightest]) lightest = f;
    assignment[idx] = static_cast<int>(lightest);
    fold_load[lightest] += event_counts[idx];
  }
  return assignment;
}

std::vector<int> balanced_patient_split(const std::vector<Trajectory>& trajs, size_t folds,
                                        uint64_t seed) {
  std::vector<size_t> counts(trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) counts[i] = trajs[i].events.size();
  return split_by_counts(counts, folds, seed);
}

double lr_at_step(size_t step, size_t total_steps, double warmup_ratio, double base_lr) {
  if (total_steps == 0) return 0.0;
  auto warmup_steps = static_cast<size_t>(warmup_ratio * static_cast<double>(total_steps));
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  size_t rest = total_steps - warmup_steps;
  if (rest == 0) return base_lr;
  double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(rest);
  progress = std::min(1.0, progress);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

AdamW::AdamW(std::vector<NamedParam> params, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(std::move(params)),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].tensor.size(), 0.0);
    v_[i].assign(params_[i].tensor.size(), 0.0);
  }
}

void AdamW::step(double lr_backbone, double lr_predictor) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    double lr = p.predictor_group ? lr_predictor : lr_backbone;
    auto& value = p.tensor.data_mut();
    const auto& grad = p.tensor.grad();
    for (size_t j = 0; j < value.size(); ++j) {
      double g = grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      double mhat = m_[i][j] / bc1;
      double vhat = v_[i][j] / bc2;
      value[j] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * value[j]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

nlohmann::json EpochRecord::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["lr_backbone"] = lr_backbone;
  j["lr_predictor"] = lr_predictor;
  j["val_sample_auprc"] = val_sample_auprc;
  return j;
}

namespace {

struct ParamSnapshot {
  std::vector<std::vector<double>> values;
  void capture(const std::vector<NamedParam>& params) {
    values.clear();
    for (const auto& p : params) values.push_back(p.tensor.data());
  }
  void restore(std::vector<NamedParam>& params) const {
    for (size_t i = 0; i < params.size(); ++i) params[i].tensor.data_mut() = values[i];
  }
};

}  // namespace

TrainResult train(MataFormer& model, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");

  AdamW opt(model.parameters(), cfg.weight_decay);
  size_t batches_per_epoch =
      (train_set.size() + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size);
  size_t total_steps = batches_per_epoch * static_cast<size_t>(cfg.max_epochs);

  Rng shuffle_rng(cfg.seed ^ 0xe7037ed1a0b428dbull);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  ParamSnapshot best;
  auto params = model.parameters();
  best.capture(params);
  int epochs_since_best = 0;
  size_t step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    double epoch_loss = 0;
    double lr_b = 0, lr_p = 0;
    size_t n_batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> preds, targets;
      std::vector<size_t> lengths;
      size_t s_max = 0;
      for (size_t bi = start; bi < end; ++bi) {
        const auto& sample = train_set[order[bi]];
        std::vector<int64_t> t;
        for (const auto& e : sample.traj->events) t.push_back(e.t);
        Tensor pred = model.forward(sample.traj->embeddings, t);  // [S, R*K]
        preds.push_back(pred);
        targets.push_back(Tensor::from_data({sample.labels.n_events, sample.labels.cells()
                                                / sample.labels.n_events},
                                            sample.labels.values));
        lengths.push_back(sample.labels.n_events);
        s_max = std::max(s_max, sample.labels.n_events);
      }
      size_t b = preds.size();
      size_t r = model.config().n_risks, k = model.config().horizons.size();
      Tensor pred4 = reshape(stack_rows_padded(preds, s_max), {b, s_max, r, k});
      Tensor targ4 = reshape(stack_rows_padded(targets, s_max), {b, s_max, r, k});

      Tensor loss;
      switch (cfg.loss_mode) {
        case LossMode::kMse: loss = mse_loss(pred4, targ4, lengths); break;
        case LossMode::kFocal:
          loss = focal_loss_soft(pred4, targ4, lengths, cfg.focal_gamma, cfg.focal_alpha);
          break;
        case LossMode::kBce: loss = bce_loss(pred4, targ4, lengths); break;
      }
      double loss_v = loss.item();
      if (std::isnan(loss_v) || std::isinf(loss_v)) {
        std::ostringstream os;
        os << "train: non-finite loss " << loss_v << " at epoch " << epoch << ", batch "
           << n_batches << " (patients:";
        for (size_t bi = start; bi < end; ++bi)
          os << " " << train_set[order[bi]].traj->patient_id;
        os << ")";
        throw NumericalError(os.str());
      }

      lr_b = lr_at_step(step, total_steps, cfg.warmup_ratio, cfg.base_lr);
      lr_p = lr_b * cfg.predictor_lr_multiplier;
      opt.zero_grad();
      loss.backward();
      opt.step(lr_b, lr_p);
      ++step;
      epoch_loss += loss_v;
      ++n_batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(n_batches);
    rec.lr_backbone = lr_b;
    rec.lr_predictor = lr_p;
    if (!val_set.empty()) {
      auto table = predict_cell_table(model, val_set, cfg.eval_beta);
      rec.val_sample_auprc = compute_metrics(table).sample_auprc;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    result.epochs_run = epoch + 1;

    if (val_set.empty()) continue;
    if (result.best_epoch < 0 || rec.val_sample_auprc > result.best_val_sample_auprc) {
      result.best_epoch = epoch;
      result.best_val_sample_auprc = rec.val_sample_auprc;
      best.capture(params);
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.early_stop_patience) {
      break;
    }
  }

  if (result.best_epoch >= 0) best.restore(params);
  return result;
}

}  // namespace mata
