#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "mlp.hpp"
#include "optim.hpp"
#include "rng.hpp"

namespace loganmeta::baselines {

enum class Mode {
  Binary,       ///< normal vs any anomaly, 2 outputs
  Multiclass,   ///< every class including normal
  AnomalyOnly,  ///< anomaly rows only, one output per anomaly class
};

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Binary: return "binary";
    case Mode::Multiclass: return "multiclass";
    case Mode::AnomalyOnly: return "anomaly-only";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "binary") return Mode::Binary;
  if (s == "multiclass") return Mode::Multiclass;
  if (s == "anomaly-only") return Mode::AnomalyOnly;
  throw Error(ErrorCode::InvalidConfig, "unknown baseline mode '" + s + "'");
}

struct BaselineConfig {
  int epochs = 100;
  double lr = 1e-6;
  std::size_t batch_size = 32;
  double dropout = 0.5;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 64;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;

  /// Reported settings: lr 1e-6.
  static BaselineConfig strict() { return {}; }
  /// Desk-scale datasets are too small for lr 1e-6 to move in 100 epochs.
  static BaselineConfig tuned() {
    BaselineConfig c;
    c.lr = 1e-3;
    return c;
  }

  void validate() const {
    if (epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
    if (!(lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "lr must be positive");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must be in [0, 1)");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw Error(ErrorCode::InvalidConfig, "val_fraction must be in (0, 1)");
  }
};

/// Rows the mode uses and their target labels; `classes` maps target index
/// back to the original class id.
struct Targets {
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  std::vector<int> classes;
};

inline Targets make_targets(const LabeledDataset& ds, Mode mode, int num_classes = -1) {
  if (num_classes < 0) num_classes = ds.num_classes();
  Targets t;
  switch (mode) {
    case Mode::Binary:
      t.classes = {0, 1};
      for (std::size_t i = 0; i < ds.size(); ++i) {
        t.rows.push_back(i);
        t.labels.push_back(ds.labels[i] == 0 ? 0 : 1);
      }
      break;
    case Mode::Multiclass:
      for (int c = 0; c < num_classes; ++c) t.classes.push_back(c);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        t.rows.push_back(i);
        t.labels.push_back(ds.labels[i]);
      }
      break;
    case Mode::AnomalyOnly:
      for (int c = 1; c < num_classes; ++c) t.classes.push_back(c);
      for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.labels[i] != 0) {
          t.rows.push_back(i);
          t.labels.push_back(ds.labels[i] - 1);
        }
      break;
  }
  for (int l : t.labels)
    if (l >= static_cast<int>(t.classes.size()))
      throw Error(ErrorCode::UnknownLabel, "label " + std::to_string(l) + " outside output layer");
  return t;
}

/// Per original class, a deterministic shuffle puts round(fraction * n)
/// rows (at least one when the class has two or more) into validation.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const LabeledDataset& ds, double val_fraction, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  std::vector<std::size_t> train, val;
  for (auto& [c, rows] : by_class) {
    rng.shuffle(rows);
    auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(rows.size()) + 0.5));
    if (rows.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, rows.size() - 1);
    val.insert(val.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

struct EvalResult {
  double accuracy = 0.0;
  std::vector<int> classes;            ///< original class id per output
  std::vector<double> recall;          ///< per output class; NaN when the class has no rows
  std::vector<std::vector<std::size_t>> confusion;  ///< [truth][predicted]
  std::size_t n_rows = 0;

  /// Mean recall over the listed original class ids that have rows.
  double macro_recall(const std::vector<int>& class_ids) const {
    double s = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < classes.size(); ++k)
      if (std::find(class_ids.begin(), class_ids.end(), classes[k]) != class_ids.end() &&
          !std::isnan(recall[k])) {
        s += recall[k];
        ++n;
      }
    return n ? s / n : std::nan("");
  }
};

/// Argmax classification (ties to the lowest output) of the rows the mode
/// uses, optionally restricted to `subset`.
inline EvalResult eval_baseline(const nn::MlpParams& params, const LabeledDataset& ds, Mode mode,
                                const std::vector<std::size_t>* subset = nullptr) {
  LabeledDataset view = subset ? ds.subset(*subset) : ds;
  const int num_classes = mode == Mode::Binary ? 2
                          : mode == Mode::Multiclass ? static_cast<int>(params.output_dim())
                                                     : static_cast<int>(params.output_dim()) + 1;
  const auto t = make_targets(view, mode, num_classes);
  const std::size_t k = t.classes.size();
  if (k != params.output_dim())
    throw Error(ErrorCode::ShapeMismatch, "network output size does not match baseline mode");
  EvalResult res;
  res.classes = t.classes;
  res.confusion.assign(k, std::vector<std::size_t>(k, 0));
  res.n_rows = t.rows.size();
  if (!t.rows.empty()) {
    const Matrix logits = nn::forward_eval(params, view.features.gather_rows(t.rows));
    std::size_t correct = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const int pred = losses::argmax(logits.row(r));
      ++res.confusion[static_cast<std::size_t>(t.labels[r])][static_cast<std::size_t>(pred)];
      if (pred == t.labels[r]) ++correct;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(t.rows.size());
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t total = 0;
    for (auto v : res.confusion[c]) total += v;
    res.recall.push_back(total ? static_cast<double>(res.confusion[c][c]) / static_cast<double>(total)
                               : std::nan(""));
  }
  return res;
}

/// The train/validation rows train_baseline uses for this config (normal
/// rows dropped in AnomalyOnly mode).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(
    const LabeledDataset& ds, Mode mode, const BaselineConfig& cfg) {
  Rng split_rng = Rng::from(cfg.seed, "baseline-split");
  auto rows = stratified_split(ds, cfg.val_fraction, split_rng);
  if (mode == Mode::AnomalyOnly) {
    const auto normal = [&](std::size_t r) { return ds.labels[r] == 0; };
    std::erase_if(rows.first, normal);
    std::erase_if(rows.second, normal);
  }
  return rows;
}

struct TrainResult {
  nn::MlpParams params;
  std::vector<MetricsRow> log;  ///< per epoch: "train" and "val" rows
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
};

/// One epoch: shuffled mini-batches, mean softmax cross-entropy, Adam
/// (AdamW with zero weight decay), dropout after both hidden layers.
inline TrainResult train_baseline(const LabeledDataset& ds, Mode mode, const BaselineConfig& cfg) {
  cfg.validate();
  ds.validate();
  const int num_classes = ds.num_classes();
  const auto all = make_targets(ds, mode, num_classes);
  const std::size_t out_dim = all.classes.size();
  if (out_dim < 2) throw Error(ErrorCode::TooFewClasses, "baseline needs at least two output classes");

  auto [train_rows, val_rows] = split_rows(ds, mode, cfg);

  std::vector<int> target(ds.size(), -1);
  for (std::size_t i = 0; i < all.rows.size(); ++i) target[all.rows[i]] = all.labels[i];

  Rng init = Rng::from(cfg.seed, "baseline-init");
  const std::vector<std::size_t> dims{ds.dim(), cfg.hidden1, cfg.hidden2, out_dim};
  TrainResult res;
  res.params = nn::init_params(dims, init);
  res.train_rows = train_rows;
  res.val_rows = val_rows;
  auto opt = nn::AdamWState::for_params(res.params, {0.9, 0.999, 1e-8, 0.0});
  const nn::DropoutConfig dropout{cfg.dropout, false};
  Rng rng = Rng::from(cfg.seed, "baseline-batches");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_rows;
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      std::vector<int> y;
      for (auto r : batch) y.push_back(target[r]);
      const auto fwd = nn::forward(res.params, ds.features.gather_rows(batch), true, dropout, rng);
      const auto ce = losses::cross_entropy(fwd.output, y);
      if (!std::isfinite(ce.loss)) {
        std::ostringstream os;
        os << "baseline epoch " << epoch << " batch at " << start << ": loss=" << ce.loss;
        throw Error(ErrorCode::NonFiniteLoss, os.str());
      }
      for (std::size_t r = 0; r < y.size(); ++r)
        if (losses::argmax(fwd.output.row(r)) == y[r]) ++correct;
      loss_sum += ce.loss * static_cast<double>(batch.size());
      const auto g = nn::backward(res.params, fwd.cache, ce.grad_logits);
      nn::adamw_step(opt, res.params, g.params, cfg.lr);
    }
    const double n_train = std::max<double>(1.0, static_cast<double>(order.size()));
    res.log.push_back({epoch, "train", loss_sum / n_train, std::nullopt, std::nullopt,
                       static_cast<double>(correct) / n_train});

    double val_loss = 0.0;
    const auto val_eval = eval_baseline(res.params, ds, mode, &val_rows);
    if (!val_rows.empty()) {
      std::vector<int> y;
      for (auto r : val_rows) y.push_back(target[r]);
      val_loss = losses::cross_entropy(nn::forward_eval(res.params, ds.features.gather_rows(val_rows)), y).loss;
    }
    res.log.push_back({epoch, "val", val_loss, std::nullopt, std::nullopt, val_eval.accuracy});
  }
  return res;
}

}  // namespace loganmeta::baselines
