#pragma once

#include <cmath>
#include <map>
#include <span>
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
#include "sampler.hpp"

namespace loganmeta::meta {

struct TrainConfig {
  int epochs = 500;
  int episodes_per_epoch = 100;
  /// Validation episodes per epoch. The same bank of episodes is replayed
  /// every epoch so the curve tracks the model rather than sampling noise.
  int val_episodes = 100;
  episodes::EpisodeConfig episode;
  nn::LrSchedule schedule;
  nn::AdamWConfig adamw;
  double w_proto = 0.5;
  double w_triplet = 0.5;
  nn::DropoutConfig dropout{0.5, false};
  losses::DistanceKind distance = losses::DistanceKind::SquaredEuclidean;
  std::size_t hidden_dim = 128;
  std::size_t embedding_dim = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
    if (episodes_per_epoch < 1) throw Error(ErrorCode::InvalidConfig, "episodes_per_epoch must be >= 1");
    if (val_episodes < 1) throw Error(ErrorCode::InvalidConfig, "val_episodes must be >= 1");
    if (w_proto < 0.0 || w_triplet < 0.0) throw Error(ErrorCode::InvalidConfig, "loss weights must be >= 0");
    if (hidden_dim < 1 || embedding_dim < 1) throw Error(ErrorCode::InvalidConfig, "layer sizes must be positive");
    episode.validate();
    schedule.validate();
  }
};

struct StreamStats {
  double total_loss = 0.0;
  double proto_loss = 0.0;
  double triplet_loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const StreamStats&, const StreamStats&) = default;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  StreamStats train;
  StreamStats val;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct MetricsLog {
  std::vector<EpochRecord> epochs;

  std::vector<MetricsRow> rows() const {
    std::vector<MetricsRow> out;
    for (const auto& e : epochs) {
      out.push_back({e.epoch, "train", e.train.total_loss, e.train.proto_loss, e.train.triplet_loss,
                     e.train.accuracy});
      out.push_back({e.epoch, "val", e.val.total_loss, e.val.proto_loss, e.val.triplet_loss, e.val.accuracy});
    }
    return out;
  }

  std::string to_csv() const { return metrics_to_csv(rows()); }

  friend bool operator==(const MetricsLog&, const MetricsLog&) = default;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainerState {
  nn::MlpParams params;
  nn::AdamWState optimizer;
  int epoch = 0;  ///< completed epochs
  std::string rng_state;
  MetricsLog log;
};

struct EpisodeOutcome {
  double total = 0.0;
  double proto = 0.0;
  double triplet = 0.0;
  double accuracy = 0.0;
};

struct HybridObjective {
  EpisodeOutcome outcome;
  Matrix grad;  ///< d total / d embeddings, support rows first then query rows
};

/// Prototypes from the support embeddings, proto loss over the query, triplet
/// loss over the given support triplets, weighted per cfg.
inline HybridObjective hybrid_objective(const Matrix& support, std::span<const int> support_labels,
                                        const Matrix& query, std::span<const int> query_labels,
                                        std::size_t n_way, std::span<const episodes::Triplet> triplets,
                                        const TrainConfig& cfg) {
  const std::size_t n_support = support.rows(), emb = support.cols();
  const auto protos = losses::compute_prototypes(support, support_labels, n_way);
  const auto pl = losses::proto_loss(protos, query, query_labels, cfg.distance);
  std::vector<std::size_t> ai, pi, ni;
  for (const auto& t : triplets) {
    ai.push_back(t.anchor);
    pi.push_back(t.positive);
    ni.push_back(t.negative);
  }
  losses::TripletLossResult tl;
  if (!triplets.empty())
    tl = losses::triplet_loss(support.gather_rows(ai), support.gather_rows(pi), support.gather_rows(ni),
                              cfg.episode.margin, cfg.distance);

  HybridObjective res;
  res.outcome.proto = pl.loss;
  res.outcome.triplet = tl.loss;
  res.outcome.total = losses::hybrid_loss(pl.loss, tl.loss, cfg.w_proto, cfg.w_triplet);
  res.outcome.accuracy = static_cast<double>(pl.correct) / static_cast<double>(query.rows());
  res.grad = Matrix(n_support + query.rows(), emb);
  const Matrix from_protos = losses::prototype_grad_to_support(protos, support_labels, pl.grad_prototypes);
  for (std::size_t i = 0; i < n_support; ++i)
    for (std::size_t k = 0; k < emb; ++k) res.grad(i, k) += cfg.w_proto * from_protos(i, k);
  for (std::size_t q = 0; q < query.rows(); ++q)
    for (std::size_t k = 0; k < emb; ++k) res.grad(n_support + q, k) += cfg.w_proto * pl.grad_query(q, k);
  for (std::size_t t = 0; t < triplets.size(); ++t)
    for (std::size_t k = 0; k < emb; ++k) {
      res.grad(triplets[t].anchor, k) += cfg.w_triplet * tl.grad_anchor(t, k);
      res.grad(triplets[t].positive, k) += cfg.w_triplet * tl.grad_positive(t, k);
      res.grad(triplets[t].negative, k) += cfg.w_triplet * tl.grad_negative(t, k);
    }
  return res;
}

/// Embeds support and query, builds prototypes from the support set, scores
/// the query with the prototype loss and support triplets with the triplet
/// loss. In train mode also backpropagates the weighted sum and steps AdamW.
class EpisodeRunner {
 public:
  EpisodeRunner(const LabeledDataset& data, const TrainConfig& cfg) : data_(&data), cfg_(&cfg) {}

  EpisodeOutcome run(const episodes::Episode& ep, nn::MlpParams& params, Rng& rng, bool train,
                     nn::AdamWState* opt = nullptr, double lr = 0.0, int epoch = 0) const {
    const auto& cfg = *cfg_;
    std::vector<std::size_t> rows = ep.support_rows;
    rows.insert(rows.end(), ep.query_rows.begin(), ep.query_rows.end());
    const Matrix x = data_->features.gather_rows(rows);
    const auto fwd = nn::forward(params, x, train, cfg.dropout, rng);
    const std::size_t n_support = ep.support_rows.size();

    std::vector<std::size_t> support_idx(n_support), query_idx(ep.query_rows.size());
    for (std::size_t i = 0; i < n_support; ++i) support_idx[i] = i;
    for (std::size_t i = 0; i < query_idx.size(); ++i) query_idx[i] = n_support + i;

    // One-shot supports have no positive pairs, so the triplet term drops out.
    std::vector<episodes::Triplet> triplets;
    if (cfg.episode.k_shot >= 2 && cfg.episode.n_triplets > 0)
      triplets = episodes::sample_triplets(ep.support_labels, cfg.episode.n_triplets, rng);

    const auto obj = hybrid_objective(fwd.output.gather_rows(support_idx), ep.support_labels,
                                      fwd.output.gather_rows(query_idx), ep.query_labels, ep.n_way(), triplets, cfg);
    if (!std::isfinite(obj.outcome.total)) {
      std::ostringstream os;
      os << "epoch " << epoch << ": proto=" << obj.outcome.proto << " triplet=" << obj.outcome.triplet
         << " params_finite=" << params.all_finite();
      throw Error(ErrorCode::NonFiniteLoss, os.str());
    }
    if (!train) return obj.outcome;
    const auto g = nn::backward(params, fwd.cache, obj.grad);
    nn::adamw_step(*opt, params, g.params, lr);
    return obj.outcome;
  }

 private:
  const LabeledDataset* data_;
  const TrainConfig* cfg_;
};

/// Episodic trainer for the prototype/triplet encoder. Holds a reference to
/// the dataset, which must outlive it.
class MetaTrainer {
 public:
  MetaTrainer(const LabeledDataset& data, episodes::MetaSplit split, TrainConfig cfg)
      : data_(&data), split_(std::move(split)), cfg_(std::move(cfg)), part_(episodes::partition(data)) {
    cfg_.validate();
    data.validate();
    Rng init = Rng::from(cfg_.seed, "encoder-init");
    const auto dims = nn::encoder_dims(data.dim(), cfg_.hidden_dim, cfg_.embedding_dim);
    state_.params = nn::init_params(dims, init);
    state_.optimizer = nn::AdamWState::for_params(state_.params, cfg_.adamw);
    rng_ = Rng::from(cfg_.seed, "episodes");
  }

  MetaTrainer(const LabeledDataset& data, episodes::MetaSplit split, TrainConfig cfg, TrainerState resume)
      : MetaTrainer(data, std::move(split), std::move(cfg)) {
    if (resume.params.dims() != state_.params.dims())
      throw Error(ErrorCode::ShapeMismatch, "checkpoint network does not fit this dataset/config");
    state_ = std::move(resume);
    rng_.set_state(state_.rng_state);
  }

  const TrainConfig& config() const { return cfg_; }
  const episodes::MetaSplit& split() const { return split_; }
  const nn::MlpParams& params() const { return state_.params; }
  const MetricsLog& log() const { return state_.log; }
  int completed_epochs() const { return state_.epoch; }

  TrainerState state() const {
    TrainerState s = state_;
    s.rng_state = rng_.state();
    return s;
  }

  EpochRecord run_epoch() {
    const int epoch = state_.epoch;
    const double lr = cfg_.schedule.lr_at(epoch);
    EpisodeRunner runner(*data_, cfg_);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    for (int i = 0; i < cfg_.episodes_per_epoch; ++i) {
      const auto ep = episodes::sample_episode(part_, split_.train_classes, cfg_.episode, rng_);
      accumulate(rec.train, runner.run(ep, state_.params, rng_, true, &state_.optimizer, lr, epoch));
    }
    finish(rec.train, cfg_.episodes_per_epoch);
    rec.val = validate_epoch(runner, epoch);
    state_.log.epochs.push_back(rec);
    ++state_.epoch;
    return rec;
  }

  void run_until(int total_epochs) {
    while (state_.epoch < total_epochs) run_epoch();
  }

 private:
  static void accumulate(StreamStats& s, const EpisodeOutcome& o) {
    s.total_loss += o.total;
    s.proto_loss += o.proto;
    s.triplet_loss += o.triplet;
    s.accuracy += o.accuracy;
  }
  static void finish(StreamStats& s, int n) {
    const double inv = 1.0 / n;
    s.total_loss *= inv;
    s.proto_loss *= inv;
    s.triplet_loss *= inv;
    s.accuracy *= inv;
  }

  StreamStats validate_epoch(const EpisodeRunner& runner, int epoch) {
    StreamStats s;
    Rng val_rng = Rng::from(cfg_.seed, "val-episodes");
    nn::MlpParams& params = state_.params;  // not modified: train=false
    for (int i = 0; i < cfg_.val_episodes; ++i) {
      const auto ep = episodes::sample_episode(part_, split_.val_classes, cfg_.episode, val_rng);
      accumulate(s, runner.run(ep, params, val_rng, false, nullptr, 0.0, epoch));
    }
    finish(s, cfg_.val_episodes);
    return s;
  }

  const LabeledDataset* data_;
  episodes::MetaSplit split_;
  TrainConfig cfg_;
  episodes::ClassPartition part_;
  TrainerState state_;
  Rng rng_;
};

struct TrainResult {
  nn::MlpParams params;
  MetricsLog log;
};

inline TrainResult train(const LabeledDataset& data, const episodes::MetaSplit& split, const TrainConfig& cfg) {
  MetaTrainer trainer(data, split, cfg);
  trainer.run_until(cfg.epochs);
  return {trainer.params(), trainer.log()};
}

struct EvalResult {
  double accuracy = 0.0;
  std::map<int, double> recall;  ///< original class id -> recall over its queries
  std::size_t n_queries = 0;
};

/// Nearest-prototype accuracy over freshly sampled episodes, eval-mode encoder.
inline EvalResult evaluate(const nn::MlpParams& params, const LabeledDataset& data,
                           const std::vector<int>& anomaly_classes, const episodes::EpisodeConfig& episode,
                           int n_episodes, std::uint64_t seed,
                           losses::DistanceKind distance = losses::DistanceKind::SquaredEuclidean) {
  const auto part = episodes::partition(data);
  Rng rng = Rng::from(seed, "eval-episodes");
  EvalResult res;
  std::map<int, std::pair<std::size_t, std::size_t>> hits;  // class -> (correct, total)
  std::size_t correct = 0;
  for (int e = 0; e < n_episodes; ++e) {
    const auto ep = episodes::sample_episode(part, anomaly_classes, episode, rng);
    const Matrix support = nn::forward_eval(params, data.features.gather_rows(ep.support_rows));
    const Matrix query = nn::forward_eval(params, data.features.gather_rows(ep.query_rows));
    const auto protos = losses::compute_prototypes(support, ep.support_labels, ep.n_way());
    for (std::size_t q = 0; q < query.rows(); ++q) {
      const int pred = losses::classify(protos, query.row(q), distance).label;
      const int truth = ep.query_labels[q];
      auto& h = hits[ep.class_ids[static_cast<std::size_t>(truth)]];
      ++h.second;
      if (pred == truth) {
        ++h.first;
        ++correct;
      }
      ++res.n_queries;
    }
  }
  res.accuracy = res.n_queries ? static_cast<double>(correct) / static_cast<double>(res.n_queries) : 0.0;
  for (const auto& [c, h] : hits) res.recall[c] = static_cast<double>(h.first) / static_cast<double>(h.second);
  return res;
}

/// CSV "row,label,e0,...": eval-mode embeddings of every row.
inline std::string export_embeddings(const nn::MlpParams& params, const LabeledDataset& data) {
  std::string out = "row,label";
  for (std::size_t k = 0; k < params.output_dim(); ++k) out += ",e" + std::to_string(k);
  out.push_back('\n');
  if (data.size() == 0) return out;
  const Matrix emb = nn::forward_eval(params, data.features);
  for (std::size_t r = 0; r < emb.rows(); ++r) {
    out += std::to_string(r) + "," + std::to_string(data.labels[r]);
    for (double v : emb.row(r)) out += "," + format_double(v);
    out.push_back('\n');
  }
  return out;
}

}  // namespace loganmeta::meta
