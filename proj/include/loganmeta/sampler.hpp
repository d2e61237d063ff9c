#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace loganmeta::episodes {

/// Normal rows (label 0) and anomalous rows grouped by label.
struct ClassPartition {
  std::vector<std::size_t> normal;
  std::map<int, std::vector<std::size_t>> anomalous;

  const std::vector<std::size_t>& rows_of(int label) const {
    static const std::vector<std::size_t> none;
    if (label == 0) return normal;
    const auto it = anomalous.find(label);
    return it == anomalous.end() ? none : it->second;
  }
};

inline ClassPartition partition(const LabeledDataset& ds) {
  ClassPartition p;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] == 0)
      p.normal.push_back(i);
    else
      p.anomalous[ds.labels[i]].push_back(i);
  }
  return p;
}

/// Anomaly classes used for meta-training and for meta-validation. Normal
/// rows serve both.
struct MetaSplit {
  std::vector<int> train_classes;
  std::vector<int> val_classes;

  bool disjoint() const {
    for (int c : train_classes)
      if (std::find(val_classes.begin(), val_classes.end(), c) != val_classes.end()) return false;
    return true;
  }
};

/// Round-robin over sorted anomaly ids: every third class is held out for
/// validation, so six classes split 4/2. With fewer than three anomaly
/// classes nothing can be held out and both sides get every class.
inline MetaSplit default_split(const ClassPartition& p) {
  MetaSplit s;
  std::vector<int> ids;
  for (const auto& [c, rows] : p.anomalous) ids.push_back(c);
  if (ids.size() < 3) return {ids, ids};
  for (std::size_t i = 0; i < ids.size(); ++i)
    (i % 3 == 2 ? s.val_classes : s.train_classes).push_back(ids[i]);
  return s;
}

struct EpisodeConfig {
  std::size_t n_way = 2;
  std::size_t k_shot = 2;
  std::size_t n_query = 2;
  bool include_normal = true;
  std::size_t n_triplets = 16;
  double margin = 1.0;

  void validate() const {
    if (n_way < 2) throw Error(ErrorCode::InvalidConfig, "n_way must be >= 2");
    if (k_shot < 1) throw Error(ErrorCode::InvalidConfig, "k_shot must be >= 1");
    if (n_query < 1) throw Error(ErrorCode::InvalidConfig, "n_query must be >= 1");
    if (margin < 0.0) throw Error(ErrorCode::InvalidConfig, "margin must be >= 0");
  }
};

/// One N-way K-shot task. Row ids index the source dataset; labels are local
/// (0..N-1), with class_ids[local] giving the original class.
struct Episode {
  std::vector<int> class_ids;
  std::vector<std::size_t> support_rows;
  std::vector<int> support_labels;
  std::vector<std::size_t> query_rows;
  std::vector<int> query_labels;

  std::size_t n_way() const { return class_ids.size(); }

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Candidate classes for one stream: the listed anomaly classes plus normal.
inline std::vector<int> eligible_classes(const std::vector<int>& anomaly_classes) {
  std::set<int> s(anomaly_classes.begin(), anomaly_classes.end());
  s.erase(0);
  std::vector<int> out{0};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

/// Chooses N classes uniformly without replacement (class 0 forced in when
/// include_normal), then K support and n_query query rows per class, all
/// without replacement. Local labels follow ascending class id.
inline Episode sample_episode(const ClassPartition& part, const std::vector<int>& anomaly_classes,
                              const EpisodeConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto eligible = eligible_classes(anomaly_classes);
  if (eligible.size() < cfg.n_way)
    throw Error(ErrorCode::TooFewClasses, "need " + std::to_string(cfg.n_way) + " classes, split offers " +
                                              std::to_string(eligible.size()));
  std::vector<int> chosen;
  if (cfg.include_normal) {
    if (part.normal.empty()) throw Error(ErrorCode::InsufficientSamples, "class 0 has no rows");
    std::vector<int> pool(eligible.begin() + 1, eligible.end());
    chosen.push_back(0);
    for (std::size_t i = 0; i + 1 < cfg.n_way; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      chosen.push_back(pool[i]);
    }
  } else {
    std::vector<int> pool = eligible;
    for (std::size_t i = 0; i < cfg.n_way; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      chosen.push_back(pool[i]);
    }
  }
  std::sort(chosen.begin(), chosen.end());

  const std::size_t need = cfg.k_shot + cfg.n_query;
  for (int c : chosen)
    if (part.rows_of(c).size() < need)
      throw Error(ErrorCode::InsufficientSamples,
                  "class " + std::to_string(c) + " has " + std::to_string(part.rows_of(c).size()) +
                      " rows, episode needs " + std::to_string(need));

  Episode ep;
  ep.class_ids = chosen;
  for (std::size_t local = 0; local < chosen.size(); ++local) {
    std::vector<std::size_t> rows = part.rows_of(chosen[local]);
    for (std::size_t i = 0; i < need; ++i) {
      const std::size_t j = i + rng.uniform_index(rows.size() - i);
      std::swap(rows[i], rows[j]);
    }
    for (std::size_t i = 0; i < cfg.k_shot; ++i) {
      ep.support_rows.push_back(rows[i]);
      ep.support_labels.push_back(static_cast<int>(local));
    }
    for (std::size_t i = cfg.k_shot; i < need; ++i) {
      ep.query_rows.push_back(rows[i]);
      ep.query_labels.push_back(static_cast<int>(local));
    }
  }
  return ep;
}

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// Draws n triplets (positions into `labels`) uniformly over all valid
/// (a, p, n) with label[a] == label[p], a != p, label[a] != label[n].
///
/// An anchor in a class of size s appears in (s - 1) * (total - s) valid
/// triples, so anchors are drawn with that weight and the positive and
/// negative uniformly given the anchor.
inline std::vector<Triplet> sample_triplets(std::span<const int> labels, std::size_t n_triplets,
                                            Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  const std::size_t total = labels.size();
  std::vector<std::uint64_t> cumulative;
  std::uint64_t weight_sum = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t s = by_class[labels[i]].size();
    weight_sum += static_cast<std::uint64_t>(s - 1) * (total - s);
    cumulative.push_back(weight_sum);
  }
  if (weight_sum == 0)
    throw Error(ErrorCode::NoValidTriplet,
                "support needs two classes and a class with at least two rows");

  std::vector<Triplet> out;
  out.reserve(n_triplets);
  for (std::size_t t = 0; t < n_triplets; ++t) {
    const std::uint64_t r = rng.uniform_index(weight_sum);
    const std::size_t a = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    const auto& same = by_class[labels[a]];
    std::size_t p = same[rng.uniform_index(same.size() - 1)];
    if (p == a) p = same.back();
    std::size_t neg = rng.uniform_index(total - same.size());
    for (std::size_t i = 0; i < total; ++i) {
      if (labels[i] == labels[a]) continue;
      if (neg == 0) {
        neg = i;
        break;
      }
      --neg;
    }
    out.push_back({a, p, neg});
  }
  return out;
}

}  // namespace loganmeta::episodes
