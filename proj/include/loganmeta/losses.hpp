#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace loganmeta::losses {

enum class DistanceKind { SquaredEuclidean, Euclidean };

inline double distance(std::span<const double> a, std::span<const double> b, DistanceKind kind) {
  const double sq = squared_distance(a, b);
  return kind == DistanceKind::SquaredEuclidean ? sq : std::sqrt(sq);
}

/// Adds scale * d distance(a, b) / d a into grad_a (and the negation into
/// grad_b when given). The Euclidean gradient at a == b is taken as zero.
inline void accumulate_distance_grad(std::span<const double> a, std::span<const double> b,
                                     DistanceKind kind, double scale, std::span<double> grad_a,
                                     std::span<double> grad_b = {}) {
  double factor = 2.0;
  if (kind == DistanceKind::Euclidean) {
    const double d = std::sqrt(squared_distance(a, b));
    if (d == 0.0) return;
    factor = 1.0 / d;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = scale * factor * (a[i] - b[i]);
    grad_a[i] += g;
    if (!grad_b.empty()) grad_b[i] -= g;
  }
}

/// Row c is the mean support embedding of local class c.
struct PrototypeSet {
  Matrix vectors;
  std::vector<std::size_t> counts;

  std::size_t size() const { return vectors.rows(); }
};

inline PrototypeSet compute_prototypes(const Matrix& embeddings, std::span<const int> labels,
                                       std::size_t n_classes) {
  if (labels.size() != embeddings.rows())
    throw Error(ErrorCode::ShapeMismatch, "one label per embedding row required");
  PrototypeSet p{Matrix(n_classes, embeddings.cols()), std::vector<std::size_t>(n_classes, 0)};
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= n_classes)
      throw Error(ErrorCode::UnknownLabel, "support label " + std::to_string(labels[r]));
    const auto src = embeddings.row(r);
    auto dst = p.vectors.row(static_cast<std::size_t>(labels[r]));
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    ++p.counts[static_cast<std::size_t>(labels[r])];
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (p.counts[c] == 0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no support rows");
    for (double& v : p.vectors.row(c)) v /= static_cast<double>(p.counts[c]);
  }
  return p;
}

/// Chain rule through the mean: row r of a class with n members receives
/// grad_prototypes[c] / n.
inline Matrix prototype_grad_to_support(const PrototypeSet& protos, std::span<const int> labels,
                                        const Matrix& grad_prototypes) {
  Matrix out(labels.size(), grad_prototypes.cols());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto c = static_cast<std::size_t>(labels[r]);
    const double inv = 1.0 / static_cast<double>(protos.counts[c]);
    const auto src = grad_prototypes.row(c);
    auto dst = out.row(r);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] * inv;
  }
  return out;
}

struct Classification {
  int label = 0;
  std::vector<double> scores;  ///< -distance per class
};

/// Nearest prototype; ties go to the lowest class id.
inline Classification classify(const PrototypeSet& protos, std::span<const double> embedding,
                               DistanceKind kind = DistanceKind::SquaredEuclidean) {
  Classification out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < protos.size(); ++c) {
    const double d = distance(embedding, protos.vectors.row(c), kind);
    out.scores.push_back(-d);
    if (d < best) {
      best = d;
      out.label = static_cast<int>(c);
    }
  }
  return out;
}

struct ProtoLossResult {
  double loss = 0.0;
  Matrix grad_query;
  Matrix grad_prototypes;
  std::size_t correct = 0;  ///< queries whose nearest prototype is the true class
};

/// Mean over queries of -log softmax(-d(f_q, v_.))[y_q].
inline ProtoLossResult proto_loss(const PrototypeSet& protos, const Matrix& query,
                                  std::span<const int> labels,
                                  DistanceKind kind = DistanceKind::SquaredEuclidean) {
  if (labels.size() != query.rows())
    throw Error(ErrorCode::ShapeMismatch, "one label per query row required");
  if (query.rows() == 0) throw Error(ErrorCode::EmptyMatrix, "query set is empty");
  const std::size_t n_classes = protos.size();
  ProtoLossResult res{0.0, Matrix(query.rows(), query.cols()),
                      Matrix(protos.vectors.rows(), protos.vectors.cols()), 0};
  const double inv_q = 1.0 / static_cast<double>(query.rows());
  std::vector<double> logits(n_classes);
  for (std::size_t q = 0; q < query.rows(); ++q) {
    const int y = labels[q];
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
      throw Error(ErrorCode::UnknownLabel, "query label " + std::to_string(y));
    const auto fq = query.row(q);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double d = distance(fq, protos.vectors.row(c), kind);
      logits[c] = -d;
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    if (arg == static_cast<std::size_t>(y)) ++res.correct;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    const double log_z = mx + std::log(sum);
    res.loss += (log_z - logits[static_cast<std::size_t>(y)]) * inv_q;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double p = std::exp(logits[c] - log_z);
      const double dlogit = (p - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv_q;
      // logit = -d, so d loss / d f = -dlogit * d d / d f
      accumulate_distance_grad(fq, protos.vectors.row(c), kind, -dlogit, res.grad_query.row(q),
                               res.grad_prototypes.row(c));
    }
  }
  return res;
}

struct TripletLossResult {
  double loss = 0.0;
  Matrix grad_anchor;
  Matrix grad_positive;
  Matrix grad_negative;
  std::size_t active = 0;
};

/// Mean over rows of max(d(a, p) - d(a, n) + margin, 0).
inline TripletLossResult triplet_loss(const Matrix& anchor, const Matrix& positive,
                                      const Matrix& negative, double margin,
                                      DistanceKind kind = DistanceKind::SquaredEuclidean) {
  if (anchor.rows() != positive.rows() || anchor.rows() != negative.rows() ||
      anchor.cols() != positive.cols() || anchor.cols() != negative.cols())
    throw Error(ErrorCode::BatchMismatch, "anchor, positive and negative batches must match");
  if (anchor.rows() == 0) throw Error(ErrorCode::BatchMismatch, "triplet batch is empty");
  const std::size_t n = anchor.rows();
  TripletLossResult res{0.0, Matrix(n, anchor.cols()), Matrix(n, anchor.cols()),
                        Matrix(n, anchor.cols()), 0};
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = anchor.row(i), p = positive.row(i), ng = negative.row(i);
    const double term = distance(a, p, kind) - distance(a, ng, kind) + margin;
    if (term <= 0.0) continue;
    ++res.active;
    res.loss += term * inv;
    accumulate_distance_grad(a, p, kind, inv, res.grad_anchor.row(i), res.grad_positive.row(i));
    accumulate_distance_grad(a, ng, kind, -inv, res.grad_anchor.row(i), res.grad_negative.row(i));
  }
  return res;
}

inline double hybrid_loss(double proto, double triplet, double w_proto = 0.5, double w_triplet = 0.5) {
  return w_proto * proto + w_triplet * triplet;
}

/// Softmax cross-entropy averaged over rows, with gradient w.r.t. logits.
struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad_logits;
};

inline CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows())
    throw Error(ErrorCode::ShapeMismatch, "one label per logit row required");
  CrossEntropyResult res{0.0, Matrix(logits.rows(), logits.cols())};
  if (logits.rows() == 0) return res;
  const double inv = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= z.size())
      throw Error(ErrorCode::UnknownLabel, "label " + std::to_string(y) + " outside output layer");
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    res.loss += (log_z - z[static_cast<std::size_t>(y)]) * inv;
    auto g = res.grad_logits.row(r);
    for (std::size_t c = 0; c < z.size(); ++c)
      g[c] = (std::exp(z[c] - log_z) - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv;
  }
  return res;
}

/// Row-wise argmax, ties to the lowest index.
inline int argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

}  // namespace loganmeta::losses
