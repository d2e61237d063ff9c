#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace loganmeta::features {

struct WindowSpec {
  std::int64_t duration_ms = 300'000;
  /// Keep empty windows between the first and last record as zero rows.
  bool keep_empty = true;

  void validate() const {
    if (duration_ms <= 0) throw Error(ErrorCode::InvalidConfig, "window duration must be positive");
  }
};

struct TimedEvent {
  std::int64_t timestamp_ms = 0;
  std::size_t template_id = 0;
};

struct Window {
  std::size_t index = 0;  ///< floor((t - t0) / duration)
  std::int64_t start_ms = 0;
  std::vector<std::size_t> template_ids;
};

/// Tumbling windows aligned to the earliest timestamp.
inline std::vector<Window> window_logs(std::vector<TimedEvent> events, const WindowSpec& spec) {
  spec.validate();
  std::vector<Window> out;
  if (events.empty()) return out;
  std::stable_sort(events.begin(), events.end(), [](const TimedEvent& a, const TimedEvent& b) {
    return a.timestamp_ms < b.timestamp_ms;
  });
  const std::int64_t t0 = events.front().timestamp_ms;
  const auto last = static_cast<std::size_t>((events.back().timestamp_ms - t0) / spec.duration_ms);
  std::vector<Window> all(last + 1);
  for (std::size_t w = 0; w <= last; ++w) {
    all[w].index = w;
    all[w].start_ms = t0 + static_cast<std::int64_t>(w) * spec.duration_ms;
  }
  for (const auto& e : events) {
    const auto w = static_cast<std::size_t>((e.timestamp_ms - t0) / spec.duration_ms);
    all[w].template_ids.push_back(e.template_id);
  }
  if (spec.keep_empty) return all;
  for (auto& w : all)
    if (!w.template_ids.empty()) out.push_back(std::move(w));
  return out;
}

/// Integer template counts, one row per window.
struct CountMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> values;
  std::vector<std::int64_t> window_start_ms;

  std::uint32_t operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::uint32_t& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

inline CountMatrix count_vectorize(std::span<const Window> windows, std::size_t vocab_size) {
  CountMatrix m;
  m.rows = windows.size();
  m.cols = vocab_size;
  m.values.assign(m.rows * m.cols, 0);
  for (std::size_t r = 0; r < windows.size(); ++r) {
    m.window_start_ms.push_back(windows[r].start_ms);
    for (std::size_t id : windows[r].template_ids) {
      if (id >= vocab_size)
        throw Error(ErrorCode::IdOutOfRange, "template id " + std::to_string(id) +
                                                 " outside vocabulary of " + std::to_string(vocab_size));
      ++m(r, id);
    }
  }
  return m;
}

enum class IdfKind {
  Smooth,  ///< ln((1 + n) / (1 + df)) + 1
  Raw,     ///< ln(n / df); zero-df terms get 0
};

struct TfIdfModel {
  std::vector<double> idf;
  std::size_t n_docs = 0;
  IdfKind kind = IdfKind::Smooth;
};

inline TfIdfModel fit_tfidf(const CountMatrix& counts, IdfKind kind = IdfKind::Smooth) {
  if (counts.rows == 0) throw Error(ErrorCode::EmptyMatrix, "cannot fit tf-idf on zero rows");
  std::vector<std::size_t> df(counts.cols, 0);
  for (std::size_t r = 0; r < counts.rows; ++r)
    for (std::size_t c = 0; c < counts.cols; ++c)
      if (counts(r, c) > 0) ++df[c];
  TfIdfModel model;
  model.n_docs = counts.rows;
  model.kind = kind;
  model.idf.resize(counts.cols);
  const double n = static_cast<double>(counts.rows);
  for (std::size_t c = 0; c < counts.cols; ++c) {
    const double d = static_cast<double>(df[c]);
    model.idf[c] = kind == IdfKind::Smooth ? std::log((1.0 + n) / (1.0 + d)) + 1.0
                                           : (df[c] == 0 ? 0.0 : std::log(n / d));
  }
  return model;
}

/// counts * idf per column, then each row scaled to unit L2 norm.
inline Matrix transform_tfidf(const TfIdfModel& model, const CountMatrix& counts) {
  if (counts.cols != model.idf.size())
    throw Error(ErrorCode::DimensionMismatch, "count matrix has " + std::to_string(counts.cols) +
                                                  " columns, tf-idf model " +
                                                  std::to_string(model.idf.size()));
  Matrix out(counts.rows, counts.cols);
  for (std::size_t r = 0; r < counts.rows; ++r) {
    auto row = out.row(r);
    double norm2 = 0.0;
    for (std::size_t c = 0; c < counts.cols; ++c) {
      row[c] = static_cast<double>(counts(r, c)) * model.idf[c];
      norm2 += row[c] * row[c];
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& v : row) v *= inv;
    }
  }
  return out;
}

}  // namespace loganmeta::features
