#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "featurizer.hpp"
#include "rng.hpp"

namespace loganmeta::synth {

struct SynthSpec {
  std::size_t n_rows = 3180;
  std::size_t n_features = 495;
  int n_classes = 7;
  double normal_fraction = 0.93;
  /// Rate added to each signature template of an anomaly class.
  double class_separation = 1.5;
  /// Log-normal jitter (sigma) applied to every template rate per window.
  double noise_sigma = 0.5;
  /// Signature templates per anomaly class.
  std::size_t signature_size = 8;
  /// Fraction of each signature drawn from a pool shared by all anomaly
  /// classes (generic error templates); the rest is class-specific.
  double shared_fraction = 0.75;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_classes < 2) throw Error(ErrorCode::InvalidSpec, "n_classes must be >= 2");
    if (!(normal_fraction > 0.0 && normal_fraction <= 1.0))
      throw Error(ErrorCode::InvalidSpec, "normal_fraction must be in (0, 1]");
    if (n_rows < 1 || n_features < 1) throw Error(ErrorCode::InvalidSpec, "n_rows and n_features must be positive");
    if (class_separation < 0.0 || noise_sigma < 0.0)
      throw Error(ErrorCode::InvalidSpec, "class_separation and noise_sigma must be >= 0");
    if (signature_size < 1) throw Error(ErrorCode::InvalidSpec, "signature_size must be >= 1");
    if (!(shared_fraction >= 0.0 && shared_fraction <= 1.0))
      throw Error(ErrorCode::InvalidSpec, "shared_fraction must be in [0, 1]");
  }
};

/// round(n * normal_fraction) normal rows; the rest split evenly over the
/// anomaly classes with the remainder going to the lowest ids.
inline std::vector<std::size_t> class_counts(const SynthSpec& spec) {
  const auto n_normal = static_cast<std::size_t>(
      std::llround(static_cast<double>(spec.n_rows) * spec.normal_fraction));
  const std::size_t n_anom = spec.n_rows - n_normal;
  const auto k = static_cast<std::size_t>(spec.n_classes - 1);
  std::vector<std::size_t> counts{n_normal};
  for (std::size_t c = 0; c < k; ++c) counts.push_back(n_anom / k + (c < n_anom % k ? 1 : 0));
  return counts;
}

/// Background template rates: a Zipf profile over a shuffled vocabulary.
struct Profile {
  std::vector<double> normal;                  ///< per-template rate of a normal window
  std::vector<std::vector<std::size_t>> signature;  ///< per anomaly class (index c-1)
};

inline Profile make_profile(const SynthSpec& spec, std::size_t vocab, Rng& rng, double total_rate,
                            double zipf_exponent) {
  Profile p;
  std::vector<std::size_t> rank(vocab);
  std::iota(rank.begin(), rank.end(), 0);
  rng.shuffle(rank);
  double z = 0.0;
  for (std::size_t r = 0; r < vocab; ++r) z += 1.0 / std::pow(static_cast<double>(r + 1), zipf_exponent);
  p.normal.resize(vocab);
  for (std::size_t t = 0; t < vocab; ++t)
    p.normal[t] = total_rate / std::pow(static_cast<double>(rank[t] + 1), zipf_exponent) / z;

  // Signatures come from the rarer half of the vocabulary. A shared pool of
  // signature_size templates is set aside first; each class takes
  // round(shared_fraction * size) of those at random plus its own templates,
  // which no two classes share while the rare pool lasts.
  std::vector<std::size_t> rare;
  for (std::size_t t = 0; t < vocab; ++t)
    if (rank[t] >= vocab / 2) rare.push_back(t);
  rng.shuffle(rare);
  const std::size_t sig = std::min(spec.signature_size, std::max<std::size_t>(1, rare.size()));
  const auto n_shared = static_cast<std::size_t>(std::llround(spec.shared_fraction * static_cast<double>(sig)));
  std::vector<std::size_t> shared;
  if (n_shared > 0 && rare.size() >= 2 * sig) {
    shared.assign(rare.begin(), rare.begin() + static_cast<std::ptrdiff_t>(sig));
    rare.erase(rare.begin(), rare.begin() + static_cast<std::ptrdiff_t>(sig));
  }
  std::size_t next = 0;
  for (int c = 1; c < spec.n_classes; ++c) {
    std::vector<std::size_t> s;
    if (!shared.empty()) {
      rng.shuffle(shared);
      s.assign(shared.begin(), shared.begin() + static_cast<std::ptrdiff_t>(n_shared));
    }
    while (s.size() < sig) {
      if (next >= rare.size()) {
        rng.shuffle(rare);
        next = 0;
      }
      const std::size_t t = rare[next++];
      if (std::find(s.begin(), s.end(), t) == s.end()) s.push_back(t);
    }
    std::sort(s.begin(), s.end());
    p.signature.push_back(std::move(s));
  }
  return p;
}

/// Shuffled label vector matching class_counts.
inline std::vector<int> make_labels(const SynthSpec& spec, Rng& rng) {
  std::vector<int> labels;
  const auto counts = class_counts(spec);
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  rng.shuffle(labels);
  return labels;
}

/// Count-like windows around a class profile, then smooth tf-idf with L2 rows.
inline LabeledDataset generate_features(const SynthSpec& spec) {
  spec.validate();
  Rng rng = Rng::from(spec.seed, "synth-features");
  const Profile prof = make_profile(spec, spec.n_features, rng, 40.0, 1.1);
  const auto labels = make_labels(spec, rng);

  features::CountMatrix counts;
  counts.rows = spec.n_rows;
  counts.cols = spec.n_features;
  counts.values.assign(counts.rows * counts.cols, 0);
  for (std::size_t r = 0; r < spec.n_rows; ++r) {
    std::vector<double> rate = prof.normal;
    if (labels[r] != 0)
      for (std::size_t t : prof.signature[static_cast<std::size_t>(labels[r] - 1)])
        rate[t] += spec.class_separation;
    for (std::size_t t = 0; t < spec.n_features; ++t) {
      const double jitter =
          spec.noise_sigma > 0.0
              ? std::exp(spec.noise_sigma * rng.normal() - 0.5 * spec.noise_sigma * spec.noise_sigma)
              : 1.0;
      counts(r, t) = rng.poisson(rate[t] * jitter);
    }
    counts.window_start_ms.push_back(static_cast<std::int64_t>(r) * 300'000);
  }
  const auto model = features::fit_tfidf(counts);
  LabeledDataset ds;
  ds.features = features::transform_tfidf(model, counts);
  ds.labels = labels;
  for (int c = 0; c < spec.n_classes; ++c) ds.class_names.push_back(c == 0 ? "normal" : "anomaly" + std::to_string(c));
  return ds;
}

// ---- raw log text ----

struct RawLogs {
  std::string text;                     ///< one timestamped line per record
  std::vector<int> window_labels;       ///< label of window i
  std::vector<std::string> templates;   ///< pool phrases with "{}" slots
};

namespace detail {

inline std::string letters(std::size_t i) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('a' + i % 26));
    i /= 26;
  } while (i > 0);
  while (s.size() < 2) s.insert(s.begin(), 'a');
  return s;
}

inline std::string iso8601(std::int64_t ms) {
  using namespace std::chrono;
  const sys_days day{floor<days>(sys_time<milliseconds>(milliseconds(ms)))};
  const year_month_day ymd{day};
  std::int64_t rem = ms - duration_cast<milliseconds>(day.time_since_epoch()).count();
  const auto h = rem / 3'600'000;
  rem %= 3'600'000;
  const auto m = rem / 60'000;
  rem %= 60'000;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<long long>(h),
                static_cast<long long>(m), static_cast<long long>(rem / 1000), static_cast<long long>(rem % 1000));
  return buf;
}

}  // namespace detail

/// Phrase i: a unique component name, a verb, two template-specific words,
/// then one to three parameter slots.
inline std::vector<std::string> make_template_pool(std::size_t size) {
  static const char* verbs[] = {"started", "stopped", "received", "sent", "failed", "retrying",
                                "allocated", "released", "opened", "closed", "rejected", "accepted"};
  static const char* kinds[] = {"request", "session", "buffer", "channel", "lease", "token", "segment", "job"};
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < size; ++i) {
    const std::string tag = detail::letters(i);
    std::string phrase = "svc" + tag + " " + verbs[i % 12] + " " + kinds[(i / 12) % 8] + tag;
    phrase += " node" + tag;
    const std::size_t slots = 1 + i % 3;
    for (std::size_t s = 0; s < slots; ++s) phrase += s == 0 ? " id={}" : s == 1 ? " after {}ms" : " from {}";
    pool.push_back(std::move(phrase));
  }
  return pool;
}

/// Windows follow class_counts order-shuffled labels. Normal windows draw
/// templates from a Zipf profile; in an anomalous window each line comes from
/// the class signature with probability separation / (1 + separation).
inline RawLogs generate_raw_logs(const SynthSpec& spec, std::size_t template_pool_size,
                                 double mean_lines_per_window = 20.0) {
  spec.validate();
  if (template_pool_size < 10) throw Error(ErrorCode::InvalidSpec, "template_pool_size must be >= 10");
  Rng rng = Rng::from(spec.seed, "synth-logs");
  RawLogs out;
  out.templates = make_template_pool(template_pool_size);
  SynthSpec sig_spec = spec;
  sig_spec.signature_size = std::max<std::size_t>(1, std::min(spec.signature_size, template_pool_size / 10));
  const Profile prof = make_profile(sig_spec, template_pool_size, rng, 1.0, 0.8);
  out.window_labels = make_labels(spec, rng);

  std::vector<double> cdf(prof.normal.size());
  std::partial_sum(prof.normal.begin(), prof.normal.end(), cdf.begin());
  const double p_sig = spec.class_separation / (1.0 + spec.class_separation);
  const std::int64_t base_ms = 1'704'067'200'000;  // 2024-01-01T00:00:00Z
  const std::int64_t window_ms = 300'000;

  for (std::size_t w = 0; w < out.window_labels.size(); ++w) {
    const int label = out.window_labels[w];
    const std::size_t n_lines = 1 + rng.poisson(mean_lines_per_window - 1.0);
    std::vector<std::int64_t> offsets(n_lines);
    for (auto& o : offsets) o = static_cast<std::int64_t>(rng.uniform_index(window_ms));
    std::sort(offsets.begin(), offsets.end());
    if (w == 0) offsets[0] = 0;
    for (std::size_t i = 0; i < n_lines; ++i) {
      std::size_t t;
      if (label != 0 && rng.uniform01() < p_sig) {
        const auto& sig = prof.signature[static_cast<std::size_t>(label - 1)];
        t = sig[rng.uniform_index(sig.size())];
      } else {
        const double u = rng.uniform01() * cdf.back();
        t = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        t = std::min(t, cdf.size() - 1);
      }
      std::string line = out.templates[t];
      for (std::size_t pos; (pos = line.find("{}")) != std::string::npos;) {
        const auto kind = line.compare(pos + 2, 2, "ms") == 0 ? 1 : (pos >= 5 && line.compare(pos - 5, 5, "from ") == 0 ? 2 : 0);
        std::string value;
        if (kind == 0)
          value = std::to_string(rng.uniform_index(100000));
        else if (kind == 1)
          value = std::to_string(1 + rng.uniform_index(5000));
        else
          value = "10." + std::to_string(rng.uniform_index(256)) + "." + std::to_string(rng.uniform_index(256)) +
                  "." + std::to_string(rng.uniform_index(256));
        line.replace(pos, 2, value);
      }
      out.text += detail::iso8601(base_ms + static_cast<std::int64_t>(w) * window_ms + offsets[i]) + " " + line + "\n";
    }
  }
  return out;
}

inline std::string window_labels_to_csv(const std::vector<int>& labels) {
  std::string out = "window,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  return out;
}

inline std::vector<int> window_labels_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != "window,label")
    throw Error(ErrorCode::Format, "window label file must start with header window,label");
  std::vector<int> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_csv(lines[i]);
    if (f.size() != 2) throw Error(ErrorCode::Format, "window label row needs 2 fields");
    const auto w = parse_int<std::size_t>(f[0]);
    if (w >= labels.size()) labels.resize(w + 1, 0);
    labels[w] = parse_int<int>(f[1]);
  }
  return labels;
}

}  // namespace loganmeta::synth
