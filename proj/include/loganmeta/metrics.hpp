#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace loganmeta {

/// One line of a metrics file: epoch,split,total_loss,proto_loss,triplet_loss,accuracy.
/// Supervised baselines leave the proto/triplet columns empty.
struct MetricsRow {
  int epoch = 0;
  std::string split;
  double total_loss = 0.0;
  std::optional<double> proto_loss;
  std::optional<double> triplet_loss;
  double accuracy = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "epoch,split,total_loss,proto_loss,triplet_loss,accuracy";

inline std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsHeader);
  out.push_back('\n');
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + r.split + "," + format_double(r.total_loss) + "," +
           opt(r.proto_loss) + "," + opt(r.triplet_loss) + "," + format_double(r.accuracy) + "\n";
  return out;
}

inline std::vector<MetricsRow> metrics_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != kMetricsHeader)
    throw Error(ErrorCode::Format, "metrics file must start with header " + std::string(kMetricsHeader));
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_csv(lines[i]);
    if (f.size() != 6) throw Error(ErrorCode::Format, "metrics row " + std::to_string(i) + " needs 6 fields");
    MetricsRow r;
    r.epoch = parse_int<int>(f[0]);
    r.split = f[1];
    r.total_loss = parse_double(f[2]);
    if (!f[3].empty()) r.proto_loss = parse_double(f[3]);
    if (!f[4].empty()) r.triplet_loss = parse_double(f[4]);
    r.accuracy = parse_double(f[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Accuracy of the last row for `split`, if any.
inline std::optional<double> final_accuracy(const std::vector<MetricsRow>& rows,
                                            std::string_view split = "val") {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->split == split) return it->accuracy;
  return std::nullopt;
}

}  // namespace loganmeta
