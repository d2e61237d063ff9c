#pragma once

#include <algorithm>
#include <cstdint>
#include <bit>
#include <cstring>
#include <span>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "text.hpp"

namespace loganmeta {

/// Rows of feature vectors with integer class labels; label 0 is normal.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  int num_classes() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }

  void validate() const {
    if (labels.size() != features.rows())
      throw Error(ErrorCode::ShapeMismatch, "label count differs from feature rows");
    if (!features.all_finite()) throw Error(ErrorCode::Format, "feature matrix has non-finite values");
    for (int l : labels)
      if (l < 0) throw Error(ErrorCode::Format, "negative class label");
  }

  std::map<int, std::size_t> histogram() const {
    std::map<int, std::size_t> h;
    for (int l : labels) ++h[l];
    return h;
  }

  LabeledDataset subset(std::span<const std::size_t> rows) const {
    LabeledDataset out;
    out.features = features.gather_rows(rows);
    for (auto r : rows) out.labels.push_back(labels[r]);
    out.class_names = class_names;
    return out;
  }
};

// ---- CSV: header label,f0,...,f{d-1}; the label column is optional ----

inline std::string dataset_to_csv(const LabeledDataset& ds, bool with_labels = true) {
  std::string out;
  if (with_labels) out += "label";
  for (std::size_t c = 0; c < ds.dim(); ++c) {
    if (with_labels || c) out.push_back(',');
    out += "f" + std::to_string(c);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < ds.features.rows(); ++r) {
    if (with_labels) out += std::to_string(ds.labels[r]);
    const auto row = ds.features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (with_labels || c) out.push_back(',');
      out += format_double(row[c]);
    }
    out.push_back('\n');
  }
  return out;
}

/// Unlabeled files load with every label set to 0.
inline LabeledDataset dataset_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorCode::Format, "feature CSV is empty");
  const auto header = split_csv(lines[0]);
  const bool labeled = !header.empty() && header[0] == "label";
  const std::size_t cols = header.size() - (labeled ? 1 : 0);
  for (std::size_t c = 0; c < cols; ++c)
    if (header[c + (labeled ? 1 : 0)] != "f" + std::to_string(c))
      throw Error(ErrorCode::Format, "feature CSV header column " + std::to_string(c) + " must be f" +
                                         std::to_string(c));
  LabeledDataset ds;
  std::vector<double> data;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_csv(lines[i]);
    if (f.size() != header.size())
      throw Error(ErrorCode::Format, "feature CSV row " + std::to_string(i) + " has " +
                                         std::to_string(f.size()) + " fields, expected " +
                                         std::to_string(header.size()));
    ds.labels.push_back(labeled ? parse_int<int>(f[0]) : 0);
    for (std::size_t c = labeled ? 1 : 0; c < f.size(); ++c) data.push_back(parse_double(f[c]));
  }
  ds.features = Matrix(ds.labels.size(), cols, std::move(data));
  ds.validate();
  return ds;
}

// ---- binary: "LAM1", u32 rows, u32 cols, f64 row-major data, i32 labels (LE) ----

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorCode::Format, "truncated binary file");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline std::string dataset_to_binary(const LabeledDataset& ds) {
  std::string out = "LAM1";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.features.rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.features.cols()));
  for (double v : ds.features.data()) detail::put_le<double>(out, v);
  for (int l : ds.labels) detail::put_le<std::int32_t>(out, l);
  return out;
}

inline LabeledDataset dataset_from_binary(std::string_view in) {
  if (in.substr(0, 4) != "LAM1") throw Error(ErrorCode::Format, "missing LAM1 magic");
  std::size_t pos = 4;
  const auto rows = detail::get_le<std::uint32_t>(in, pos);
  const auto cols = detail::get_le<std::uint32_t>(in, pos);
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  for (double& v : data) v = detail::get_le<double>(in, pos);
  LabeledDataset ds;
  ds.features = Matrix(rows, cols, std::move(data));
  ds.labels.resize(rows);
  for (int& l : ds.labels) l = detail::get_le<std::int32_t>(in, pos);
  if (pos != in.size()) throw Error(ErrorCode::Format, "trailing bytes after LAM1 payload");
  ds.validate();
  return ds;
}

/// Dispatches on content: LAM1 magic means binary, anything else CSV.
inline LabeledDataset load_dataset(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.rfind("LAM1", 0) == 0) return dataset_from_binary(bytes);
  return dataset_from_csv(bytes);
}

/// Binary when the extension is .lam or .bin, CSV otherwise.
inline void save_dataset(const std::string& path, const LabeledDataset& ds) {
  const auto ends_with = [&](std::string_view suf) {
    return path.size() >= suf.size() && path.compare(path.size() - suf.size(), suf.size(), suf) == 0;
  };
  write_file(path, ends_with(".lam") || ends_with(".bin") ? dataset_to_binary(ds) : dataset_to_csv(ds));
}

}  // namespace loganmeta
