#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "mlp.hpp"

namespace loganmeta::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// "LAMC", u32 version, u32 tensor count, then per tensor: u32 name length,
/// name bytes, u32 rank, u32 dims, f64 data. All little-endian.
inline std::string encode(const std::vector<Tensor>& tensors) {
  std::string out = "LAMC";
  detail::put_le<std::uint32_t>(out, kFormatVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::size_t expect = 1;
    for (auto d : t.dims) expect *= d;
    if (expect != t.data.size())
      throw Error(ErrorCode::ShapeMismatch, "tensor '" + t.name + "' data does not match dims");
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_le<std::uint32_t>(out, d);
    for (double v : t.data) detail::put_le<double>(out, v);
  }
  return out;
}

inline std::vector<Tensor> decode(std::string_view in) {
  if (in.substr(0, 4) != "LAMC") throw Error(ErrorCode::Format, "missing LAMC magic");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(in, pos);
  if (version != kFormatVersion)
    throw Error(ErrorCode::Format, "unsupported checkpoint version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(in, pos);
  std::vector<Tensor> out(count);
  for (auto& t : out) {
    const auto len = detail::get_le<std::uint32_t>(in, pos);
    if (pos + len > in.size()) throw Error(ErrorCode::Format, "truncated tensor name");
    t.name = std::string(in.substr(pos, len));
    pos += len;
    const auto rank = detail::get_le<std::uint32_t>(in, pos);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.dims.push_back(detail::get_le<std::uint32_t>(in, pos));
      n *= t.dims.back();
    }
    t.data.resize(n);
    for (double& v : t.data) v = detail::get_le<double>(in, pos);
  }
  if (pos != in.size()) throw Error(ErrorCode::Format, "trailing bytes after checkpoint payload");
  return out;
}

inline void append_params(std::vector<Tensor>& out, const nn::MlpParams& params,
                          const std::string& prefix = "") {
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    out.push_back({prefix + "W" + std::to_string(i + 1),
                   {static_cast<std::uint32_t>(l.weight.rows()), static_cast<std::uint32_t>(l.weight.cols())},
                   l.weight.data()});
    out.push_back({prefix + "b" + std::to_string(i + 1), {static_cast<std::uint32_t>(l.bias.size())}, l.bias});
  }
}

/// Reads W1, b1, W2, ... under `prefix` until a layer is missing.
inline nn::MlpParams extract_params(const std::vector<Tensor>& tensors, const std::string& prefix = "") {
  auto find = [&](const std::string& name) -> const Tensor* {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  };
  nn::MlpParams p;
  for (std::size_t i = 1;; ++i) {
    const Tensor* w = find(prefix + "W" + std::to_string(i));
    const Tensor* b = find(prefix + "b" + std::to_string(i));
    if (!w || !b) break;
    if (w->dims.size() != 2 || b->dims.size() != 1 || b->dims[0] != w->dims[1])
      throw Error(ErrorCode::Format, "malformed layer " + std::to_string(i) + " in checkpoint");
    p.layers.push_back({Matrix(w->dims[0], w->dims[1], w->data), b->data});
  }
  if (p.layers.empty()) throw Error(ErrorCode::Format, "checkpoint has no '" + prefix + "' layers");
  for (std::size_t i = 1; i < p.layers.size(); ++i)
    if (p.layers[i].weight.rows() != p.layers[i - 1].weight.cols())
      throw Error(ErrorCode::Format, "checkpoint layers do not chain");
  return p;
}

}  // namespace loganmeta::checkpoint
