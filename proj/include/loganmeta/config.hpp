#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "drain.hpp"
#include "error.hpp"
#include "featurizer.hpp"
#include "meta_trainer.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "synthetic.hpp"

namespace loganmeta {

using Json = nlohmann::ordered_json;

/// Every tunable of every pipeline stage. Subsystem seeds are all derived
/// from the single top-level seed.
struct RunConfig {
  std::uint64_t seed = 0;
  synth::SynthSpec synth;
  std::size_t template_pool_size = 60;
  drain::DrainConfig drain;
  std::int64_t window_secs = 300;
  bool keep_empty_windows = true;
  features::IdfKind idf = features::IdfKind::Smooth;
  meta::TrainConfig train;
  std::optional<episodes::MetaSplit> split;
  std::string baseline_profile = "strict";
  baselines::BaselineConfig baseline = baselines::BaselineConfig::strict();

  /// Pushes derived seeds into the sections.
  void resolve() {
    synth.seed = derive_seed(seed, "synth");
    train.seed = derive_seed(seed, "meta");
    baseline.seed = derive_seed(seed, "baseline");
    train.validate();
    baseline.validate();
    synth.validate();
    drain.validate();
    if (window_secs <= 0) throw Error(ErrorCode::InvalidConfig, "window_secs must be positive");
  }
};

namespace config_detail {

class Reader {
 public:
  Reader(const Json& obj, std::string section) : obj_(obj), section_(std::move(section)) {
    if (!obj_.is_object()) throw Error(ErrorCode::InvalidConfig, "'" + section_ + "' must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, section_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const Json& at(const char* key) const { return obj_.at(key); }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + section_ + "." + k + "'");
  }

 private:
  const Json& obj_;
  std::string section_;
  std::set<std::string> seen_;
};

inline std::string distance_name(losses::DistanceKind k) {
  return k == losses::DistanceKind::SquaredEuclidean ? "squared_euclidean" : "euclidean";
}

inline losses::DistanceKind distance_from(const std::string& s) {
  if (s == "squared_euclidean") return losses::DistanceKind::SquaredEuclidean;
  if (s == "euclidean") return losses::DistanceKind::Euclidean;
  throw Error(ErrorCode::InvalidConfig, "unknown distance '" + s + "'");
}

}  // namespace config_detail

inline Json to_json(const episodes::EpisodeConfig& e) {
  return {{"n_way", e.n_way},         {"k_shot", e.k_shot},         {"n_query", e.n_query},
          {"include_normal", e.include_normal}, {"n_triplets", e.n_triplets}, {"margin", e.margin}};
}

inline void from_json(const Json& j, episodes::EpisodeConfig& e) {
  config_detail::Reader r(j, "episode");
  r.get("n_way", e.n_way);
  r.get("k_shot", e.k_shot);
  r.get("n_query", e.n_query);
  r.get("include_normal", e.include_normal);
  r.get("n_triplets", e.n_triplets);
  r.get("margin", e.margin);
  r.finish();
}

inline Json to_json(const episodes::MetaSplit& s) {
  return {{"train_classes", s.train_classes}, {"val_classes", s.val_classes}};
}

inline void from_json(const Json& j, episodes::MetaSplit& s) {
  config_detail::Reader r(j, "split");
  r.get("train_classes", s.train_classes);
  r.get("val_classes", s.val_classes);
  r.finish();
}

inline Json to_json(const meta::TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"episodes_per_epoch", t.episodes_per_epoch},
          {"val_episodes", t.val_episodes},
          {"episode", to_json(t.episode)},
          {"base_lr", t.schedule.base_lr},
          {"milestones", t.schedule.milestones},
          {"gamma", t.schedule.gamma},
          {"beta1", t.adamw.beta1},
          {"beta2", t.adamw.beta2},
          {"eps", t.adamw.eps},
          {"weight_decay", t.adamw.weight_decay},
          {"w_proto", t.w_proto},
          {"w_triplet", t.w_triplet},
          {"dropout", t.dropout.p},
          {"dropout_on_output", t.dropout.on_output},
          {"distance", config_detail::distance_name(t.distance)},
          {"hidden_dim", t.hidden_dim},
          {"embedding_dim", t.embedding_dim}};
}

inline void from_json(const Json& j, meta::TrainConfig& t) {
  config_detail::Reader r(j, "train");
  r.get("epochs", t.epochs);
  r.get("episodes_per_epoch", t.episodes_per_epoch);
  r.get("val_episodes", t.val_episodes);
  if (r.has("episode")) from_json(r.at("episode"), t.episode);
  r.get("base_lr", t.schedule.base_lr);
  r.get("milestones", t.schedule.milestones);
  r.get("gamma", t.schedule.gamma);
  r.get("beta1", t.adamw.beta1);
  r.get("beta2", t.adamw.beta2);
  r.get("eps", t.adamw.eps);
  r.get("weight_decay", t.adamw.weight_decay);
  r.get("w_proto", t.w_proto);
  r.get("w_triplet", t.w_triplet);
  r.get("dropout", t.dropout.p);
  r.get("dropout_on_output", t.dropout.on_output);
  std::string dist = config_detail::distance_name(t.distance);
  r.get("distance", dist);
  t.distance = config_detail::distance_from(dist);
  r.get("hidden_dim", t.hidden_dim);
  r.get("embedding_dim", t.embedding_dim);
  r.finish();
}

inline Json to_json(const baselines::BaselineConfig& b) {
  return {{"epochs", b.epochs},   {"lr", b.lr},           {"batch_size", b.batch_size}, {"dropout", b.dropout},
          {"hidden1", b.hidden1}, {"hidden2", b.hidden2}, {"val_fraction", b.val_fraction}};
}

inline void from_json(const Json& j, baselines::BaselineConfig& b) {
  config_detail::Reader r(j, "baseline");
  r.get("epochs", b.epochs);
  r.get("lr", b.lr);
  r.get("batch_size", b.batch_size);
  r.get("dropout", b.dropout);
  r.get("hidden1", b.hidden1);
  r.get("hidden2", b.hidden2);
  r.get("val_fraction", b.val_fraction);
  r.finish();
}

inline Json to_json(const synth::SynthSpec& s) {
  return {{"n_rows", s.n_rows},
          {"n_features", s.n_features},
          {"n_classes", s.n_classes},
          {"normal_fraction", s.normal_fraction},
          {"class_separation", s.class_separation},
          {"noise_sigma", s.noise_sigma},
          {"signature_size", s.signature_size},
          {"shared_fraction", s.shared_fraction}};
}

inline void from_json(const Json& j, synth::SynthSpec& s) {
  config_detail::Reader r(j, "synth");
  r.get("n_rows", s.n_rows);
  r.get("n_features", s.n_features);
  r.get("n_classes", s.n_classes);
  r.get("normal_fraction", s.normal_fraction);
  r.get("class_separation", s.class_separation);
  r.get("noise_sigma", s.noise_sigma);
  r.get("signature_size", s.signature_size);
  r.get("shared_fraction", s.shared_fraction);
  r.finish();
}

inline Json to_json(const drain::DrainConfig& d) {
  return {{"depth", d.depth}, {"sim_threshold", d.similarity_threshold}, {"max_children", d.max_children},
          {"masks", d.masks}};
}

inline void from_json(const Json& j, drain::DrainConfig& d) {
  config_detail::Reader r(j, "drain");
  r.get("depth", d.depth);
  r.get("sim_threshold", d.similarity_threshold);
  r.get("max_children", d.max_children);
  r.get("masks", d.masks);
  r.finish();
}

inline Json to_json(const RunConfig& c) {
  Json j{{"seed", c.seed},
         {"synth", to_json(c.synth)},
         {"template_pool_size", c.template_pool_size},
         {"drain", to_json(c.drain)},
         {"window_secs", c.window_secs},
         {"keep_empty_windows", c.keep_empty_windows},
         {"idf", c.idf == features::IdfKind::Smooth ? "smooth" : "raw"},
         {"train", to_json(c.train)}};
  if (c.split) j["split"] = to_json(*c.split);
  j["baseline_profile"] = c.baseline_profile;
  j["baseline"] = to_json(c.baseline);
  return j;
}

/// Accepts a bare config object or a run_config.json (config under "config").
/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig run_config_from_json(const Json& root) {
  const Json& j = root.contains("config") && root.contains("command") ? root.at("config") : root;
  RunConfig c;
  config_detail::Reader r(j, "config");
  r.get("seed", c.seed);
  if (r.has("synth")) from_json(r.at("synth"), c.synth);
  r.get("template_pool_size", c.template_pool_size);
  if (r.has("drain")) from_json(r.at("drain"), c.drain);
  r.get("window_secs", c.window_secs);
  r.get("keep_empty_windows", c.keep_empty_windows);
  std::string idf = "smooth";
  r.get("idf", idf);
  if (idf != "smooth" && idf != "raw") throw Error(ErrorCode::InvalidConfig, "idf must be 'smooth' or 'raw'");
  c.idf = idf == "smooth" ? features::IdfKind::Smooth : features::IdfKind::Raw;
  if (r.has("train")) from_json(r.at("train"), c.train);
  if (r.has("split")) {
    episodes::MetaSplit s;
    from_json(r.at("split"), s);
    c.split = s;
  }
  r.get("baseline_profile", c.baseline_profile);
  if (c.baseline_profile == "tuned")
    c.baseline = baselines::BaselineConfig::tuned();
  else if (c.baseline_profile != "strict")
    throw Error(ErrorCode::InvalidConfig, "baseline_profile must be 'strict' or 'tuned'");
  if (r.has("baseline")) from_json(r.at("baseline"), c.baseline);
  r.finish();
  return c;
}

inline Json parse_json(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, what + " is not valid JSON: " + e.what());
  }
}

// ---- checkpoints: binary tensors at <path>, JSON sidecar at <path>.json ----

inline std::string sidecar_path(const std::string& path) { return path + ".json"; }

inline Json to_json(const meta::EpochRecord& e) {
  auto s = [](const meta::StreamStats& st) {
    return Json{{"total_loss", st.total_loss},
                {"proto_loss", st.proto_loss},
                {"triplet_loss", st.triplet_loss},
                {"accuracy", st.accuracy}};
  };
  return {{"epoch", e.epoch}, {"lr", e.lr}, {"train", s(e.train)}, {"val", s(e.val)}};
}

inline meta::EpochRecord epoch_record_from_json(const Json& j) {
  auto s = [](const Json& o) {
    return meta::StreamStats{o.at("total_loss").get<double>(), o.at("proto_loss").get<double>(),
                             o.at("triplet_loss").get<double>(), o.at("accuracy").get<double>()};
  };
  return {j.at("epoch").get<int>(), j.at("lr").get<double>(), s(j.at("train")), s(j.at("val"))};
}

struct MetaCheckpoint {
  RunConfig config;
  episodes::MetaSplit split;
  meta::TrainerState state;
};

inline void save_meta_checkpoint(const std::string& path, const MetaCheckpoint& ck) {
  std::vector<checkpoint::Tensor> tensors;
  checkpoint::append_params(tensors, ck.state.params, "encoder.");
  checkpoint::append_params(tensors, ck.state.optimizer.m, "adamw.m.");
  checkpoint::append_params(tensors, ck.state.optimizer.v, "adamw.v.");
  write_file(path, checkpoint::encode(tensors));
  Json history = Json::array();
  for (const auto& e : ck.state.log.epochs) history.push_back(to_json(e));
  Json side{{"format", "LAMC"},
            {"format_version", checkpoint::kFormatVersion},
            {"model", "meta"},
            {"epoch", ck.state.epoch},
            {"optimizer_step", ck.state.optimizer.step},
            {"rng_state", ck.state.rng_state},
            {"dims", ck.state.params.dims()},
            {"split", to_json(ck.split)},
            {"config", to_json(ck.config)},
            {"history", history}};
  write_file(sidecar_path(path), side.dump(2) + "\n");
}

inline Json load_sidecar(const std::string& path) {
  return parse_json(read_file(sidecar_path(path)), "checkpoint sidecar " + sidecar_path(path));
}

inline MetaCheckpoint load_meta_checkpoint(const std::string& path) {
  const Json side = load_sidecar(path);
  if (side.value("model", "") != "meta") throw Error(ErrorCode::Format, path + " is not a meta-learning checkpoint");
  const auto tensors = checkpoint::decode(read_file(path));
  MetaCheckpoint ck;
  try {
    ck.config = run_config_from_json(side.at("config"));
    ck.config.resolve();
    from_json(side.at("split"), ck.split);
    ck.state.params = checkpoint::extract_params(tensors, "encoder.");
    ck.state.optimizer.m = checkpoint::extract_params(tensors, "adamw.m.");
    ck.state.optimizer.v = checkpoint::extract_params(tensors, "adamw.v.");
    ck.state.optimizer.step = side.at("optimizer_step").get<std::uint64_t>();
    ck.state.optimizer.config = ck.config.train.adamw;
    ck.state.epoch = side.at("epoch").get<int>();
    ck.state.rng_state = side.at("rng_state").get<std::string>();
    for (const auto& e : side.at("history")) ck.state.log.epochs.push_back(epoch_record_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, "malformed checkpoint sidecar: " + std::string(e.what()));
  }
  return ck;
}

struct BaselineCheckpoint {
  RunConfig config;
  baselines::Mode mode = baselines::Mode::Binary;
  nn::MlpParams params;
};

inline void save_baseline_checkpoint(const std::string& path, const BaselineCheckpoint& ck) {
  std::vector<checkpoint::Tensor> tensors;
  checkpoint::append_params(tensors, ck.params, "classifier.");
  write_file(path, checkpoint::encode(tensors));
  Json side{{"format", "LAMC"},
            {"format_version", checkpoint::kFormatVersion},
            {"model", "baseline"},
            {"mode", baselines::to_string(ck.mode)},
            {"epoch", ck.config.baseline.epochs},
            {"dims", ck.params.dims()},
            {"config", to_json(ck.config)}};
  write_file(sidecar_path(path), side.dump(2) + "\n");
}

inline BaselineCheckpoint load_baseline_checkpoint(const std::string& path) {
  const Json side = load_sidecar(path);
  if (side.value("model", "") != "baseline") throw Error(ErrorCode::Format, path + " is not a baseline checkpoint");
  BaselineCheckpoint ck;
  try {
    ck.config = run_config_from_json(side.at("config"));
    ck.mode = baselines::mode_from_string(side.at("mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, "malformed checkpoint sidecar: " + std::string(e.what()));
  }
  ck.params = checkpoint::extract_params(checkpoint::decode(read_file(path)), "classifier.");
  return ck;
}

}  // namespace loganmeta
