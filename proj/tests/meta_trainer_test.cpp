#include <gtest/gtest.h>

#include <cmath>

#include "loganmeta/config.hpp"
#include "loganmeta/meta_trainer.hpp"
#include "loganmeta/projection.hpp"
#include "loganmeta/synthetic.hpp"

using namespace loganmeta;

namespace {

/// n_per rows per class around well separated class centers in d dims.
LabeledDataset clustered(int n_classes, std::size_t n_per, std::size_t d, double spread, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset ds;
  ds.features = Matrix(n_classes * n_per, d);
  std::size_t r = 0;
  for (int c = 0; c < n_classes; ++c)
    for (std::size_t i = 0; i < n_per; ++i, ++r) {
      for (std::size_t k = 0; k < d; ++k) ds.features(r, k) = spread * rng.normal();
      ds.features(r, static_cast<std::size_t>(c) % d) += 1.0;
      ds.labels.push_back(c);
    }
  return ds;
}

meta::TrainConfig small_config(int epochs) {
  meta::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.episodes_per_epoch = 10;
  cfg.val_episodes = 10;
  cfg.hidden_dim = 16;
  cfg.embedding_dim = 8;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST(MetaTrainer, ZeroEpochsLeavesInitialParams) {
  const auto ds = clustered(4, 10, 6, 0.1, 1);
  const auto split = episodes::default_split(episodes::partition(ds));
  const auto res = meta::train(ds, split, small_config(0));
  EXPECT_TRUE(res.log.epochs.empty());
  Rng init = Rng::from(3, "encoder-init");
  EXPECT_EQ(res.params, nn::init_params(nn::encoder_dims(6, 16, 8), init));
}

TEST(MetaTrainer, SeededRunsAreIdentical) {
  const auto ds = clustered(4, 10, 6, 0.3, 2);
  const auto split = episodes::default_split(episodes::partition(ds));
  const auto a = meta::train(ds, split, small_config(3));
  const auto b = meta::train(ds, split, small_config(3));
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.log.to_csv(), b.log.to_csv());
  auto other = small_config(3);
  other.seed = 4;
  EXPECT_NE(meta::train(ds, split, other).params, a.params);
}

TEST(MetaTrainer, LearnsSeparableTwoClassData) {
  const auto ds = clustered(2, 40, 8, 0.15, 5);
  const auto split = episodes::default_split(episodes::partition(ds));
  ASSERT_EQ(split.val_classes, (std::vector<int>{1}));
  const auto res = meta::train(ds, split, small_config(50));
  ASSERT_EQ(res.log.epochs.size(), 50u);
  EXPECT_GE(res.log.epochs.back().val.accuracy, 0.95);
  const auto ev = meta::evaluate(res.params, ds, split.val_classes, {}, 200, 9);
  EXPECT_GE(ev.accuracy, 0.95);
  EXPECT_EQ(ev.n_queries, 200u * 4u);
}

TEST(MetaTrainer, TrainLossFallsOnSeparableData) {
  const auto ds = clustered(2, 40, 8, 0.15, 5);
  const auto split = episodes::default_split(episodes::partition(ds));
  auto cfg = small_config(50);
  cfg.episodes_per_epoch = 40;
  const auto res = meta::train(ds, split, cfg);
  const auto& ep = res.log.epochs;
  EXPECT_LT(ep.back().train.total_loss, ep.front().train.total_loss);
  // 10-epoch block means of the training loss never go up.
  std::vector<double> blocks;
  for (std::size_t i = 0; i + 10 <= ep.size(); i += 10) {
    double s = 0.0;
    for (std::size_t k = i; k < i + 10; ++k) s += ep[k].train.total_loss;
    blocks.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < blocks.size(); ++i) EXPECT_LE(blocks[i], blocks[i - 1]) << "block " << i;
}

TEST(MetaTrainer, NoSeparationStaysNearChance) {
  synth::SynthSpec spec;
  spec.seed = 2;
  spec.class_separation = 0.0;
  const auto ds = synth::generate_features(spec);
  const auto split = episodes::default_split(episodes::partition(ds));
  auto cfg = small_config(10);
  cfg.hidden_dim = 32;
  const auto res = meta::train(ds, split, cfg);
  const auto ev = meta::evaluate(res.params, ds, split.val_classes, cfg.episode, 300, 11);
  EXPECT_NEAR(ev.accuracy, 0.5, 0.08);
}

TEST(MetaTrainer, MetricsHaveBothStreamsPerEpoch) {
  const auto ds = clustered(4, 10, 6, 0.3, 2);
  const auto split = episodes::default_split(episodes::partition(ds));
  const auto res = meta::train(ds, split, small_config(2));
  const auto rows = metrics_from_csv(res.log.to_csv());
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].split, "train");
  EXPECT_EQ(rows[1].split, "val");
  EXPECT_EQ(rows[3].epoch, 1);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.proto_loss && r.triplet_loss);
    EXPECT_NEAR(r.total_loss, 0.5 * *r.proto_loss + 0.5 * *r.triplet_loss, 1e-12);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
  }
}

TEST(MetaTrainer, ResumeMatchesUninterruptedRun) {
  const auto ds = clustered(4, 10, 6, 0.3, 6);
  const auto split = episodes::default_split(episodes::partition(ds));
  const auto cfg = small_config(5);
  meta::MetaTrainer straight(ds, split, cfg);
  straight.run_until(5);

  meta::MetaTrainer first(ds, split, cfg);
  first.run_until(2);
  meta::MetaTrainer second(ds, split, cfg, first.state());
  second.run_until(5);
  EXPECT_EQ(second.params(), straight.params());
  EXPECT_EQ(second.log(), straight.log());
  EXPECT_EQ(second.state().optimizer.step, straight.state().optimizer.step);
}

TEST(MetaTrainer, ResumeThroughCheckpointFiles) {
  const auto ds = clustered(4, 10, 6, 0.3, 7);
  RunConfig rc;
  rc.seed = 11;
  rc.train = small_config(4);
  rc.resolve();
  const auto split = episodes::default_split(episodes::partition(ds));
  meta::MetaTrainer straight(ds, split, rc.train);
  straight.run_until(4);

  meta::MetaTrainer first(ds, split, rc.train);
  first.run_until(2);
  const std::string path = testing::TempDir() + "/meta_resume.lamc";
  save_meta_checkpoint(path, {rc, split, first.state()});
  const auto ck = load_meta_checkpoint(path);
  EXPECT_EQ(ck.state.epoch, 2);
  EXPECT_EQ(ck.split.val_classes, split.val_classes);
  meta::MetaTrainer second(ds, ck.split, ck.config.train, ck.state);
  second.run_until(4);
  EXPECT_EQ(second.params(), straight.params());
  EXPECT_EQ(second.log().to_csv(), straight.log().to_csv());
}

TEST(MetaTrainer, ResumeRejectsMismatchedNetwork) {
  const auto ds = clustered(4, 10, 6, 0.3, 7);
  const auto split = episodes::default_split(episodes::partition(ds));
  meta::MetaTrainer a(ds, split, small_config(1));
  auto cfg = small_config(1);
  cfg.hidden_dim = 5;
  EXPECT_THROW(meta::MetaTrainer(ds, split, cfg, a.state()), Error);
}

TEST(MetaTrainer, NonFiniteLossNamesTheEpoch) {
  const auto ds = clustered(4, 10, 6, 0.3, 8);
  const auto split = episodes::default_split(episodes::partition(ds));
  meta::MetaTrainer a(ds, split, small_config(1));
  auto state = a.state();
  state.params.layers[0].weight(0, 0) = std::nan("");
  meta::MetaTrainer b(ds, split, small_config(1), state);
  try {
    b.run_epoch();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
    EXPECT_FALSE(e.is_validation());
  }
}

TEST(MetaTrainer, OneShotEpisodesTrainWithoutTriplets) {
  const auto ds = clustered(4, 10, 6, 0.3, 9);
  const auto split = episodes::default_split(episodes::partition(ds));
  auto cfg = small_config(2);
  cfg.episode.k_shot = 1;
  const auto res = meta::train(ds, split, cfg);
  for (const auto& e : res.log.epochs) EXPECT_EQ(e.train.triplet_loss, 0.0);
}

TEST(Evaluate, ConstantEncoderIsAtChance) {
  auto ds = clustered(3, 30, 4, 1.0, 10);
  // Zero parameters map every row to the origin, so every query ties.
  const auto params = nn::MlpParams::zeros(nn::encoder_dims(4, 8, 3));
  const auto ev = meta::evaluate(params, ds, {1, 2}, {}, 500, 1);
  EXPECT_NEAR(ev.accuracy, 0.5, 0.1);
  EXPECT_EQ(ev.recall.at(0), 1.0);  // ties go to the lowest local label
}

TEST(Evaluate, RecallPerOriginalClass) {
  const auto ds = clustered(3, 30, 4, 0.05, 11);
  nn::MlpParams id = nn::MlpParams::zeros(std::vector<std::size_t>{4, 4});
  for (std::size_t i = 0; i < 4; ++i) id.layers[0].weight(i, i) = 1.0;
  const auto ev = meta::evaluate(id, ds, {1, 2}, {}, 100, 2);
  EXPECT_EQ(ev.recall.size(), 3u);
  EXPECT_EQ(ev.accuracy, 1.0);
}

TEST(ExportEmbeddings, HeaderAndRows) {
  const auto ds = clustered(2, 2, 3, 0.1, 12);
  Rng rng(1);
  const auto params = nn::init_params(nn::encoder_dims(3, 4, 2), rng);
  const auto csv = meta::export_embeddings(params, ds);
  const auto lines = split_lines(csv);
  EXPECT_EQ(lines[0], "row,label,e0,e1");
  EXPECT_EQ(std::count_if(lines.begin(), lines.end(), [](std::string_view l) { return !l.empty(); }), 5);
  EXPECT_EQ(lines[3].substr(0, 4), "2,1,");
}

TEST(Projection, PlanarDataIsRecoveredUpToRotation) {
  Rng rng(13);
  // Points a*u + b*v + c in R^5 with orthonormal u, v.
  const std::vector<double> u{0.6, 0.8, 0.0, 0.0, 0.0}, v{0.0, 0.0, 0.0, 0.6, -0.8};
  Matrix x(40, 5);
  for (std::size_t r = 0; r < 40; ++r) {
    const double a = 3.0 * rng.normal(), b = rng.normal();
    for (std::size_t k = 0; k < 5; ++k) x(r, k) = a * u[k] + b * v[k] + 2.0;
  }
  const auto p = projection::project_2d(x);
  double worst = 0.0;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = i + 1; j < 40; ++j) {
      const double d_in = std::sqrt(squared_distance(x.row(i), x.row(j)));
      const double d_out = std::sqrt(squared_distance(p.row(i), p.row(j)));
      worst = std::max(worst, std::abs(d_in - d_out));
    }
  EXPECT_LT(worst, 1e-6);
}

TEST(Projection, VarianceOrderingAndDeterminism) {
  Rng rng(14);
  Matrix x(60, 6);
  for (std::size_t r = 0; r < 60; ++r)
    for (std::size_t k = 0; k < 6; ++k) x(r, k) = (6.0 - k) * rng.normal();
  const auto p = projection::project_2d(x);
  double var0 = 0.0, var1 = 0.0, m0 = 0.0, m1 = 0.0;
  for (std::size_t r = 0; r < 60; ++r) m0 += p(r, 0), m1 += p(r, 1);
  EXPECT_NEAR(m0, 0.0, 1e-9);
  EXPECT_NEAR(m1, 0.0, 1e-9);
  for (std::size_t r = 0; r < 60; ++r) var0 += p(r, 0) * p(r, 0), var1 += p(r, 1) * p(r, 1);
  EXPECT_GE(var0, var1);
  EXPECT_EQ(p, projection::project_2d(x));
}

TEST(Projection, DegenerateInputs) {
  for (const Matrix& m : {Matrix(1, 3, 1.0), Matrix(5, 3, 2.0)}) {
    try {
      projection::project_2d(m);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
    }
  }
}
