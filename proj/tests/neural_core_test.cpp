#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "loganmeta/checkpoint.hpp"
#include "loganmeta/mlp.hpp"
#include "loganmeta/optim.hpp"

using namespace loganmeta;
using namespace loganmeta::nn;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

MlpParams random_params(Rng& rng, const std::vector<std::size_t>& dims) {
  auto p = init_params(dims, rng);
  for (auto& l : p.layers)
    for (double& b : l.bias) b = 0.1 * rng.normal();
  return p;
}

/// Reference Adam (coupled form, no weight decay) for the equivalence check.
struct ReferenceAdam {
  std::vector<double> m, v;
  int t = 0;
  void step(std::vector<double>& theta, const std::vector<double>& g, double lr) {
    if (m.empty()) m.assign(theta.size(), 0.0), v.assign(theta.size(), 0.0);
    ++t;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = 0.9 * m[i] + (1.0 - 0.9) * g[i];
      v[i] = 0.999 * v[i] + (1.0 - 0.999) * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      theta[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
};

std::vector<double> flatten(const MlpParams& p) {
  std::vector<double> out;
  p.for_each_tensor([&](const std::string&, std::span<const double> t) { out.insert(out.end(), t.begin(), t.end()); });
  return out;
}

}  // namespace

TEST(EncoderForward, ZeroParamsGiveZeroEmbeddings) {
  const auto params = MlpParams::zeros(encoder_dims(20, 8, 4));
  Rng rng(1);
  const auto x = random_matrix(rng, 3, 20);
  const auto out = forward_eval(params, x);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(EncoderForward, EvalModeIsDeterministic) {
  Rng rng(2);
  const auto params = random_params(rng, encoder_dims(10, 6, 3));
  const auto x = random_matrix(rng, 4, 10);
  Rng a(7), b(99);
  EXPECT_EQ(forward(params, x, false, {0.5, false}, a).output, forward(params, x, false, {0.5, false}, b).output);
}

TEST(EncoderForward, TrainModeDropoutReproducible) {
  Rng rng(3);
  const auto params = random_params(rng, encoder_dims(10, 64, 3));
  const auto x = random_matrix(rng, 4, 10);
  Rng a(11), b(11), c(12);
  const auto ra = forward(params, x, true, {0.5, false}, a);
  EXPECT_EQ(ra.output, forward(params, x, true, {0.5, false}, b).output);
  EXPECT_NE(ra.output, forward(params, x, true, {0.5, false}, c).output);
  // Masks are 0 or 1/(1-p) on hidden layers and absent on the output layer.
  for (double m : ra.cache.masks[0].data()) EXPECT_TRUE(m == 0.0 || m == 2.0);
  EXPECT_TRUE(ra.cache.masks[2].empty());
  Rng d(11);
  EXPECT_FALSE(forward(params, x, true, {0.5, true}, d).cache.masks[2].empty());
}

TEST(EncoderForward, ShapeMismatch) {
  const auto params = MlpParams::zeros(encoder_dims(5, 4, 2));
  try {
    forward_eval(params, Matrix(2, 6));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(EncoderBackward, ZeroUpstreamGradient) {
  Rng rng(4);
  const auto params = random_params(rng, encoder_dims(6, 5, 3));
  const auto fwd = forward_with_masks(params, random_matrix(rng, 3, 6), {});
  const auto g = backward(params, fwd.cache, Matrix(3, 3));
  for (double v : flatten(g.params)) EXPECT_EQ(v, 0.0);
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
}

TEST(EncoderBackward, HandSetToyMatchesFiniteDifferences) {
  MlpParams p = MlpParams::zeros(std::vector<std::size_t>{2, 2, 2, 1});
  p.layers[0].weight = Matrix(2, 2, {0.5, -0.3, 0.8, 0.2});
  p.layers[0].bias = {0.1, -0.05};
  p.layers[1].weight = Matrix(2, 2, {0.7, -0.4, 0.3, 0.9});
  p.layers[1].bias = {0.02, 0.03};
  p.layers[2].weight = Matrix(2, 1, {1.5, -0.6});
  p.layers[2].bias = {0.25};
  Matrix x(1, 2, {1.0, 2.0});
  const Matrix upstream(1, 1, {1.0});
  const auto fwd = forward_with_masks(p, x, {});
  const auto g = backward(p, fwd.cache, upstream);
  const auto f = [&] { return forward_eval(p, x)(0, 0); };
  EXPECT_LT(gradcheck::check_params(p, g.params, f), 1e-6);
  EXPECT_LT(gradcheck::check_matrix(x, g.input, f), 1e-6);
}

TEST(EncoderBackward, RandomNetworksWithAndWithoutDropout) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto params = random_params(rng, encoder_dims(7, 6, 4));
    Matrix x = random_matrix(rng, 5, 7);
    const Matrix w = random_matrix(rng, 5, 4);
    for (bool dropout : {false, true}) {
      Rng mrng(seed + 100);
      const auto masks = dropout ? sample_dropout_masks(params, 5, {0.5, true}, mrng) : std::vector<Matrix>{};
      const auto fwd = forward_with_masks(params, x, masks);
      const auto g = backward(params, fwd.cache, w);
      const auto f = [&] { return gradcheck::weighted_sum(forward_with_masks(params, x, masks).output, w); };
      EXPECT_LT(gradcheck::check_params(params, g.params, f), 1e-4) << "seed " << seed << " dropout " << dropout;
      EXPECT_LT(gradcheck::check_matrix(x, g.input, f), 1e-4);
    }
  }
}

TEST(EncoderBackward, BatchOfIdenticalRowsSumsGradients) {
  Rng rng(6);
  const auto params = random_params(rng, encoder_dims(5, 4, 3));
  const auto one = random_matrix(rng, 1, 5);
  const auto up = random_matrix(rng, 1, 3);
  Matrix many(4, 5), up_many(4, 3);
  for (std::size_t r = 0; r < 4; ++r) {
    std::copy(one.row(0).begin(), one.row(0).end(), many.row(r).begin());
    std::copy(up.row(0).begin(), up.row(0).end(), up_many.row(r).begin());
  }
  const auto g1 = flatten(backward(params, forward_with_masks(params, one, {}).cache, up).params);
  const auto g4 = flatten(backward(params, forward_with_masks(params, many, {}).cache, up_many).params);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g4[i], 4.0 * g1[i], 1e-12 * (1 + std::abs(g1[i])));
}

TEST(EncoderBackward, StaleCache) {
  Rng rng(7);
  const auto a = random_params(rng, encoder_dims(5, 4, 3));
  const auto b = random_params(rng, encoder_dims(6, 4, 3));
  const auto fwd = forward_with_masks(a, random_matrix(rng, 2, 5), {});
  try {
    backward(b, fwd.cache, Matrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StaleCache);
  }
  EXPECT_THROW(backward(a, fwd.cache, Matrix(3, 3)), Error);
}

TEST(InitParams, SeededAndBounded) {
  const auto dims = encoder_dims(100, 16, 4);
  Rng a(1), b(1), c(2);
  const auto pa = init_params(dims, a);
  EXPECT_EQ(pa, init_params(dims, b));
  EXPECT_NE(pa, init_params(dims, c));
  for (double w : pa.layers[0].weight.data()) EXPECT_LE(std::abs(w), 0.1);
  for (const auto& l : pa.layers)
    for (double v : l.bias) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(pa.dims(), dims);
}

TEST(AdamW, ZeroGradientNoDecayIsNoOp) {
  Rng rng(8);
  auto params = random_params(rng, {3, 2});
  const auto before = params;
  auto st = AdamWState::for_params(params, {0.9, 0.999, 1e-8, 0.0});
  adamw_step(st, params, MlpParams::zeros(params.dims()), 0.1);
  EXPECT_EQ(params, before);
}

TEST(AdamW, FirstStepOnScalar) {
  auto params = MlpParams::zeros(std::vector<std::size_t>{1, 1});
  params.layers[0].weight(0, 0) = 1.0;
  auto grads = MlpParams::zeros(params.dims());
  grads.layers[0].weight(0, 0) = 1.0;
  auto st = AdamWState::for_params(params, {0.9, 0.999, 1e-8, 0.0});
  adamw_step(st, params, grads, 0.1);
  // m_hat = g, v_hat = g^2 at step 1
  EXPECT_NEAR(params.layers[0].weight(0, 0), 1.0 - 0.1 * (1.0 / (1.0 + 1e-8)), 1e-15);
  EXPECT_NEAR(params.layers[0].weight(0, 0), 0.9, 1e-6);
  EXPECT_EQ(st.step, 1u);
}

TEST(AdamW, PureDecayWithoutGradient) {
  auto params = MlpParams::zeros(std::vector<std::size_t>{2, 1});
  params.layers[0].weight = Matrix(2, 1, {2.0, -3.0});
  auto st = AdamWState::for_params(params, {0.9, 0.999, 1e-8, 0.01});
  adamw_step(st, params, MlpParams::zeros(params.dims()), 0.5);
  EXPECT_NEAR(params.layers[0].weight(0, 0), 2.0 * (1.0 - 0.5 * 0.01), 1e-15);
  EXPECT_NEAR(params.layers[0].weight(1, 0), -3.0 * (1.0 - 0.5 * 0.01), 1e-15);
}

TEST(AdamW, ZeroDecayEqualsReferenceAdam) {
  Rng rng(9);
  auto params = random_params(rng, {4, 3, 2});
  auto ref = flatten(params);
  ReferenceAdam adam;
  auto st = AdamWState::for_params(params, {0.9, 0.999, 1e-8, 0.0});
  for (int step = 0; step < 25; ++step) {
    auto grads = MlpParams::zeros(params.dims());
    grads.for_each_tensor([&](const std::string&, std::span<double> t) {
      for (double& g : t) g = rng.normal();
    });
    adamw_step(st, params, grads, 1e-2);
    adam.step(ref, flatten(grads), 1e-2);
  }
  const auto got = flatten(params);
  ASSERT_EQ(got.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-13);
}

TEST(AdamW, ShapeMismatch) {
  auto params = MlpParams::zeros(std::vector<std::size_t>{2, 2});
  auto st = AdamWState::for_params(params);
  EXPECT_THROW(adamw_step(st, params, MlpParams::zeros(std::vector<std::size_t>{3, 2}), 0.1), Error);
}

TEST(LrSchedule, MilestoneValues) {
  const LrSchedule s;
  EXPECT_EQ(s.lr_at(0), 1e-3);
  EXPECT_EQ(s.lr_at(149), 1e-3);
  EXPECT_EQ(s.lr_at(150), 1e-4);
  EXPECT_EQ(s.lr_at(449), 1e-4);
  EXPECT_EQ(s.lr_at(450), 1e-5);
  EXPECT_EQ(s.lr_at(499), 1e-5);
  for (int e = 0; e < 600; ++e) EXPECT_LE(s.lr_at(e + 1), s.lr_at(e));
}

TEST(LrSchedule, ValidatesMilestones) {
  LrSchedule s;
  s.milestones = {10, 10};
  EXPECT_THROW(s.validate(), Error);
  s.milestones = {10, 20};
  s.gamma = 1.5;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Checkpoint, TensorContainerRoundTrip) {
  Rng rng(10);
  const auto params = random_params(rng, encoder_dims(6, 5, 2));
  std::vector<checkpoint::Tensor> tensors;
  checkpoint::append_params(tensors, params, "encoder.");
  const auto bytes = checkpoint::encode(tensors);
  EXPECT_EQ(bytes.substr(0, 4), "LAMC");
  const auto back = checkpoint::decode(bytes);
  EXPECT_EQ(back, tensors);
  EXPECT_EQ(checkpoint::extract_params(back, "encoder."), params);
  EXPECT_THROW(checkpoint::decode(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(checkpoint::extract_params(back, "missing."), Error);
}
