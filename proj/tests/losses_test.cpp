#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "loganmeta/losses.hpp"
#include "loganmeta/rng.hpp"

using namespace loganmeta;
using namespace loganmeta::losses;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

PrototypeSet protos_of(Matrix m) {
  std::vector<std::size_t> counts(m.rows(), 1);
  return {std::move(m), std::move(counts)};
}

}  // namespace

TEST(Prototypes, MeanOfSupportMatchesBruteForce) {
  Rng rng(1);
  const auto emb = random_matrix(rng, 9, 4);
  const std::vector<int> labels{2, 0, 1, 1, 0, 2, 2, 0, 1};
  const auto p = compute_prototypes(emb, labels, 3);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < 4; ++k) {
      double s = 0.0;
      int n = 0;
      for (std::size_t r = 0; r < labels.size(); ++r)
        if (labels[r] == c) s += emb(r, k), ++n;
      EXPECT_NEAR(p.vectors(c, k), s / n, 1e-15);
    }
    EXPECT_EQ(p.counts[c], 3u);
  }
}

TEST(Prototypes, SingleShotIsTheEmbedding) {
  const Matrix emb(2, 2, {1.0, 2.0, -3.0, 4.0});
  const std::vector<int> labels{1, 0};
  const auto p = compute_prototypes(emb, labels, 2);
  EXPECT_EQ(p.vectors, Matrix(2, 2, {-3.0, 4.0, 1.0, 2.0}));
}

TEST(Prototypes, EmptyClassAndUnknownLabel) {
  const Matrix emb(2, 2);
  const std::vector<int> labels{0, 0};
  try {
    compute_prototypes(emb, labels, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyClass);
  }
  const std::vector<int> bad{0, 5};
  try {
    compute_prototypes(emb, bad, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownLabel);
  }
}

TEST(Classify, MatchesBruteForceArgmin) {
  Rng rng(2);
  const auto protos = protos_of(random_matrix(rng, 5, 3));
  for (int t = 0; t < 200; ++t) {
    const auto q = random_matrix(rng, 1, 3, 2.0);
    int best = 0;
    double bd = 1e300;
    for (int c = 0; c < 5; ++c) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += (q(0, k) - protos.vectors(c, k)) * (q(0, k) - protos.vectors(c, k));
      if (d < bd) bd = d, best = c;
    }
    EXPECT_EQ(classify(protos, q.row(0)).label, best);
    EXPECT_EQ(classify(protos, q.row(0), DistanceKind::Euclidean).label, best);
  }
}

TEST(Classify, TiesGoToLowestId) {
  const auto protos = protos_of(Matrix(3, 1, {1.0, -1.0, 1.0}));
  const std::vector<double> q{0.0};
  EXPECT_EQ(classify(protos, q).label, 0);
  const auto same = protos_of(Matrix(2, 2, {0.5, 0.5, 0.5, 0.5}));
  const std::vector<double> q2{0.5, 0.5};
  EXPECT_EQ(classify(same, q2).label, 0);
}

TEST(ProtoLoss, EqualDistancesTwoWayIsLn2) {
  const auto protos = protos_of(Matrix(2, 1, {1.0, -1.0}));
  const Matrix q(1, 1, {0.0});
  const std::vector<int> y{1};
  const auto r = proto_loss(protos, q, y);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
}

TEST(ProtoLoss, HandComputedThreeClass) {
  // squared distances from q = (0, 0): 1, 4, 9
  const auto protos = protos_of(Matrix(3, 2, {1.0, 0.0, 0.0, 2.0, 3.0, 0.0}));
  const Matrix q(1, 2, {0.0, 0.0});
  const std::vector<int> y{1};
  const double expected = 4.0 + std::log(std::exp(-1.0) + std::exp(-4.0) + std::exp(-9.0));
  const auto r = proto_loss(protos, q, y);
  EXPECT_NEAR(r.loss, expected, 1e-14);
  EXPECT_EQ(r.correct, 0u);
}

TEST(ProtoLoss, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    for (auto kind : {DistanceKind::SquaredEuclidean, DistanceKind::Euclidean}) {
      auto protos = protos_of(random_matrix(rng, 3, 4));
      Matrix q = random_matrix(rng, 6, 4);
      const std::vector<int> y{0, 1, 2, 2, 1, 0};
      const auto r = proto_loss(protos, q, y, kind);
      const auto f = [&] { return proto_loss(protos, q, y, kind).loss; };
      EXPECT_LT(gradcheck::check_matrix(q, r.grad_query, f), 1e-4);
      EXPECT_LT(gradcheck::check_matrix(protos.vectors, r.grad_prototypes, f), 1e-4);
    }
  }
}

TEST(ProtoLoss, GradientThroughSupportMean) {
  Rng rng(11);
  Matrix support = random_matrix(rng, 6, 3);
  const std::vector<int> sl{0, 0, 1, 1, 2, 2};
  const Matrix q = random_matrix(rng, 3, 3);
  const std::vector<int> ql{0, 1, 2};
  const auto protos = compute_prototypes(support, sl, 3);
  const auto r = proto_loss(protos, q, ql);
  const auto g = prototype_grad_to_support(protos, sl, r.grad_prototypes);
  const auto f = [&] { return proto_loss(compute_prototypes(support, sl, 3), q, ql).loss; };
  EXPECT_LT(gradcheck::check_matrix(support, g, f), 1e-4);
}

TEST(ProtoLoss, CountsCorrect) {
  const auto protos = protos_of(Matrix(2, 1, {0.0, 10.0}));
  const Matrix q(3, 1, {1.0, 9.0, 2.0});
  const std::vector<int> y{0, 1, 1};
  EXPECT_EQ(proto_loss(protos, q, y).correct, 2u);
}

TEST(TripletLoss, TrivialCases) {
  Matrix a(1, 2, {0.0, 0.0}), p(1, 2, {0.0, 0.0}), n(1, 2, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(triplet_loss(a, p, n, 1.0).loss, 1.0);  // all equal: margin
  n = Matrix(1, 2, {2.0, 0.0});
  const auto far = triplet_loss(a, p, n, 1.0);
  EXPECT_EQ(far.loss, 0.0);
  EXPECT_EQ(far.active, 0u);
  for (double v : far.grad_anchor.data()) EXPECT_EQ(v, 0.0);
  p = Matrix(1, 2, {0.0, 1.0});
  n = Matrix(1, 2, {1.0, 1.0});
  EXPECT_EQ(triplet_loss(a, p, n, 0.5).loss, 0.0);
  EXPECT_DOUBLE_EQ(triplet_loss(a, p, n, 1.5).loss, 0.5);
}

TEST(TripletLoss, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    for (auto kind : {DistanceKind::SquaredEuclidean, DistanceKind::Euclidean}) {
      Matrix a = random_matrix(rng, 8, 3), p = random_matrix(rng, 8, 3), n = random_matrix(rng, 8, 3);
      const auto r = triplet_loss(a, p, n, 2.0, kind);
      const auto f = [&] { return triplet_loss(a, p, n, 2.0, kind).loss; };
      EXPECT_LT(gradcheck::check_matrix(a, r.grad_anchor, f), 1e-4);
      EXPECT_LT(gradcheck::check_matrix(p, r.grad_positive, f), 1e-4);
      EXPECT_LT(gradcheck::check_matrix(n, r.grad_negative, f), 1e-4);
    }
  }
}

TEST(TripletLoss, BatchMismatch) {
  try {
    triplet_loss(Matrix(2, 2), Matrix(3, 2), Matrix(2, 2), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BatchMismatch);
  }
}

TEST(HybridLoss, WeightedSum) {
  EXPECT_DOUBLE_EQ(hybrid_loss(2.0, 4.0), 3.0);
  EXPECT_DOUBLE_EQ(hybrid_loss(2.0, 4.0, 1.0, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(hybrid_loss(2.0, 4.0, 0.25, 0.75), 3.5);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  const Matrix z(2, 4, 0.3);
  const std::vector<int> y{1, 3};
  const auto r = cross_entropy(z, y);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-15);
  EXPECT_NEAR(r.grad_logits(0, 1), (0.25 - 1.0) / 2.0, 1e-15);
  EXPECT_NEAR(r.grad_logits(0, 0), 0.25 / 2.0, 1e-15);
}

TEST(CrossEntropy, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  Matrix z = random_matrix(rng, 7, 5, 3.0);
  const std::vector<int> y{0, 4, 2, 2, 1, 3, 0};
  const auto r = cross_entropy(z, y);
  EXPECT_LT(gradcheck::check_matrix(z, r.grad_logits, [&] { return cross_entropy(z, y).loss; }), 1e-4);
}

TEST(CrossEntropy, LargeLogitsStayFinite) {
  const Matrix z(1, 2, {1000.0, -1000.0});
  const std::vector<int> y{1};
  const auto r = cross_entropy(z, y);
  EXPECT_NEAR(r.loss, 2000.0, 1e-9);
  EXPECT_TRUE(r.grad_logits.all_finite());
  EXPECT_THROW(cross_entropy(z, std::vector<int>{2}), Error);
}

TEST(Argmax, LowestTie) {
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1);
  EXPECT_EQ(argmax(std::vector<double>{-1.0}), 0);
}
