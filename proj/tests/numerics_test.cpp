#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "srl/core/parallel.hpp"
#include "srl/core/rng.hpp"
#include "srl/numerics/adam.hpp"
#include "srl/numerics/checkpoint.hpp"
#include "srl/numerics/grad_check.hpp"
#include "srl/numerics/mlp.hpp"

using namespace srl;
using namespace srl::nn;

namespace {

using DParams = BasicMlpParams<double>;
using DGrad = BasicGradBuffer<double>;
using DMatrix = MatrixT<double>;

// Scalar re-evaluation of an MLP: explicit loops, no Eigen products.
std::vector<double> scalar_forward(const DParams& p, std::vector<double> x) {
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    std::vector<double> z(static_cast<std::size_t>(p.layer_sizes[l + 1]), 0.0);
    for (int i = 0; i < p.layer_sizes[l + 1]; ++i) {
      double acc = p.biases[l](i);
      for (int j = 0; j < p.layer_sizes[l]; ++j) acc += p.weights[l](i, j) * x[static_cast<std::size_t>(j)];
      if (l + 1 < p.num_layers()) acc = std::max(acc, 0.0);
      z[static_cast<std::size_t>(i)] = acc;
    }
    x = std::move(z);
  }
  return x;
}

// Smallest |pre-activation| of any hidden unit over the batch.
double kink_margin(const DParams& p, const DMatrix& x) {
  DMatrix a = x;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < p.num_layers(); ++l) {
    DMatrix z = p.weights[l] * a;
    z.colwise() += p.biases[l];
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return margin;
}

DMatrix random_matrix(int rows, int cols, Rng& rng) {
  DMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST(Mlp, ZeroParamsGiveZeroOutput) {
  auto p = MlpParams::zeros({3, 5, 2});
  const std::vector<float> x{0.3f, -2.0f, 7.0f};
  const Vector y = mlp_apply(p, x);
  EXPECT_EQ(y.size(), 2);
  EXPECT_EQ(y.squaredNorm(), 0.0f);
}

TEST(Mlp, IdentityBlocksApplyRelu) {
  auto p = MlpParams::zeros({2, 2, 2});
  p.weights[0].setIdentity();
  p.weights[1].setIdentity();
  const std::vector<float> x{1.0f, -1.0f};
  const Vector y = mlp_apply(p, x);
  EXPECT_FLOAT_EQ(y(0), 1.0f);
  EXPECT_FLOAT_EQ(y(1), 0.0f);
}

TEST(Mlp, MatchesScalarEvaluation) {
  Rng rng(11);
  const auto p = BasicMlpParams<double>::init({4, 7, 5, 3}, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    const auto [y, cache] = mlp_forward<double>(p, x);
    const auto expect = scalar_forward(p, x);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(y(i), expect[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Mlp, BatchAndSingleAgree) {
  Rng rng(3);
  const auto p = MlpParams::init({3, 16, 2}, rng);
  Matrix x(3, 4);
  x.setRandom();
  const Matrix batch = mlp_apply_batch(p, x);
  for (int j = 0; j < 4; ++j) {
    const Vector single = mlp_apply(p, std::span<const float>(x.col(j).data(), 3));
    EXPECT_LT((batch.col(j) - single).cwiseAbs().maxCoeff(), 1e-5f);
  }
}

TEST(Mlp, ForwardIsDeterministic) {
  Rng rng(5);
  const auto p = MlpParams::init({6, 32, 32, 4}, rng);
  const std::vector<float> x{0.1f, 0.2f, -0.3f, 0.4f, 0.5f, -0.6f};
  const Vector a = mlp_apply(p, x), b = mlp_apply(p, x);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a(i), b(i));

  Rng rng2(5);
  const auto q = MlpParams::init({6, 32, 32, 4}, rng2);
  const Vector c = mlp_apply(q, x);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a(i), c(i));
}

TEST(Mlp, RejectsWrongInputSize) {
  const auto p = MlpParams::zeros({3, 2});
  const std::vector<float> x{1.0f, 2.0f};
  EXPECT_THROW(mlp_apply(p, x), std::invalid_argument);
  EXPECT_THROW(mlp_forward_batch(p, Matrix(Matrix::Zero(2, 1))), std::invalid_argument);
}

TEST(Mlp, ZeroOutputGradGivesZeroGradients) {
  Rng rng(8);
  const auto p = MlpParams::init({3, 8, 2}, rng);
  const auto cache = mlp_forward_batch(p, Matrix(Matrix::Random(3, 5)));
  const GradBuffer g = mlp_backward(p, cache, Matrix(Matrix::Zero(2, 5)));
  EXPECT_EQ(g.squared_norm(), 0.0);
}

TEST(Mlp, LinearLayerGradientIsOuterProduct) {
  Rng rng(2);
  const auto p = BasicMlpParams<double>::init({3, 2}, rng);
  const std::vector<double> x{0.5, -1.5, 2.0};
  const std::vector<double> g{0.25, -3.0};
  const auto [y, cache] = mlp_forward<double>(p, x);
  const DGrad grad = mlp_backward<double>(p, cache, g);
  for (int i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(grad.biases[0](i), g[static_cast<std::size_t>(i)]);
    for (int j = 0; j < 3; ++j)
      EXPECT_DOUBLE_EQ(grad.weights[0](i, j), g[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)]);
  }
}

TEST(Mlp, StaleCacheRejected) {
  Rng rng(4);
  auto p = MlpParams::init({2, 4, 1}, rng);
  const auto cache = mlp_forward_batch(p, Matrix(Matrix::Random(2, 3)));
  p.touch();
  EXPECT_THROW(mlp_backward(p, cache, Matrix(Matrix::Ones(1, 3))), std::invalid_argument);
}

TEST(GradCheck, ReluNetMatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 10; ++seed) {
    Rng rng(seed);
    const auto p = DParams::init({5, 16, 12, 3}, rng);
    const DMatrix x = random_matrix(5, 6, rng);
    const DMatrix target = random_matrix(3, 6, rng);
    if (kink_margin(p, x) < 1e-3) continue;
    auto loss = [&](const DParams& q) {
      const DMatrix y = mlp_apply_batch(q, x);
      return 0.5 * (y - target).squaredNorm();
    };
    auto analytic = [&](const DParams& q) {
      const auto cache = mlp_forward_batch(q, x);
      return mlp_backward(q, cache, DMatrix(cache.output() - target));
    };
    EXPECT_LE(grad_check(p, loss, analytic), 1e-4) << "seed " << seed;
    ++checked;
  }
}

TEST(GradCheck, QuadraticLossOnLinearLayer) {
  Rng rng(21);
  const auto p = DParams::init({4, 3}, rng);
  const DMatrix x = random_matrix(4, 8, rng);
  auto loss = [&](const DParams& q) { return 0.5 * mlp_apply_batch(q, x).squaredNorm(); };
  auto analytic = [&](const DParams& q) {
    const auto cache = mlp_forward_batch(q, x);
    return mlp_backward(q, cache, cache.output());
  };
  EXPECT_LT(grad_check(p, loss, analytic), 1e-6);
}

TEST(GradCheck, InputGradientMatchesFiniteDifferences) {
  Rng rng(9);
  const auto p = DParams::init({3, 10, 2}, rng);
  DMatrix x = random_matrix(3, 1, rng);
  const DMatrix w = random_matrix(2, 1, rng);
  const auto cache = mlp_forward_batch(p, x);
  DGrad g(p);
  DMatrix dx;
  mlp_backward_accumulate(p, cache, w, g, &dx);
  for (int i = 0; i < 3; ++i) {
    DMatrix up = x, down = x;
    up(i, 0) += 1e-6;
    down(i, 0) -= 1e-6;
    const double num = (w.cwiseProduct(mlp_apply_batch(p, up)).sum() - w.cwiseProduct(mlp_apply_batch(p, down)).sum()) / 2e-6;
    EXPECT_NEAR(dx(i, 0), num, 1e-6);
  }
}

TEST(GradCheck, ConstantLossIsExact) {
  Rng rng(1);
  const auto p = DParams::init({2, 3, 1}, rng);
  const double err = grad_check(p, [](const DParams&) { return 4.0; }, [](const DParams& q) { return DGrad(q); });
  EXPECT_EQ(err, 0.0);
}

TEST(Adam, ZeroGradientLeavesParametersForAnyState) {
  Rng rng(6);
  auto p = MlpParams::init({2, 4, 1}, rng);
  AdamState st(p, AdamConfig{});
  GradBuffer g(p);
  g.weights[0].setConstant(0.3f);
  ASSERT_TRUE(adam_step(p, g, st).applied);  // builds up momentum
  const auto before = p;
  GradBuffer zero(p);
  const auto steps = st.step_count;
  adam_step(p, zero, st);
  EXPECT_EQ(st.step_count, steps + 1);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    EXPECT_EQ(p.weights[l], before.weights[l]);
    EXPECT_EQ(p.biases[l], before.biases[l]);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = MlpParams::zeros({1, 1});
  p.weights[0](0, 0) = 2.0f;
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  AdamState st(p, cfg);
  GradBuffer g(p);
  g.weights[0](0, 0) = 1.0f;
  adam_step(p, g, st);
  // m_hat = 1, v_hat = 1 after bias correction, so the step is lr / (1 + eps).
  EXPECT_NEAR(2.0 - p.weights[0](0, 0), 1e-3 / (1.0 + 1e-8), 1e-7);
}

TEST(Adam, RepeatedGradientKeepsStepSize) {
  auto p = MlpParams::zeros({1, 1});
  AdamState st(p, AdamConfig{});
  GradBuffer g(p);
  g.weights[0](0, 0) = 0.7f;
  adam_step(p, g, st);
  const double first = -p.weights[0](0, 0);
  adam_step(p, g, st);
  const double second = -p.weights[0](0, 0) - first;
  EXPECT_NEAR(second, first, 0.1 * first);
}

TEST(Adam, NonFiniteGradientIsSkipped) {
  Rng rng(7);
  auto p = MlpParams::init({2, 2}, rng);
  const auto before = p;
  AdamState st(p, AdamConfig{});
  GradBuffer g(p);
  g.biases[0](1) = std::numeric_limits<float>::quiet_NaN();
  const auto r = adam_step(p, g, st);
  EXPECT_FALSE(r.applied);
  EXPECT_FALSE(r.diagnostic.empty());
  EXPECT_EQ(st.step_count, 0u);
  EXPECT_EQ(p.weights[0], before.weights[0]);
}

TEST(Adam, LearningRateDecaysPerPass) {
  auto p = MlpParams::zeros({1, 1});
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.lr_decay = 0.999;
  AdamState st(p, cfg);
  for (int i = 0; i < 10; ++i) st.finish_update_pass();
  EXPECT_NEAR(st.learning_rate, 1e-3 * std::pow(0.999, 10), 1e-15);
}

TEST(Adam, GlobalNormClip) {
  auto p = MlpParams::zeros({2, 1});
  GradBuffer g(p);
  g.weights[0] << 3.0f, 4.0f;
  const double norm = clip_global_norm(g, 1.0);
  EXPECT_NEAR(norm, 5.0, 1e-6);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 1.0, 1e-6);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  Rng rng(12);
  Checkpoint ck;
  ck.config_hash = 0xfeedULL;
  ck.seed = 42;
  ck.iteration = 17;
  ck.extra["cfg.env"] = "point_maze";
  auto net = MlpParams::init({3, 8, 2}, rng);
  AdamState st(net, AdamConfig{});
  GradBuffer g(net);
  g.weights[0].setConstant(0.5f);
  adam_step(net, g, st);
  ck.networks.emplace_back("actor", net);
  ck.optimizers.emplace_back("actor", st);

  const Checkpoint back = load_checkpoint(save_checkpoint(ck));
  EXPECT_EQ(back.config_hash, ck.config_hash);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.iteration, 17u);
  EXPECT_EQ(back.extra.at("cfg.env"), "point_maze");
  const std::vector<float> x{0.1f, -0.7f, 0.3f};
  const Vector a = mlp_apply(net, x), b = mlp_apply(back.network("actor"), x);
  for (int i = 0; i < 2; ++i) EXPECT_EQ(a(i), b(i));
  EXPECT_EQ(back.optimizer("actor").step_count, 1u);
  EXPECT_EQ(back.optimizer("actor").first_moment.weights[0], st.first_moment.weights[0]);
}

TEST(Checkpoint, TruncatedPayloadIsCorrupt) {
  Rng rng(1);
  Checkpoint ck;
  ck.networks.emplace_back("q", MlpParams::init({2, 3, 1}, rng));
  auto bytes = save_checkpoint(ck);
  bytes.resize(bytes.size() - 5);
  try {
    load_checkpoint(bytes);
    FAIL() << "truncated checkpoint loaded";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::corrupted);
  }
}

TEST(Checkpoint, FlippedByteIsCorrupt) {
  Checkpoint ck;
  ck.networks.emplace_back("q", MlpParams::zeros({2, 1}));
  auto bytes = save_checkpoint(ck);
  bytes[bytes.size() / 2] ^= 0x40;
  EXPECT_THROW(load_checkpoint(bytes), CheckpointError);
}

TEST(Checkpoint, VersionMismatch) {
  Checkpoint ck;
  auto bytes = save_checkpoint(ck);
  bytes[8] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
  try {
    load_checkpoint(bytes);
    FAIL() << "wrong version loaded";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::version_mismatch);
  }
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::stream(9, {2, 0}), b = Rng::stream(9, {2, 0}), c = Rng::stream(9, {2, 1});
  const auto x = a(), y = b(), z = c();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
}

TEST(Rng, DistributionMoments) {
  Rng rng(77);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, sb = 0;
  for (int i = 0; i < n; ++i) {
    su += rng.uniform();
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sb += rng.beta(2.0, 5.0);
  }
  EXPECT_NEAR(su / n, 0.5, 5e-3);
  EXPECT_NEAR(sn / n, 0.0, 1e-2);
  EXPECT_NEAR(sn2 / n, 1.0, 2e-2);
  EXPECT_NEAR(sb / n, 2.0 / 7.0, 3e-3);
}

TEST(Rng, BelowIsInRange) {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    ++hits[k];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  auto run = [](int workers) {
    std::vector<std::uint64_t> out(37);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      Rng r = Rng::stream(5, {i});
      out[i] = r();
    });
    return out;
  };
  EXPECT_EQ(run(1), run(4));
  EXPECT_EQ(run(1), run(64));
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 6) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
