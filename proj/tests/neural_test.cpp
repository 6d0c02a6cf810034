#include "seqlink/neural.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "seqlink/checkpoint.hpp"
#include "seqlink/errors.hpp"

namespace {

using namespace seqlink;
using neural::Mat;
using neural::Vec;

TEST(Softmax, UniformOnEqualLogits) {
  Vec logits = Vec::Zero(3);
  Vec probs = neural::softmax(logits);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(probs[i], 1.0 / 3.0, 1e-12);
}

TEST(Softmax, StableUnderLargeLogits) {
  Vec logits(2);
  logits << 1000.0, 0.0;
  Vec probs = neural::softmax(logits);
  EXPECT_NEAR(probs[0], 1.0, 1e-12);
  EXPECT_NEAR(probs[1], 0.0, 1e-12);
  EXPECT_TRUE(probs.allFinite());
}

TEST(Softmax, MatchesDirectEvaluation) {
  Vec logits(3);
  logits << 1.0, 2.0, 3.0;
  // Independent evaluation of exp/sum.
  double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  double z = e1 + e2 + e3;
  Vec probs = neural::softmax(logits);
  EXPECT_NEAR(probs[0], e1 / z, 1e-12);
  EXPECT_NEAR(probs[1], e2 / z, 1e-12);
  EXPECT_NEAR(probs[2], e3 / z, 1e-12);
  EXPECT_NEAR(probs[0], 0.0900, 5e-5);
  EXPECT_NEAR(probs[1], 0.2447, 5e-5);
  EXPECT_NEAR(probs[2], 0.6652, 5e-5);
}

TEST(Softmax, ContractOverRandomLogits) {
  Rng rng = make_rng(3, "softmax_prop");
  for (int trial = 0; trial < 200; ++trial) {
    int n = uniform_int(rng, 1, 12);
    Vec logits(n);
    for (int i = 0; i < n; ++i) logits[i] = uniform_range(rng, -50.0, 50.0);
    Vec probs = neural::softmax(logits);
    double sum = probs.sum();
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_GE(probs.minCoeff(), 0.0);
    int amax_l = 0, amax_p = 0;
    logits.maxCoeff(&amax_l);
    probs.maxCoeff(&amax_p);
    EXPECT_EQ(amax_l, amax_p);
  }
}

TEST(Softmax, EmptyInputThrows) {
  EXPECT_THROW(neural::softmax(Vec()), DimensionError);
}

TEST(Dense, IdentityWeightsPassNonNegativesThrough) {
  neural::ParamStore store;
  Rng rng = make_rng(1, "dense1");
  neural::Dense layer(store, "d", 3, 3, /*relu=*/true, rng);
  store.param("d/W") = Mat::Identity(3, 3);
  store.param("d/b").setZero();
  Mat x(1, 3);
  x << 0.5, 0.0, 2.0;
  Mat y = layer.forward(store, x);
  EXPECT_TRUE(y.isApprox(x));
}

TEST(Dense, ReluClampsNegativePreactivations) {
  neural::ParamStore store;
  Rng rng = make_rng(1, "dense2");
  neural::Dense layer(store, "d", 2, 2, /*relu=*/true, rng);
  store.param("d/W").setZero();
  store.param("d/b").setConstant(-1.0);
  Mat x = Mat::Zero(1, 2);
  Mat y = layer.forward(store, x);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.0);
}

TEST(Dense, MatchesHandMatrixMultiply) {
  neural::ParamStore store;
  Rng rng = make_rng(7, "dense3");
  neural::Dense layer(store, "d", 2, 3, /*relu=*/false, rng);
  const Mat& w = store.param("d/W");
  const Mat& b = store.param("d/b");
  Mat x(1, 2);
  x << 0.3, -1.2;
  Mat y = layer.forward(store, x);
  for (int r = 0; r < 3; ++r) {
    double expected = b(r, 0);
    for (int c = 0; c < 2; ++c) expected += w(r, c) * x(0, c);
    EXPECT_NEAR(y(0, r), expected, 1e-12);
  }
}

TEST(Dense, ShapeMismatchNamesLayer) {
  neural::ParamStore store;
  Rng rng = make_rng(7, "dense4");
  neural::Dense layer(store, "mylayer", 2, 3, false, rng);
  Mat x(1, 5);
  x.setZero();
  try {
    layer.forward(store, x);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("mylayer"), std::string::npos);
  }
}

TEST(Lstm, ZeroEverythingIsFixedPoint) {
  neural::ParamStore store;
  Rng rng = make_rng(2, "lstm1");
  neural::LstmCell cell(store, "l", 3, 4, rng);
  store.param("l/W").setZero();
  store.param("l/b").setZero();
  Vec h, c;
  cell.step(store, Vec::Zero(3), Vec::Zero(4), Vec::Zero(4), h, c);
  EXPECT_DOUBLE_EQ(h.norm(), 0.0);
  EXPECT_DOUBLE_EQ(c.norm(), 0.0);
}

TEST(Lstm, SaturatedForgetGatePreservesCell) {
  neural::ParamStore store;
  Rng rng = make_rng(2, "lstm2");
  const int H = 3;
  neural::LstmCell cell(store, "l", 2, H, rng);
  store.param("l/W").setZero();
  Mat& b = store.param("l/b");
  b.setZero();
  for (int i = 0; i < H; ++i) {
    b(i, 0) = -100.0;      // input gate ~ 0
    b(H + i, 0) = 100.0;   // forget gate ~ 1
    b(2 * H + i, 0) = 100.0;  // output gate ~ 1 (observe c through h)
  }
  Vec c_prev(H);
  c_prev << 0.3, -0.7, 1.5;
  Vec h, c;
  cell.step(store, Vec::Zero(2), Vec::Zero(H), c_prev, h, c);
  EXPECT_TRUE(c.isApprox(c_prev, 1e-9));
}

TEST(Lstm, BiasOnlyGatesMatchClosedForm) {
  neural::ParamStore store;
  Rng rng = make_rng(9, "lstm3");
  const int H = 4;
  neural::LstmCell cell(store, "l", 2, H, rng);
  Mat& b = store.param("l/b");
  neural::init_uniform(b, rng, -0.5, 0.5);
  // With x = 0 and h_prev = 0 only the biases drive the gates.
  Vec h, c;
  cell.step(store, Vec::Zero(2), Vec::Zero(H), Vec::Zero(H), h, c);
  for (int i = 0; i < H; ++i) {
    double gi = 1.0 / (1.0 + std::exp(-b(i, 0)));
    double gf = 1.0 / (1.0 + std::exp(-b(H + i, 0)));
    double go = 1.0 / (1.0 + std::exp(-b(2 * H + i, 0)));
    double gg = std::tanh(b(3 * H + i, 0));
    (void)gf;  // c_prev is zero, the forget path contributes nothing
    double ci = gi * gg;
    EXPECT_NEAR(c[i], ci, 1e-12);
    EXPECT_NEAR(h[i], go * std::tanh(ci), 1e-12);
  }
}

TEST(Lstm, TwoDimStepMatchesScalarOracle) {
  neural::ParamStore store;
  Rng rng = make_rng(5, "lstm4");
  const int H = 2, I = 2;
  neural::LstmCell cell(store, "l", I, H, rng);
  const Mat& w = store.param("l/W");
  const Mat& b = store.param("l/b");
  Vec x(I), h_prev(H), c_prev(H);
  x << 0.4, -0.9;
  h_prev << 0.1, 0.2;
  c_prev << -0.3, 0.5;

  // Scalar-by-scalar evaluation of the gate equations.
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  Vec xz(I + H);
  xz << x, h_prev;
  Vec expected_h(H), expected_c(H);
  for (int i = 0; i < H; ++i) {
    double zi = b(i, 0), zf = b(H + i, 0), zo = b(2 * H + i, 0), zg = b(3 * H + i, 0);
    for (int j = 0; j < I + H; ++j) {
      zi += w(i, j) * xz[j];
      zf += w(H + i, j) * xz[j];
      zo += w(2 * H + i, j) * xz[j];
      zg += w(3 * H + i, j) * xz[j];
    }
    expected_c[i] = sig(zf) * c_prev[i] + sig(zi) * std::tanh(zg);
    expected_h[i] = sig(zo) * std::tanh(expected_c[i]);
  }

  Vec h, c;
  cell.step(store, x, h_prev, c_prev, h, c);
  EXPECT_TRUE(h.isApprox(expected_h, 1e-12));
  EXPECT_TRUE(c.isApprox(expected_c, 1e-12));
}

TEST(Lstm, EmptySequenceEncodesToZero) {
  neural::ParamStore store;
  Rng rng = make_rng(5, "lstm5");
  neural::LstmCell cell(store, "l", 2, 3, rng);
  Vec h = cell.encode(store, {});
  EXPECT_DOUBLE_EQ(h.norm(), 0.0);
}

TEST(Losses, HingeRank) {
  EXPECT_DOUBLE_EQ(neural::hinge_rank_loss(1.0, 0.0, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(neural::hinge_rank_loss(0.5, 0.5, 0.1), 0.1);
  EXPECT_NEAR(neural::hinge_rank_loss(0.2, 0.5, 0.1), 0.4, 1e-12);
  EXPECT_THROW(neural::hinge_rank_loss(1.0, 0.0, 0.0), ConfigError);
  EXPECT_THROW(neural::hinge_rank_loss(1.0, 0.0, -0.1), ConfigError);
}

TEST(Losses, BinaryCrossEntropy) {
  EXPECT_NEAR(neural::bce_loss(1.0, 1.0 - 1e-7), 0.0, 1e-6);
  EXPECT_NEAR(neural::bce_loss(0.0, 0.5), std::log(2.0), 1e-12);
  EXPECT_NEAR(neural::bce_loss(1.0, 0.5), std::log(2.0), 1e-12);
  // Clamping keeps the loss finite at the boundaries.
  EXPECT_TRUE(std::isfinite(neural::bce_loss(1.0, 0.0)));
  EXPECT_TRUE(std::isfinite(neural::bce_loss(0.0, 1.0)));
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  neural::ParamStore store;
  Mat& p = store.create("p", 2, 2);
  p << 1.0, 2.0, 3.0, 4.0;
  Mat before = p;
  store.adam_step({.lr = 0.1});
  EXPECT_TRUE(store.param("p").isApprox(before));
}

TEST(Adam, SingleStepFromFreshStateMovesByLearningRate) {
  neural::ParamStore store;
  Mat& p = store.create("p", 1, 1);
  p(0, 0) = 5.0;
  store.grad("p")(0, 0) = 1.0;
  store.adam_step({.lr = 1e-3});
  // With bias correction, m_hat = g and v_hat = g^2, so the step is
  // lr * g / (|g| + eps) ~ lr.
  EXPECT_NEAR(p(0, 0), 5.0 - 1e-3, 1e-9);
  EXPECT_DOUBLE_EQ(store.grad("p")(0, 0), 0.0);  // gradients zeroed after
}

TEST(Adam, ConstantGradientStepMagnitudeApproachesLearningRate) {
  neural::ParamStore store;
  Mat& p = store.create("p", 1, 1);
  p(0, 0) = 0.0;
  const double lr = 1e-2, g = 0.37;
  double prev = p(0, 0);
  for (int i = 0; i < 500; ++i) {
    store.grad("p")(0, 0) = g;
    store.adam_step({.lr = lr});
  }
  store.grad("p")(0, 0) = g;
  prev = p(0, 0);
  store.adam_step({.lr = lr});
  EXPECT_NEAR(std::abs(p(0, 0) - prev), lr, 1e-6);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  neural::ParamStore store;
  Mat& p = store.create("p", 2, 1);
  p << 1.0, -1.0;
  Mat before = p;
  store.grad("p") << 3.0, -2.0;
  store.adam_step({.lr = 0.0});
  EXPECT_TRUE(store.param("p").isApprox(before));
}

TEST(Adam, GradientShapeMismatchNamesParameter) {
  neural::ParamStore store;
  store.create("oddball", 2, 2);
  store.grad("oddball") = Mat::Zero(3, 3);
  try {
    store.adam_step({.lr = 0.1});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("oddball"), std::string::npos);
  }
}

TEST(Adam, GlobalNormClipScalesLargeGradients) {
  neural::ParamStore store;
  Mat& p = store.create("p", 1, 1);
  p(0, 0) = 0.0;
  store.grad("p")(0, 0) = 100.0;
  store.adam_step({.lr = 1e-3, .clip_norm = 5.0});
  // Direction preserved; one Adam step stays ~lr regardless of magnitude.
  EXPECT_LT(p(0, 0), 0.0);
}

TEST(Dropout, KeepProbabilityOneIsIdentity) {
  Rng rng = make_rng(4, "dropout1");
  Vec x(4);
  x << 1.0, -2.0, 3.0, -4.0;
  neural::DropoutMask mask;
  Vec y = neural::dropout_forward(x, 1.0, true, rng, mask);
  EXPECT_TRUE(y.isApprox(x));
  Vec dy(4);
  dy << 1, 1, 1, 1;
  EXPECT_TRUE(neural::dropout_backward(dy, mask).isApprox(dy));
}

TEST(Dropout, DisabledAtInference) {
  Rng rng = make_rng(4, "dropout2");
  Vec x(4);
  x << 1.0, -2.0, 3.0, -4.0;
  neural::DropoutMask mask;
  Vec y = neural::dropout_forward(x, 0.5, false, rng, mask);
  EXPECT_TRUE(y.isApprox(x));
}

TEST(Dropout, KeptUnitsAreScaled) {
  Rng rng = make_rng(4, "dropout3");
  Vec x = Vec::Ones(1000);
  neural::DropoutMask mask;
  Vec y = neural::dropout_forward(x, 0.8, true, rng, mask);
  int kept = 0;
  for (int i = 0; i < 1000; ++i) {
    if (y[i] != 0.0) {
      EXPECT_NEAR(y[i], 1.0 / 0.8, 1e-12);
      ++kept;
    }
  }
  EXPECT_NEAR(kept / 1000.0, 0.8, 0.05);
  // Backward applies the same mask.
  Vec dy = Vec::Ones(1000);
  Vec dx = neural::dropout_backward(dy, mask);
  for (int i = 0; i < 1000; ++i) EXPECT_DOUBLE_EQ(dx[i], y[i]);
}

TEST(GradCheck, LinearModelIsExact) {
  neural::ParamStore store;
  Mat& w = store.create("w", 1, 4);
  Rng rng = make_rng(6, "gc1");
  neural::init_uniform(w, rng, -1.0, 1.0);
  Vec x(4);
  x << 0.3, -0.7, 1.1, 0.2;
  auto loss_fn = [&]() {
    double loss = store.param("w").row(0).dot(x);
    store.grad("w").row(0) += x.transpose();
    return loss;
  };
  Rng coord_rng = make_rng(6, "gc1_coords");
  auto report = neural::grad_check(store, loss_fn, 1e-5, 100, coord_rng);
  EXPECT_LT(report.max_rel_error, 1e-7);
}

TEST(GradCheck, MlpWithReluPasses) {
  neural::ParamStore store;
  Rng rng = make_rng(8, "gc2");
  neural::Dense l0(store, "l0", 4, 6, /*relu=*/true, rng);
  neural::Dense l1(store, "l1", 6, 1, /*relu=*/false, rng);
  Mat x(2, 4);
  Rng xr = make_rng(8, "gc2_x");
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) x(r, c) = uniform_range(xr, -1.0, 1.0);
  auto loss_fn = [&]() {
    neural::DenseCache c0, c1;
    Mat h = l0.forward(store, x, c0);
    Mat out = l1.forward(store, h, c1);
    double loss = out.sum();
    Mat dout = Mat::Ones(2, 1);
    Mat dh = l1.backward(store, c1, dout);
    l0.backward(store, c0, dh);
    return loss;
  };
  Rng coord_rng = make_rng(8, "gc2_coords");
  auto report = neural::grad_check(store, loss_fn, 1e-5, 60, coord_rng);
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst_param;
}

TEST(GradCheck, LstmSingleStepPasses) {
  neural::ParamStore store;
  Rng rng = make_rng(10, "gc3");
  neural::LstmCell cell(store, "l", 3, 4, rng);
  std::vector<Vec> xs;
  Rng xr = make_rng(10, "gc3_x");
  for (int t = 0; t < 3; ++t) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = uniform_range(xr, -1.0, 1.0);
    xs.push_back(x);
  }
  auto loss_fn = [&]() {
    std::vector<neural::LstmStepCache> caches;
    Vec h = cell.encode(store, xs, caches);
    double loss = h.sum();
    cell.backward_sequence(store, caches, Vec::Ones(4));
    return loss;
  };
  Rng coord_rng = make_rng(10, "gc3_coords");
  auto report = neural::grad_check(store, loss_fn, 1e-5, 80, coord_rng);
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst_param;
}

TEST(Checkpoint, RoundTripsTensorsAndRejectsHashMismatch) {
  auto path = std::filesystem::temp_directory_path() / "seqlink_ckpt_test.bin";
  neural::ParamStore store;
  Rng rng = make_rng(12, "ckpt");
  Mat& a = store.create("model/a", 3, 2);
  Mat& b = store.create("model/b", 1, 5);
  neural::init_uniform(a, rng, -1, 1);
  neural::init_uniform(b, rng, -1, 1);
  neural::save_checkpoint(path, store, 0xdeadbeefULL);

  neural::ParamStore loaded;
  auto hash = neural::load_checkpoint(path, loaded, 0xdeadbeefULL);
  EXPECT_EQ(hash, 0xdeadbeefULL);
  EXPECT_TRUE(loaded.param("model/a").isApprox(a));
  EXPECT_TRUE(loaded.param("model/b").isApprox(b));

  neural::ParamStore rejected;
  EXPECT_THROW(neural::load_checkpoint(path, rejected, 0x1234ULL), ValidationError);
}

TEST(ParamStore, FiniteChecksCatchNan) {
  Vec v(2);
  v << 1.0, std::nan("");
  EXPECT_THROW(neural::check_finite(v, "test vector"), ValidationError);
}

}  // namespace
