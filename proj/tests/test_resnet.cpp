#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <functional>

#include "layerwise/checkpoint.hpp"
#include "layerwise/regularizers.hpp"
#include "layerwise/resnet.hpp"
#include "layerwise/rng.hpp"

using lw::Act;
using lw::ForwardTape;
using lw::Gradients;
using lw::GrowableResNet;
using lw::Matrix;

namespace {

GrowableResNet random_net(lw::RngState& rng, std::size_t s, std::size_t o, std::size_t out,
                          std::size_t hidden, double scale = 0.5) {
  GrowableResNet net(s, o, out);
  net.U = rng.uniform_matrix(s, o, -scale, scale);
  net.u = rng.uniform_matrix(1, o, -scale, scale);
  for (std::size_t h = 0; h < hidden; ++h) {
    lw::HiddenLayer l;
    l.W = rng.uniform_matrix(o, o, -scale, scale);
    l.b = rng.uniform_matrix(1, o, -scale, scale);
    l.activation = (h % 2 == 0) ? Act::elu : Act::tanh;
    net.layers.push_back(std::move(l));
  }
  net.W_pred = rng.uniform_matrix(o, out, -scale, scale);
  net.b_pred = rng.uniform_matrix(1, out, -scale, scale);
  net.touch();
  return net;
}

}  // namespace

TEST(Resnet, ZeroLayerPreservesState) {
  lw::RngState rng(1);
  GrowableResNet net = random_net(rng, 3, 4, 2, 0);
  lw::HiddenLayer zero;
  zero.W = Matrix(4, 4);
  zero.b = Matrix(1, 4);
  zero.activation = Act::elu;
  net.layers.push_back(zero);
  net.touch();

  Matrix x = rng.uniform_matrix(5, 3, -1, 1);
  ForwardTape tape = lw::forward(net, x);
  EXPECT_EQ(tape.states[0], tape.states[1]);  // Y2 == Y1 exactly
}

TEST(Resnet, IdentityComposition) {
  GrowableResNet net(2, 2, 2);
  net.U = Matrix::identity(2);
  net.W_pred = Matrix::identity(2);
  lw::HiddenLayer zero;
  zero.W = Matrix(2, 2);
  zero.b = Matrix(1, 2);
  net.layers.push_back(zero);
  net.touch();

  Matrix x{{0.3, -1.2}, {2.0, 0.0}};
  EXPECT_EQ(lw::predict(net, x), x);
}

TEST(Resnet, HandTracedForward) {
  GrowableResNet net(2, 2, 1);
  net.U = Matrix::identity(2);
  net.u = Matrix{{0.5, -0.5}};
  lw::HiddenLayer l;
  l.W = Matrix{{0.1, 0.2}, {0.3, 0.4}};
  l.b = Matrix{{0.01, 0.02}};
  l.activation = Act::elu;
  net.layers.push_back(l);
  net.W_pred = Matrix{{1.0}, {-1.0}};
  net.b_pred = Matrix{{0.1}};
  net.touch();

  Matrix x{{1.0, 2.0}};
  // Y1 = (1.5, 1.5); Z = (0.61, 0.92), both positive so elu is identity;
  // Y2 = (2.11, 2.42); out = 2.11 - 2.42 + 0.1
  ForwardTape tape = lw::forward(net, x);
  EXPECT_NEAR(tape.states[1](0, 0), 2.11, 1e-12);
  EXPECT_NEAR(tape.states[1](0, 1), 2.42, 1e-12);
  EXPECT_NEAR(tape.output(0, 0), -0.21, 1e-12);
}

TEST(Resnet, ZeroLossGradientGivesZeroGradients) {
  lw::RngState rng(2);
  GrowableResNet net = random_net(rng, 3, 5, 2, 2);
  Matrix x = rng.uniform_matrix(4, 3, -1, 1);
  ForwardTape tape = lw::forward(net, x);
  Gradients g = lw::backward(net, tape, Matrix(4, 2));
  EXPECT_EQ(g.norm(), 0.0);
}

// Central finite differences against the analytic reverse pass, on a loss with
// both a data term and a manifold term at the last hidden state.
TEST(Resnet, BackwardMatchesFiniteDifferences) {
  lw::RngState rng(3);
  const std::size_t s = 3, o = 6, out = 2, m = 5;
  GrowableResNet net = random_net(rng, s, o, out, 3);
  Matrix x = rng.uniform_matrix(m, s, -1, 1);
  Matrix c = rng.uniform_matrix(m, out, -1, 1);
  lw::SimilarityMatrix sim =
      lw::SimilarityMatrix::from_groups(lw::SimilarityKind::label, {0, 1, 0, 1, 0});
  const double gamma = 0.3;

  auto loss_of = [&]() {
    ForwardTape t = lw::forward(net, x);
    double data = 0.0;
    for (std::size_t i = 0; i < t.output.size(); ++i) {
      const double d = t.output.data()[i] - c.data()[i];
      data += 0.5 * d * d;
    }
    return data / m + gamma * lw::manifold_loss(t.states.back(), sim);
  };

  ForwardTape tape = lw::forward(net, x);
  Matrix gout = lw::subtract(tape.output, c);
  lw::scale_inplace(gout, 1.0 / m);
  Matrix gman = lw::manifold_grad(tape.states.back(), sim);
  lw::scale_inplace(gman, gamma);
  Gradients an = lw::backward(net, tape, gout, &gman);

  const double h = 1e-5;
  auto check_tensor = [&](Matrix& theta, const Matrix& analytic, const char* name) {
    ASSERT_EQ(theta.size(), analytic.size()) << name;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta.data()[i];
      theta.data()[i] = keep + h;
      const double lp = loss_of();
      theta.data()[i] = keep - h;
      const double lm = loss_of();
      theta.data()[i] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double a = analytic.data()[i];
      EXPECT_LE(std::fabs(a - fd) / std::max(1.0, std::fabs(a)), 1e-4)
          << name << "[" << i << "] analytic=" << a << " fd=" << fd;
    }
  };

  check_tensor(net.U, an.dU, "U");
  check_tensor(net.u, an.du, "u");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    check_tensor(net.layers[l].W, an.dW[l], "W");
    check_tensor(net.layers[l].b, an.db[l], "b");
  }
  check_tensor(net.W_pred, an.dW_pred, "W_pred");
  check_tensor(net.b_pred, an.db_pred, "b_pred");
}

TEST(Resnet, SoftmaxHeadBackwardMatchesFiniteDifferences) {
  lw::RngState rng(4);
  const std::size_t m = 4, out = 3;
  GrowableResNet net = random_net(rng, 2, 5, out, 2);
  net.head = lw::Head::softmax;
  Matrix x = rng.uniform_matrix(m, 2, -1, 1);
  Matrix c(m, out);
  for (std::size_t i = 0; i < m; ++i) c(i, rng.uniform_index(out)) = 1.0;

  auto loss_of = [&]() {
    Matrix y = lw::predict(net, x);
    double ce = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (c.data()[i] > 0.0) ce -= std::log(std::max(y.data()[i], 1e-12));
    return ce / m;
  };

  ForwardTape tape = lw::forward(net, x);
  Matrix gout(m, out);
  for (std::size_t i = 0; i < gout.size(); ++i)
    if (c.data()[i] > 0.0)
      gout.data()[i] = -1.0 / (m * std::max(tape.output.data()[i], 1e-12));
  Gradients an = lw::backward(net, tape, gout);

  const double h = 1e-5;
  auto check_tensor = [&](Matrix& theta, const Matrix& analytic) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta.data()[i];
      theta.data()[i] = keep + h;
      const double lp = loss_of();
      theta.data()[i] = keep - h;
      const double lm = loss_of();
      theta.data()[i] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double a = analytic.data()[i];
      EXPECT_LE(std::fabs(a - fd) / std::max(1.0, std::fabs(a)), 1e-4);
    }
  };
  check_tensor(net.W_pred, an.dW_pred);
  check_tensor(net.layers[1].W, an.dW[1]);
  check_tensor(net.U, an.dU);
}

TEST(Resnet, GrowPreservesPredictionsBitwise) {
  lw::RngState rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    GrowableResNet net = random_net(rng, 4, 6, 3, 1 + trial % 3);
    Matrix x = rng.uniform_matrix(6, 4, -2, 2);
    Matrix before = lw::predict(net, x);
    const std::size_t layers_before = net.hidden_count();
    lw::grow_layer(net);
    Matrix after = lw::predict(net, x);
    EXPECT_EQ(before, after);  // bitwise
    EXPECT_EQ(net.hidden_count(), layers_before + 1);
    EXPECT_TRUE(net.input_frozen);
    for (std::size_t h = 0; h + 1 < net.hidden_count(); ++h)
      EXPECT_TRUE(net.layers[h].frozen);
    EXPECT_FALSE(net.layers.back().frozen);
  }
}

TEST(Resnet, GrowRejectsNonLtpActivation) {
  lw::RngState rng(6);
  GrowableResNet net = random_net(rng, 2, 3, 1, 1);
  EXPECT_THROW(lw::grow_layer(net, Act::relu), std::invalid_argument);
  EXPECT_THROW(lw::grow_layer(net, Act::sigmoid), std::invalid_argument);
}

TEST(Resnet, FrozenParameterCountAfterGrowth) {
  lw::RngState rng(7);
  const std::size_t s = 4, o = 6, out = 2;
  GrowableResNet net = random_net(rng, s, o, out, 2);
  lw::grow_layer(net);
  std::size_t frozen = net.U.size() + net.u.size();
  for (const auto& l : net.layers)
    if (l.frozen) frozen += l.W.size() + l.b.size();
  // everything except the new layer and the head
  EXPECT_EQ(frozen, net.total_params() - (o * o + o + o * out + out));
}

TEST(Resnet, FrozenLayersReceiveNoGradient) {
  lw::RngState rng(8);
  GrowableResNet net = random_net(rng, 3, 4, 2, 2);
  lw::grow_layer(net);
  Matrix x = rng.uniform_matrix(5, 3, -1, 1);
  ForwardTape tape = lw::forward(net, x);
  Matrix gout = rng.uniform_matrix(5, 2, -1, 1);
  Gradients g = lw::backward(net, tape, gout);
  EXPECT_EQ(g.dU.size(), 0u);
  EXPECT_EQ(g.dW[0].size(), 0u);
  EXPECT_EQ(g.dW[1].size(), 0u);
  EXPECT_GT(g.dW[2].size(), 0u);
  EXPECT_GT(g.db[2].size(), 0u);
}

TEST(Resnet, StaleTapeThrows) {
  lw::RngState rng(9);
  GrowableResNet net = random_net(rng, 2, 3, 1, 1);
  Matrix x = rng.uniform_matrix(2, 2, -1, 1);
  ForwardTape tape = lw::forward(net, x);
  lw::grow_layer(net);
  EXPECT_THROW(lw::backward(net, tape, Matrix(2, 1)), std::invalid_argument);
}

// Prop-1 mechanism at unit scale: at a constructed stationary point with an
// unchanged schedule the new layer sees a zero gradient; changing gamma turns
// the gradient on.
TEST(Resnet, NewLayerGradientVanishesAtStationaryPoint) {
  lw::RngState rng(10);
  GrowableResNet net = random_net(rng, 3, 5, 2, 1);
  Matrix x = rng.uniform_matrix(6, 3, -1, 1);
  Matrix c = lw::predict(net, x);  // interpolation: data gradient is pointwise zero

  lw::grow_layer(net);
  ForwardTape tape = lw::forward(net, x);
  Matrix gout = lw::subtract(tape.output, c);
  Gradients g_same = lw::backward(net, tape, gout);
  EXPECT_LT(lw::frobenius_norm(g_same.dW.back()), 1e-6);
  EXPECT_LT(lw::frobenius_norm(g_same.db.back()), 1e-6);

  lw::SimilarityMatrix sim =
      lw::SimilarityMatrix::from_groups(lw::SimilarityKind::label, {0, 0, 1, 1, 0, 1});
  Matrix gman = lw::manifold_grad(tape.states.back(), sim);
  lw::scale_inplace(gman, 0.1);  // gamma changed from 0 to 0.1
  Gradients g_changed = lw::backward(net, tape, gout, &gman);
  EXPECT_GT(lw::frobenius_norm(g_changed.dW.back()), 1e-3);
}

TEST(Resnet, ThresholdDefinitionAndIdempotence) {
  lw::RngState rng(11);
  GrowableResNet net = random_net(rng, 2, 2, 1, 1);
  net.layers[0].W = Matrix{{1e-7, 0.5}, {-1e-8, -0.4}};
  net.layers[0].b = Matrix{{2e-7, 0.9}};

  GrowableResNet untouched = net;
  lw::threshold(untouched, 0.0);
  EXPECT_EQ(untouched.layers[0].W, net.layers[0].W);

  lw::threshold(net, 1e-6);
  EXPECT_EQ(net.layers[0].W(0, 0), 0.0);
  EXPECT_EQ(net.layers[0].W(1, 0), 0.0);
  EXPECT_EQ(net.layers[0].W(0, 1), 0.5);
  EXPECT_EQ(net.layers[0].b(0, 0), 0.0);
  EXPECT_EQ(net.layers[0].b(0, 1), 0.9);

  GrowableResNet once = net;
  lw::threshold(net, 1e-6);
  EXPECT_EQ(net.layers[0].W, once.layers[0].W);
  EXPECT_EQ(net.layers[0].b, once.layers[0].b);
}

TEST(Resnet, ActiveFraction) {
  lw::RngState rng(12);
  GrowableResNet net = random_net(rng, 2, 4, 1, 1);
  lw::grow_layer(net);
  EXPECT_DOUBLE_EQ(lw::active_fraction(net, 1), 0.0);   // freshly grown zero layer
  EXPECT_DOUBLE_EQ(lw::active_fraction(net, 0), 1.0);   // dense random layer
  EXPECT_THROW(lw::active_fraction(net, 5), std::invalid_argument);
}

TEST(Resnet, PruneTailRestoresSnapshotPredictions) {
  lw::RngState rng(13);
  GrowableResNet net = random_net(rng, 3, 4, 2, 2);
  Matrix x = rng.uniform_matrix(5, 3, -1, 1);
  Matrix snapshot_at_2 = lw::predict(net, x);

  // grow further with non-trivial weights, as if trained
  for (int k = 0; k < 3; ++k) {
    lw::grow_layer(net);
    net.layers.back().W = rng.uniform_matrix(4, 4, -0.3, 0.3);
    net.layers.back().b = rng.uniform_matrix(1, 4, -0.3, 0.3);
    net.touch();
  }
  EXPECT_EQ(net.hidden_count(), 5u);

  GrowableResNet same = net;
  lw::prune_tail(same, 5);
  EXPECT_EQ(lw::predict(same, x), lw::predict(net, x));

  lw::prune_tail(net, 2);
  EXPECT_EQ(net.hidden_count(), 2u);
  EXPECT_EQ(lw::predict(net, x), snapshot_at_2);  // head untouched, so exact

  EXPECT_THROW(lw::prune_tail(net, 0), std::invalid_argument);
}

TEST(Resnet, CheckpointRoundTripBitExact) {
  lw::RngState rng(14);
  GrowableResNet net = random_net(rng, 5, 7, 3, 3);
  net.head = lw::Head::softmax;
  lw::grow_layer(net);
  const std::string path = testing::TempDir() + "/net.ckpt";
  lw::save_net(path, net);
  GrowableResNet back = lw::load_net(path);

  EXPECT_EQ(back.U, net.U);
  EXPECT_EQ(back.u, net.u);
  EXPECT_EQ(back.W_pred, net.W_pred);
  EXPECT_EQ(back.b_pred, net.b_pred);
  ASSERT_EQ(back.layers.size(), net.layers.size());
  for (std::size_t h = 0; h < net.layers.size(); ++h) {
    EXPECT_EQ(back.layers[h].W, net.layers[h].W);
    EXPECT_EQ(back.layers[h].b, net.layers[h].b);
    EXPECT_EQ(back.layers[h].frozen, net.layers[h].frozen);
    EXPECT_EQ(back.layers[h].skip, net.layers[h].skip);
    EXPECT_EQ(back.layers[h].activation, net.layers[h].activation);
  }
  EXPECT_EQ(back.head, net.head);
  EXPECT_EQ(back.input_frozen, net.input_frozen);
  std::remove(path.c_str());
}

TEST(Resnet, ForwardFromMatchesFullForward) {
  lw::RngState rng(15);
  GrowableResNet net = random_net(rng, 3, 5, 2, 3);
  Matrix x = rng.uniform_matrix(4, 3, -1, 1);
  ForwardTape full = lw::forward(net, x);
  ForwardTape part = lw::forward_from(net, full.states[1], 1);
  EXPECT_EQ(part.output, full.output);
  EXPECT_EQ(part.states.back(), full.states.back());
}
