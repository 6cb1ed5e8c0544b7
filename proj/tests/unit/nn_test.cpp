#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tipgan/nn.hpp"

using namespace tipgan;
using nn::Activation;
using nn::Matrix;

namespace {

// Scalar probe L = sum(R .* f(x)) so that dL/d(output) = R.
double probe(const nn::Mlp& net, const Matrix& x, const Matrix& r) { return (net.forward(x).array() * r.array()).sum(); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST(Forward, ZeroNetWithSigmoidOutputIsHalf) {
  nn::Mlp net({3, 5, 2}, Activation::Elu, Activation::Sigmoid);
  const Matrix y = net.forward(Matrix::Random(4, 3));
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_EQ(y.data()[i], 0.5);
}

TEST(Forward, IdentityLayerPassesInputThrough) {
  nn::Mlp net({3, 3}, Activation::Elu, Activation::Linear);
  net.layers()[0].weight = Matrix::Identity(3, 3);
  const Matrix x = Matrix::Random(5, 3);
  EXPECT_EQ(net.forward(x), x);
}

TEST(Forward, SoftmaxRowsSumToOne) {
  const auto net = nn::Mlp::initialized({3, 8, 4}, Activation::Elu, Activation::Softmax, 2);
  const Matrix y = net.forward(Matrix::Random(6, 3));
  for (Eigen::Index r = 0; r < y.rows(); ++r) EXPECT_NEAR(y.row(r).sum(), 1.0, 1e-12);
}

TEST(Forward, WidthMismatchThrows) {
  nn::Mlp net({3, 2}, Activation::Elu, Activation::Linear);
  EXPECT_THROW(net.forward(Matrix::Zero(1, 4)), Error);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto net = nn::Mlp::initialized({3, 6, 2}, Activation::Elu, Activation::Sigmoid, 1);
  const Matrix x = Matrix::Random(4, 3);
  const auto g = net.backward(net.forward_trace(x), Matrix::Zero(4, 2));
  for (double v : nn::flatten(g.layers)) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(g.input.isZero());
}

TEST(Backward, LinearLayerSquaredErrorIsOuterProduct) {
  auto net = nn::Mlp::initialized({3, 2}, Activation::Elu, Activation::Linear, 4);
  Matrix x(1, 3);
  x << 0.5, -1.0, 2.0;
  Matrix y(1, 2);
  y << 1.0, -0.5;
  // L = 0.5 |Wx + b - y|^2, dL/dout = out - y
  const auto t = net.forward_trace(x);
  const Matrix resid = t.output - y;
  const auto g = net.backward(t, resid);
  const Matrix expected = x.transpose() * resid;
  for (Eigen::Index i = 0; i < expected.size(); ++i)
    EXPECT_NEAR(g.layers[0].weight.data()[i], expected.data()[i], 1e-14);
  EXPECT_NEAR(g.layers[0].bias(0), resid(0, 0), 1e-14);
  EXPECT_NEAR(g.layers[0].bias(1), resid(0, 1), 1e-14);
}

// Randomized central-difference check of parameter and input gradients.
TEST(Backward, FiniteDifferenceOverRandomNetworks) {
  std::mt19937_64 rng(2024);
  const std::vector<Activation> hidden{Activation::Elu, Activation::Sigmoid, Activation::Linear, Activation::LeakyRelu};
  const std::vector<Activation> output{Activation::Linear, Activation::Sigmoid, Activation::Softmax};
  std::uniform_int_distribution<int> width(1, 6), depth(1, 3), batch(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> sizes{width(rng)};
    for (int k = 0, n = depth(rng); k < n; ++k) sizes.push_back(width(rng));
    sizes.push_back(width(rng) + 1);
    const Activation ha = hidden[static_cast<std::size_t>(trial) % hidden.size()];
    const Activation oa = output[static_cast<std::size_t>(trial / 4) % output.size()];
    auto net = nn::Mlp::initialized(sizes, ha, oa, static_cast<std::uint64_t>(trial));
    for (auto& l : net.layers())
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.1 * normal(rng);
    Matrix x(batch(rng), sizes.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    Matrix r(x.rows(), sizes.back());
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = normal(rng);

    const auto g = net.backward(net.forward_trace(x), r);
    const auto analytic = nn::flatten(g.layers);
    auto theta = net.flatten();
    double worst = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double keep = theta[k];
      theta[k] = keep + h;
      net.unflatten(theta);
      const double up = probe(net, x, r);
      theta[k] = keep - h;
      net.unflatten(theta);
      const double down = probe(net, x, r);
      theta[k] = keep;
      worst = std::max(worst, rel_err(analytic[k], (up - down) / (2 * h)));
    }
    net.unflatten(theta);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      Matrix xp = x, xm = x;
      xp.data()[k] += h;
      xm.data()[k] -= h;
      worst = std::max(worst, rel_err(g.input.data()[k], (probe(net, xp, r) - probe(net, xm, r)) / (2 * h)));
    }
    EXPECT_LT(worst, 1e-4) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Init, SameSeedSameParameters) {
  const auto a = nn::Mlp::initialized({8, 64, 64, 3}, Activation::Elu, Activation::Sigmoid, 11);
  const auto b = nn::Mlp::initialized({8, 64, 64, 3}, Activation::Elu, Activation::Sigmoid, 11);
  const auto c = nn::Mlp::initialized({8, 64, 64, 3}, Activation::Elu, Activation::Sigmoid, 12);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto net = nn::Mlp::initialized({3, 4, 2}, Activation::Elu, Activation::Linear, 1);
  const auto before = net.flatten();
  auto st = nn::AdamState::for_network(net, {});
  auto zero = net.layers();
  for (auto& l : zero) {
    l.weight.setZero();
    l.bias.setZero();
  }
  nn::adam_step(st, net, zero);
  EXPECT_EQ(net.flatten(), before);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  nn::Mlp net({2, 2}, Activation::Elu, Activation::Linear);
  nn::AdamOptions o;
  o.learning_rate = 0.01;
  auto st = nn::AdamState::for_network(net, o);
  auto g = net.layers();
  g[0].weight << 0.3, -2.0, 1e-3, -5.0;
  g[0].bias << 4.0, -0.25;
  nn::adam_step(st, net, g);
  // m_hat = g, v_hat = g^2, so the update is lr g / (|g| + eps)
  const auto after = net.flatten();
  const auto grads = nn::flatten(g);
  for (std::size_t k = 0; k < after.size(); ++k)
    EXPECT_NEAR(after[k], -o.learning_rate * grads[k] / (std::abs(grads[k]) + o.epsilon), 1e-15);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  nn::Mlp net({1, 1}, Activation::Elu, Activation::Linear);
  nn::AdamOptions o;
  o.learning_rate = 1e-3;
  auto st = nn::AdamState::for_network(net, o);
  auto g = net.layers();
  g[0].weight(0, 0) = 3.0;
  g[0].bias(0) = -0.2;
  double w = 0.0, b = 0.0;
  for (int i = 0; i < 500; ++i) {
    w = net.layers()[0].weight(0, 0);
    b = net.layers()[0].bias(0);
    nn::adam_step(st, net, g);
  }
  EXPECT_NEAR(net.layers()[0].weight(0, 0) - w, -o.learning_rate, 1e-9);
  EXPECT_NEAR(net.layers()[0].bias(0) - b, o.learning_rate, 1e-9);
}

TEST(Adam, ShapeMismatchThrows) {
  nn::Mlp net({2, 2}, Activation::Elu, Activation::Linear);
  auto st = nn::AdamState::for_network(net, {});
  std::vector<nn::DenseLayer> g{{Matrix::Zero(3, 2), nn::Vector::Zero(2)}};
  EXPECT_THROW(nn::adam_step(st, net, g), Error);
}

TEST(Serialization, NetworkAndOptimizerRoundTrip) {
  auto net = nn::Mlp::initialized({3, 5, 4}, Activation::Elu, Activation::Softmax, 8);
  auto st = nn::AdamState::for_network(net, {});
  nn::adam_step(st, net, net.layers());
  const auto net2 = nn::mlp_from_json(nlohmann::json::parse(nn::to_json(net).dump()));
  EXPECT_TRUE(net == net2);
  const auto st2 = nn::adam_from_json(nlohmann::json::parse(nn::to_json(st).dump()));
  EXPECT_EQ(st2.step, st.step);
  EXPECT_EQ(nn::flatten(st2.second), nn::flatten(st.second));
}
