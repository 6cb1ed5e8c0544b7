#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tipgan/losses.hpp"

using namespace tipgan;
using nn::Matrix;

namespace {

Matrix softmax_rows(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) s += std::exp(z(r, c) - m);
    for (Eigen::Index c = 0; c < z.cols(); ++c) p(r, c) = std::exp(z(r, c) - m) / s;
  }
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(MadLoss, UniformOverFourClassesIsLnFour) {
  const Matrix p = Matrix::Constant(8, 4, 0.25);
  const std::vector<OriginTag> tags{0, 1, 2, 3, 0, 1, 2, 3};
  EXPECT_NEAR(loss_mad(p, tags).discriminator, std::log(4.0), 1e-12);
}

TEST(MadLoss, PerfectDiscriminator) {
  Matrix p = Matrix::Zero(4, 3);
  const std::vector<OriginTag> tags{0, 1, 2, 1};
  for (Eigen::Index r = 0; r < 4; ++r) p(r, tags[static_cast<std::size_t>(r)]) = 1.0;
  const MadLoss l = loss_mad(p, tags);
  EXPECT_NEAR(l.discriminator, 0.0, 1e-6);
  for (double g : l.generator) EXPECT_NEAR(g, -std::log(kProbEpsilon), 1e-12);
}

TEST(MadLoss, SingleGeneratorReducesToTwoPlayerValue) {
  // column 0 = D(x) real probability
  Matrix p(4, 2);
  p << 0.9, 0.1, 0.7, 0.3, 0.2, 0.8, 0.4, 0.6;
  const std::vector<OriginTag> tags{0, 0, 1, 1};
  const MadLoss l = loss_mad(p, tags);
  const double value = 0.5 * (std::log(0.9) + std::log(0.7)) + 0.5 * (std::log(1 - 0.2) + std::log(1 - 0.4));
  // pooled mean over the four rows
  EXPECT_NEAR(l.discriminator, -value / 2.0, 1e-12);
  ASSERT_EQ(l.generator.size(), 1u);
  EXPECT_NEAR(l.generator[0], -0.5 * (std::log(0.2) + std::log(0.4)), 1e-12);
}

TEST(MadLoss, LogitGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<OriginTag> tags{0, 0, 1, 2, 3, 3, 1};
  Matrix z(7, 4);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  const MadLoss l = loss_mad(softmax_rows(z), tags);
  auto sum_gen = [&](const Matrix& zz) {
    double s = 0.0;
    for (double g : loss_mad(softmax_rows(zz), tags).generator) s += g;
    return s;
  };
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Matrix zp = z, zm = z;
    zp.data()[i] += h;
    zm.data()[i] -= h;
    const double fd_d = (loss_mad(softmax_rows(zp), tags).discriminator - loss_mad(softmax_rows(zm), tags).discriminator) / (2 * h);
    const double fd_g = (sum_gen(zp) - sum_gen(zm)) / (2 * h);
    EXPECT_NEAR(l.discriminator_grad.data()[i], fd_d, 1e-7);
    EXPECT_NEAR(l.generator_grad.data()[i], fd_g, 1e-7);
  }
}

TEST(MadLoss, InputErrors) {
  const Matrix p = Matrix::Constant(2, 3, 1.0 / 3);
  const std::vector<OriginTag> bad{0, 3};
  const std::vector<OriginTag> short_tags{0};
  try {
    loss_mad(p, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ClassCountMismatch);
  }
  try {
    loss_mad(p, short_tags);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(ClfLoss, UncertaintyTermAtHalfIsLnTwo) {
  const std::vector<double> g(10, 0.5);
  EXPECT_NEAR(uncertainty_loss(g), std::log(2.0), 1e-12);
  // and it is the minimum
  for (double q : {0.1, 0.3, 0.49, 0.51, 0.9}) EXPECT_GT(uncertainty_loss(std::vector<double>(3, q)), std::log(2.0));
}

TEST(ClfLoss, PerfectRealPredictionsCostNothing) {
  const std::vector<double> p{1.0, 0.0, 1.0}, y{1.0, 0.0, 1.0};
  EXPECT_NEAR(binary_cross_entropy(p, y), 0.0, 1e-6);
}

TEST(ClfLoss, ConstantHalfOnBalancedLabelsIsLnTwo) {
  const std::vector<double> p(6, 0.5), y{1, 0, 1, 0, 1, 0};
  EXPECT_NEAR(loss_clf(p, y, {}).discriminator, std::log(2.0), 1e-12);
}

TEST(ClfLoss, LogitGradientsMatchFiniteDifferences) {
  const std::vector<double> zl{0.3, -1.2, 2.0, 0.0}, y{1, 0, 0, 1}, zg{-0.7, 0.4, 1.5};
  auto probs = [](std::vector<double> z) {
    for (double& v : z) v = sigmoid(v);
    return z;
  };
  const ClfLoss l = loss_clf(probs(zl), y, probs(zg));
  const double h = 1e-6;
  for (std::size_t i = 0; i < zl.size(); ++i) {
    auto a = zl, b = zl;
    a[i] += h;
    b[i] -= h;
    EXPECT_NEAR(l.discriminator_grad(static_cast<Eigen::Index>(i)),
                (binary_cross_entropy(probs(a), y) - binary_cross_entropy(probs(b), y)) / (2 * h), 1e-8);
  }
  for (std::size_t i = 0; i < zg.size(); ++i) {
    auto a = zg, b = zg;
    a[i] += h;
    b[i] -= h;
    EXPECT_NEAR(l.generator_grad(static_cast<Eigen::Index>(i)),
                (uncertainty_loss(probs(a)) - uncertainty_loss(probs(b))) / (2 * h), 1e-8);
  }
}

TEST(ClfLoss, LabelOutsideDomainThrows) {
  const std::vector<double> p{0.5}, y{0.5};
  try {
    binary_cross_entropy(p, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LabelDomain);
  }
}
