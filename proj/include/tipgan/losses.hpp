#pragma once

// Loss terms of the two-headed discriminator game. All logarithms go through
// safe_log, which clamps probabilities to [eps, 1 - eps].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tipgan/errors.hpp"
#include "tipgan/nn.hpp"

namespace tipgan {

inline constexpr double kProbEpsilon = 1e-7;

inline double safe_log(double p) { return std::log(std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon)); }

/// Origin tag: 0 = real data, i = generator i (1-based).
using OriginTag = int;

struct MadLoss {
  /// Mean origin cross-entropy over all samples (discriminator minimizes).
  double discriminator = 0.0;
  /// Per-generator mean of -log p(real | G_i(z)) over generator i's samples.
  std::vector<double> generator;
  /// d(discriminator)/d(logits), one row per sample.
  nn::Matrix discriminator_grad;
  /// d(sum_i generator[i])/d(logits); rows of real samples are zero.
  nn::Matrix generator_grad;
};

/// Origin-identification game. `probs` is the (n+1)-way softmax output.
/// Gradients are taken with respect to the pre-softmax logits.
inline MadLoss loss_mad(const nn::Matrix& probs, std::span<const OriginTag> origins) {
  const auto rows = probs.rows();
  const auto classes = probs.cols();
  if (classes < 2) fail(ErrorKind::ClassCountMismatch, "origin head needs at least two classes");
  if (static_cast<std::size_t>(rows) != origins.size())
    fail(ErrorKind::LengthMismatch, "origin tags do not match the batch");
  if (rows == 0) fail(ErrorKind::EmptyInput, "empty batch");
  const int n = static_cast<int>(classes) - 1;

  std::vector<std::size_t> per_origin(classes, 0);
  for (OriginTag t : origins) {
    if (t < 0 || t > n)
      fail(ErrorKind::ClassCountMismatch, "origin tag " + std::to_string(t) + " outside 0.." +
                                              std::to_string(n));
    ++per_origin[t];
  }

  MadLoss out;
  out.generator.assign(n, 0.0);
  out.discriminator_grad = probs;
  out.generator_grad = nn::Matrix::Zero(rows, classes);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int t = origins[r];
    out.discriminator += -safe_log(probs(r, t));
    out.discriminator_grad(r, t) -= 1.0;
    if (t > 0) {
      const double w = 1.0 / static_cast<double>(per_origin[t]);
      out.generator[t - 1] += -safe_log(probs(r, 0)) * w;
      out.generator_grad.row(r) = probs.row(r) * w;
      out.generator_grad(r, 0) -= w;
    }
  }
  out.discriminator /= static_cast<double>(rows);
  out.discriminator_grad /= static_cast<double>(rows);
  return out;
}

struct ClfLoss {
  /// Binary cross-entropy of the On-probability against oracle labels.
  double discriminator = 0.0;
  /// -0.5 E[log D + log(1 - D)] on generated samples; minimal at D = 0.5.
  double generator = 0.0;
  /// d(discriminator)/d(logit) for labeled rows.
  nn::Vector discriminator_grad;
  /// d(generator)/d(logit) for generated rows.
  nn::Vector generator_grad;
};

/// Binary cross-entropy over labeled samples. `labels` must be 0 or 1.
inline double binary_cross_entropy(std::span<const double> probs, std::span<const double> labels) {
  if (probs.size() != labels.size()) fail(ErrorKind::LengthMismatch, "labels do not match outputs");
  if (probs.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) fail(ErrorKind::LabelDomain, "label outside {0,1}");
    s += -(y * safe_log(probs[i]) + (1.0 - y) * safe_log(1.0 - probs[i]));
  }
  return s / static_cast<double>(probs.size());
}

/// Uncertainty-seeking generator term; equals ln 2 when every output is 0.5.
inline double uncertainty_loss(std::span<const double> probs) {
  if (probs.empty()) return 0.0;
  double s = 0.0;
  for (double p : probs) s += -0.5 * (safe_log(p) + safe_log(1.0 - p));
  return s / static_cast<double>(probs.size());
}

/// Stability-classification game on the sigmoid head.
/// `labeled_probs`/`labels` cover every oracle-labeled sample the
/// discriminator learns from; `generated_probs` are the D(G(z)) values a
/// generator is scored on.
inline ClfLoss loss_clf(std::span<const double> labeled_probs, std::span<const double> labels,
                        std::span<const double> generated_probs) {
  for (double p : labeled_probs)
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::InvalidArgument, "probability outside [0,1]");
  ClfLoss out;
  out.discriminator = binary_cross_entropy(labeled_probs, labels);
  out.generator = uncertainty_loss(generated_probs);
  const double nl = std::max<double>(1.0, static_cast<double>(labeled_probs.size()));
  out.discriminator_grad.resize(static_cast<Eigen::Index>(labeled_probs.size()));
  for (std::size_t i = 0; i < labeled_probs.size(); ++i)
    out.discriminator_grad(static_cast<Eigen::Index>(i)) = (labeled_probs[i] - labels[i]) / nl;
  const double ng = std::max<double>(1.0, static_cast<double>(generated_probs.size()));
  out.generator_grad.resize(static_cast<Eigen::Index>(generated_probs.size()));
  for (std::size_t i = 0; i < generated_probs.size(); ++i)
    out.generator_grad(static_cast<Eigen::Index>(i)) = (generated_probs[i] - 0.5) / ng;
  return out;
}

}  // namespace tipgan
