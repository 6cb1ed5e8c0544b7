#pragma once

// Dense multilayer perceptron with explicit backpropagation and Adam.
// Batches are row-major in the sense that each row is one sample.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tipgan/errors.hpp"

namespace tipgan::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Linear, Sigmoid, Softmax, LeakyRelu, Elu };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Elu: return "elu";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  for (Activation a : {Activation::Linear, Activation::Sigmoid, Activation::Softmax,
                       Activation::LeakyRelu, Activation::Elu})
    if (to_string(a) == s) return a;
  fail(ErrorKind::Parse, "unknown activation '" + std::string(s) + "'");
}

inline constexpr double kLeakySlope = 0.2;

inline double sigmoid(double x) {
  // split form avoids exp overflow for large |x|
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix apply(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Linear: return z;
    case Activation::Sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::LeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Activation::Elu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
    case Activation::Softmax: {
      Matrix out(z.rows(), z.cols());
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double mx = z.row(r).maxCoeff();
        out.row(r) = (z.row(r).array() - mx).exp().matrix();
        out.row(r) /= out.row(r).sum();
      }
      return out;
    }
  }
  return z;
}

/// dL/dz given dL/dy, pre-activation z and activation output y.
inline Matrix apply_backward(Activation a, const Matrix& z, const Matrix& y, const Matrix& g) {
  switch (a) {
    case Activation::Linear: return g;
    case Activation::Sigmoid: return (g.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::LeakyRelu:
      return (g.array() * z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }).array())
          .matrix();
    case Activation::Elu:
      return (g.array() * z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }).array())
          .matrix();
    case Activation::Softmax: {
      const Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
      return (y.array() * (g.colwise() - dot).array()).matrix();
    }
  }
  return g;
}

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  Vector bias;    // fan_out
};

/// Parameter gradients plus the gradient with respect to the network input.
struct Gradients {
  std::vector<DenseLayer> layers;
  Matrix input;
};

/// Intermediate values of one forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
};

class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialized network.
  Mlp(std::vector<int> layer_sizes, Activation hidden, Activation output)
      : sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
    if (sizes_.size() < 2) fail(ErrorKind::ShapeMismatch, "an MLP needs at least two layer sizes");
    for (int s : sizes_)
      if (s <= 0) fail(ErrorKind::ShapeMismatch, "layer sizes must be positive");
    if (hidden_ == Activation::Softmax)
      fail(ErrorKind::InvalidArgument, "softmax is only valid as the output activation");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
      layers_.push_back({Matrix::Zero(sizes_[i], sizes_[i + 1]), Vector::Zero(sizes_[i + 1])});
  }

  /// He-style uniform initialization scaled by fan-in; biases start at zero.
  static Mlp initialized(std::vector<int> layer_sizes, Activation hidden, Activation output,
                         std::uint64_t seed) {
    Mlp net(std::move(layer_sizes), hidden, output);
    std::mt19937_64 rng(seed);
    for (auto& layer : net.layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = dist(rng);
    }
    return net;
  }

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  ForwardTrace forward_trace(const Matrix& batch) const {
    if (batch.cols() != input_size())
      fail(ErrorKind::ShapeMismatch, "input width " + std::to_string(batch.cols()) +
                                         " does not match " + std::to_string(input_size()));
    ForwardTrace t;
    Matrix x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix z = x * layers_[i].weight;
      z.rowwise() += layers_[i].bias.transpose();
      const Activation act = (i + 1 == layers_.size()) ? output_ : hidden_;
      Matrix y = apply(act, z);
      t.inputs.push_back(std::move(x));
      t.pre.push_back(std::move(z));
      x = std::move(y);
    }
    t.output = std::move(x);
    return t;
  }

  Matrix forward(const Matrix& batch) const { return forward_trace(batch).output; }

  /// Backpropagates dL/d(output) through the pass recorded in `trace`.
  Gradients backward(const ForwardTrace& trace, const Matrix& upstream) const {
    if (trace.pre.size() != layers_.size() || upstream.rows() != trace.output.rows() ||
        upstream.cols() != trace.output.cols())
      fail(ErrorKind::ShapeMismatch, "upstream gradient does not match the forward pass");
    Gradients g;
    g.layers.resize(layers_.size());
    Matrix grad = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const Activation act = (k + 1 == layers_.size()) ? output_ : hidden_;
      const Matrix& y = (k + 1 == layers_.size()) ? trace.output : trace.inputs[k + 1];
      const Matrix dz = apply_backward(act, trace.pre[k], y, grad);
      g.layers[k].weight = trace.inputs[k].transpose() * dz;
      g.layers[k].bias = dz.colwise().sum().transpose();
      grad = dz * layers_[k].weight.transpose();
    }
    g.input = std::move(grad);
    return g;
  }

  /// All parameters flattened layer by layer (weights column-major, then bias).
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
  }

  void unflatten(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) fail(ErrorKind::ShapeMismatch, "parameter count mismatch");
    std::size_t pos = 0;
    for (auto& l : layers_) {
      std::copy_n(flat.begin() + pos, l.weight.size(), l.weight.data());
      pos += l.weight.size();
      std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.data());
      pos += l.bias.size();
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.sizes_ == b.sizes_ && a.hidden_ == b.hidden_ && a.output_ == b.output_ &&
           a.flatten() == b.flatten();
  }

 private:
  std::vector<int> sizes_;
  Activation hidden_ = Activation::Elu;
  Activation output_ = Activation::Linear;
  std::vector<DenseLayer> layers_;
};

inline std::vector<double> flatten(const std::vector<DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<DenseLayer> first;   // m
  std::vector<DenseLayer> second;  // v
  std::int64_t step = 0;

  static AdamState for_network(const Mlp& net, AdamOptions options) {
    AdamState s;
    s.options = options;
    for (const auto& l : net.layers()) {
      s.first.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
      s.second.push_back(s.first.back());
    }
    return s;
  }
};

/// One bias-corrected Adam update of `net` in place.
inline void adam_step(AdamState& state, Mlp& net, const std::vector<DenseLayer>& grads) {
  auto& layers = net.layers();
  if (grads.size() != layers.size() || state.first.size() != layers.size())
    fail(ErrorKind::ShapeMismatch, "gradient/optimizer layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (grads[i].weight.rows() != layers[i].weight.rows() ||
        grads[i].weight.cols() != layers[i].weight.cols() ||
        grads[i].bias.size() != layers[i].bias.size() ||
        state.first[i].weight.rows() != layers[i].weight.rows() ||
        state.first[i].weight.cols() != layers[i].weight.cols())
      fail(ErrorKind::ShapeMismatch, "gradient shape mismatch in layer " + std::to_string(i));
  }
  const auto& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseProduct(g);
    param.array() -= o.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + o.epsilon);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, state.first[i].weight, state.second[i].weight, grads[i].weight);
    update(layers[i].bias, state.first[i].bias, state.second[i].bias, grads[i].bias);
  }
}

// ---- checkpoint serialization --------------------------------------------

namespace detail {

inline nlohmann::json layers_to_json(const std::vector<DenseLayer>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers) {
    arr.push_back({{"rows", l.weight.rows()},
                   {"cols", l.weight.cols()},
                   {"weight", std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size())},
                   {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return arr;
}

inline std::vector<DenseLayer> layers_from_json(const nlohmann::json& arr) {
  std::vector<DenseLayer> out;
  for (const auto& j : arr) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto w = j.at("weight").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != cols)
      fail(ErrorKind::ShapeMismatch, "checkpoint layer has inconsistent sizes");
    DenseLayer l{Eigen::Map<const Matrix>(w.data(), rows, cols),
                 Eigen::Map<const Vector>(b.data(), cols)};
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const Mlp& net) {
  return {{"layer_sizes", net.layer_sizes()},
          {"hidden_activation", to_string(net.hidden_activation())},
          {"output_activation", to_string(net.output_activation())},
          {"layers", detail::layers_to_json(net.layers())}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net(j.at("layer_sizes").get<std::vector<int>>(),
          parse_activation(j.at("hidden_activation").get<std::string>()),
          parse_activation(j.at("output_activation").get<std::string>()));
  auto layers = detail::layers_from_json(j.at("layers"));
  if (layers.size() != net.layers().size()) fail(ErrorKind::ShapeMismatch, "checkpoint layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != net.layers()[i].weight.rows() ||
        layers[i].weight.cols() != net.layers()[i].weight.cols())
      fail(ErrorKind::ShapeMismatch, "checkpoint layer shape");
    net.layers()[i] = std::move(layers[i]);
  }
  return net;
}

inline nlohmann::json to_json(const AdamState& s) {
  return {{"learning_rate", s.options.learning_rate},
          {"beta1", s.options.beta1},
          {"beta2", s.options.beta2},
          {"epsilon", s.options.epsilon},
          {"step", s.step},
          {"first", detail::layers_to_json(s.first)},
          {"second", detail::layers_to_json(s.second)}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.options = {j.at("learning_rate").get<double>(), j.at("beta1").get<double>(),
               j.at("beta2").get<double>(), j.at("epsilon").get<double>()};
  s.step = j.at("step").get<std::int64_t>();
  s.first = detail::layers_from_json(j.at("first"));
  s.second = detail::layers_from_json(j.at("second"));
  return s;
}

}  // namespace tipgan::nn
