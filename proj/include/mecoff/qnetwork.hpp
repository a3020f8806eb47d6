#pragma once

// Fully connected Q-function approximator: rectifier hidden layers and a
// linear output with one unit per action index. Also used as the
// container for gradients and optimizer moments, which share its shape.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecoff/rng.hpp"

namespace mecoff {

template <class Scalar>
class QNetwork {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;
  };

  QNetwork() = default;

  /// Zero-initialized network with layer widths `sizes` (input first).
  explicit QNetwork(const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("QNetwork needs at least an input and an output size");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] == 0 || sizes[l + 1] == 0) throw std::invalid_argument("QNetwork layer sizes must be positive");
      layers_.push_back({Matrix::Zero(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l])),
                         Vector::Zero(static_cast<Eigen::Index>(sizes[l + 1]))});
    }
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static QNetwork random(const std::vector<std::size_t>& sizes, Rng& rng) {
    QNetwork net(sizes);
    for (auto& layer : net.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
          layer.weight(i, j) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        layer.bias(i) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
    }
    return net;
  }

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(layers_.front().weight.cols()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(layers_.back().weight.rows()); }
  std::size_t depth() const noexcept { return layers_.size(); }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s{input_dim()};
    for (const auto& l : layers_) s.push_back(static_cast<std::size_t>(l.weight.rows()));
    return s;
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Q values for a batch; `inputs` holds one sample per column.
  Matrix forward(const Matrix& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_dim())
      throw std::invalid_argument("QNetwork::forward: input has " + std::to_string(inputs.rows()) +
                                  " rows, network expects " + std::to_string(input_dim()));
    Matrix a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = (layers_[l].weight * a).colwise() + layers_[l].bias;
      a = l + 1 < layers_.size() ? Matrix(z.cwiseMax(Scalar(0))) : std::move(z);
    }
    return a;
  }

  Vector forward_one(const Vector& input) const { return forward(Matrix(input)).col(0); }

  /// Flat parameter view in layer order: weight (column-major), then bias.
  std::vector<Scalar> parameters() const {
    std::vector<Scalar> p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
      p.insert(p.end(), l.weight.data(), l.weight.data() + l.weight.size());
      p.insert(p.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return p;
  }

  void set_parameters(const std::vector<Scalar>& p) {
    if (p.size() != parameter_count()) throw std::invalid_argument("QNetwork::set_parameters: size mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = p[k++];
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = p[k++];
    }
  }

  /// this += scale * other (same shape).
  void axpy(Scalar scale, const QNetwork& other) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].weight += scale * other.layers_[l].weight;
      layers_[l].bias += scale * other.layers_[l].bias;
    }
  }

  void set_zero() {
    for (auto& l : layers_) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  bool same_shape(const QNetwork& o) const { return sizes() == o.sizes(); }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  template <class Other>
  QNetwork<Other> cast() const {
    QNetwork<Other> out(sizes());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].weight = layers_[l].weight.template cast<Other>();
      out.layers()[l].bias = layers_[l].bias.template cast<Other>();
    }
    return out;
  }

  bool operator==(const QNetwork& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l)
      if (layers_[l].weight != o.layers_[l].weight || layers_[l].bias != o.layers_[l].bias) return false;
    return true;
  }

 private:
  std::vector<Layer> layers_;
};

template <class Scalar>
void sgd_step(QNetwork<Scalar>& net, const QNetwork<Scalar>& gradient, double learning_rate) {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be non-negative");
  if (learning_rate == 0.0) return;
  net.axpy(static_cast<Scalar>(-learning_rate), gradient);
}

/// Adaptive first/second-moment optimizer with bias correction.
template <class Scalar>
class Adam {
 public:
  Adam() = default;
  explicit Adam(const QNetwork<Scalar>& shape, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(shape.sizes()), v_(shape.sizes()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(QNetwork<Scalar>& net, const QNetwork<Scalar>& gradient, double learning_rate) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto step_size = static_cast<Scalar>(learning_rate * std::sqrt(c2) / c1);
    const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const auto eps = static_cast<Scalar>(eps_ * std::sqrt(c2));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      param.array() -= step_size * m.array() / (v.array().sqrt() + eps);
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& p = net.layers()[l];
      auto& m = m_.layers()[l];
      auto& v = v_.layers()[l];
      const auto& g = gradient.layers()[l];
      update(p.weight, m.weight, v.weight, g.weight);
      update(p.bias, m.bias, v.bias, g.bias);
    }
  }

 private:
  QNetwork<Scalar> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t t_ = 0;
};

inline constexpr int kCheckpointVersion = 1;

/// Text checkpoint: magic + version, layer-shape header, then one line of
/// shortest round-trip values per parameter block.
template <class Scalar>
void save_checkpoint(const QNetwork<Scalar>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "mecoff-qnetwork " << kCheckpointVersion << "\n";
  out << "sizes";
  for (auto s : net.sizes()) out << ' ' << s;
  out << "\n";
  char buf[64];
  auto emit = [&](const Scalar* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<double>(data[i]));
      out << (i ? " " : "") << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << "\n";
  };
  for (const auto& l : net.layers()) {
    emit(l.weight.data(), l.weight.size());
    emit(l.bias.data(), l.bias.size());
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

template <class Scalar>
QNetwork<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "mecoff-qnetwork") throw std::runtime_error("'" + path + "' is not a Q-network checkpoint");
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "sizes") throw std::runtime_error("checkpoint is missing its layer-shape header");
  std::vector<std::size_t> sizes;
  for (std::size_t s; header >> s;) sizes.push_back(s);
  QNetwork<Scalar> net(sizes);
  std::vector<Scalar> params;
  params.reserve(net.parameter_count());
  for (std::string tok; in >> tok;) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
      throw std::runtime_error("checkpoint holds a malformed value '" + tok + "'");
    params.push_back(static_cast<Scalar>(v));
  }
  net.set_parameters(params);
  return net;
}

}  // namespace mecoff
