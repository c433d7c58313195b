#include "moyapred/ann.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "moyapred/rng.hpp"

namespace moyapred::ann {

void Architecture::validate() const {
  if (input_width == 0) throw std::invalid_argument("input width must be at least 1");
  for (const auto w : hidden_layers) {
    if (w == 0) throw std::invalid_argument("hidden layer width must be at least 1");
  }
}

std::vector<std::size_t> Architecture::widths() const {
  std::vector<std::size_t> w;
  w.push_back(input_width);
  w.insert(w.end(), hidden_layers.begin(), hidden_layers.end());
  w.push_back(1);
  return w;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool Model::operator==(const Model& other) const {
  if (!(arch == other.arch) || layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.bias.size() != b.bias.size() || a.weights != b.weights || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

void Hyperparams::validate(std::size_t n) const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and non-negative");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (batch_size > n) {
    throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                " exceeds the number of training rows " + std::to_string(n));
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
  for (const auto w : hidden_layers) {
    if (w == 0) throw std::invalid_argument("hidden layer width must be at least 1");
  }
}

AdamState AdamState::zeros_like(const Model& model) {
  AdamState s;
  for (const auto& l : model.layers) {
    s.first_moment.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()),
                              Vector::Zero(l.bias.size())});
  }
  s.second_moment = s.first_moment;
  return s;
}

Model init_network(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Model model;
  model.arch = arch;
  Rng rng(derive_seed(seed, "ann-init"));
  const auto widths = arch.widths();
  for (std::size_t k = 1; k < widths.size(); ++k) {
    const auto fan_in = static_cast<Eigen::Index>(widths[k - 1]);
    const auto fan_out = static_cast<Eigen::Index>(widths[k]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    // Row-major fill order keeps the stream layout independent of storage order.
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

double relu(double z) { return z > 0.0 ? z : 0.0; }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Columns are samples.
Matrix inputs_as_columns(const Model& model, std::span<const double> rows, std::size_t n) {
  const auto p = static_cast<Eigen::Index>(model.arch.input_width);
  if (rows.size() != n * model.arch.input_width) {
    throw std::invalid_argument("input width does not match the network");
  }
  Eigen::Map<const RowMajor> m(rows.data(), static_cast<Eigen::Index>(n), p);
  return m.transpose();
}

struct ForwardPass {
  std::vector<Matrix> pre;   // z_k per layer
  std::vector<Matrix> post;  // a_0 = input, a_k = activation(z_k)
};

ForwardPass run_forward(const Model& model, Matrix input) {
  ForwardPass pass;
  pass.post.push_back(std::move(input));
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& layer = model.layers[k];
    Matrix z = layer.weights * pass.post.back();
    z.colwise() += layer.bias;
    const bool output = k + 1 == model.layers.size();
    Matrix a = output ? Matrix(z.unaryExpr([](double v) { return sigmoid(v); }))
                      : Matrix(z.unaryExpr([](double v) { return relu(v); }));
    pass.pre.push_back(std::move(z));
    pass.post.push_back(std::move(a));
  }
  return pass;
}

}  // namespace

double forward(const Model& model, std::span<const double> x) {
  for (const double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite network input");
  }
  return forward_batch(model, x, 1).front();
}

std::vector<double> forward_batch(const Model& model, std::span<const double> rows, std::size_t n) {
  if (n == 0) return {};
  const auto pass = run_forward(model, inputs_as_columns(model, rows, n));
  const auto& out = pass.post.back();
  return std::vector<double>(out.data(), out.data() + out.size());
}

double mse_loss(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("mse_loss: length mismatch");
  if (scores.empty()) throw std::invalid_argument("mse_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double d = scores[i] - labels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(scores.size());
}

LossAndGradients backprop_gradients(const Model& model, std::span<const double> batch_x,
                                    std::span<const double> batch_y) {
  const std::size_t n = batch_y.size();
  if (n == 0) throw std::invalid_argument("backprop: empty batch");
  const auto pass = run_forward(model, inputs_as_columns(model, batch_x, n));
  const Eigen::Map<const Eigen::RowVectorXd> y(batch_y.data(), static_cast<Eigen::Index>(n));
  const auto& scores = pass.post.back();

  LossAndGradients out;
  out.loss = (scores.row(0) - y).squaredNorm() / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw DivergenceError("non-finite loss during backpropagation");

  // dL/dz at the output: 2 (s - y) / n * s (1 - s)
  Matrix delta = (2.0 / static_cast<double>(n)) * (scores.row(0) - y).array() *
                 scores.row(0).array() * (1.0 - scores.row(0).array());
  out.grads.resize(model.layers.size());
  for (std::size_t k = model.layers.size(); k-- > 0;) {
    out.grads[k].weights = delta * pass.post[k].transpose();
    out.grads[k].bias = delta.rowwise().sum();
    if (k > 0) {
      Matrix back = model.layers[k].weights.transpose() * delta;
      delta = back.cwiseProduct(pass.pre[k - 1].unaryExpr([](double z) { return z > 0.0 ? 1.0 : 0.0; }));
    }
  }
  for (const auto& g : out.grads) {
    if (!g.weights.allFinite() || !g.bias.allFinite()) {
      throw DivergenceError("non-finite gradient during backpropagation");
    }
  }
  return out;
}

void adam_step(Model& model, const Gradients& grads, AdamState& state, double learning_rate,
               double beta1, double beta2, double epsilon) {
  if (grads.size() != model.layers.size() || state.first_moment.size() != model.layers.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  const double t = static_cast<double>(state.step + 1);
  const double correct1 = 1.0 - std::pow(beta1, t);
  const double correct2 = 1.0 - std::pow(beta2, t);

  const auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m.array() / correct1) /
                     ((v.array() / correct2).sqrt() + epsilon);
  };
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    update(model.layers[k].weights, grads[k].weights, state.first_moment[k].weights,
           state.second_moment[k].weights);
    update(model.layers[k].bias, grads[k].bias, state.first_moment[k].bias,
           state.second_moment[k].bias);
  }
  ++state.step;
}

TrainResult train_ann(const Dataset& train, const Hyperparams& hp, std::uint64_t seed) {
  require_both_classes(train, "train_ann");
  std::vector<double> y(train.labels().begin(), train.labels().end());
  return train_network(train.values(), y, train.cols(), hp, seed);
}

TrainResult train_network(std::span<const double> x, std::span<const double> y, std::size_t width,
                          const Hyperparams& hp, std::uint64_t seed) {
  const std::size_t n = y.size();
  if (x.size() != n * width) throw std::invalid_argument("train_network: shape mismatch");
  hp.validate(n);

  TrainResult result{init_network({width, hp.hidden_layers}, seed), {}};
  AdamState state = AdamState::zeros_like(result.model);
  Rng shuffle_rng(derive_seed(seed, "ann-shuffle"));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> bx;
  std::vector<double> by;
  result.trace.epoch_loss.reserve(hp.epochs);

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += hp.batch_size) {
      const std::size_t end = std::min(n, start + hp.batch_size);
      bx.clear();
      by.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto r = x.subspan(order[i] * width, width);
        bx.insert(bx.end(), r.begin(), r.end());
        by.push_back(y[order[i]]);
      }
      LossAndGradients lg;
      try {
        lg = backprop_gradients(result.model, bx, by);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch + 1) + ": " +
                              e.what());
      }
      loss_sum += lg.loss * static_cast<double>(end - start);
      adam_step(result.model, lg.grads, state, hp.learning_rate, hp.beta1, hp.beta2, hp.epsilon);
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch + 1));
    }
    result.trace.epoch_loss.push_back(epoch_loss);
  }
  for (const auto& l : result.model.layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw DivergenceError("training produced non-finite parameters");
    }
  }
  return result;
}

int classify(double score, double threshold) { return score > threshold ? 1 : 0; }

}  // namespace moyapred::ann
