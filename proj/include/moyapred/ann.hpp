#pragma once
// Feedforward classifier: ReLU hidden layers, one sigmoid output, trained by
// backpropagation with Adam on the mean squared error.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "moyapred/dataset.hpp"

namespace moyapred::ann {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Architecture {
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden_layers{100};

  // Throws std::invalid_argument.
  void validate() const;
  // input, hidden..., 1
  std::vector<std::size_t> widths() const;
  bool operator==(const Architecture&) const = default;
};

struct Layer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

struct Model {
  Architecture arch;
  std::vector<Layer> layers;

  std::size_t parameter_count() const;
  bool operator==(const Model& other) const;
};

struct Hyperparams {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 1000;
  std::vector<std::size_t> hidden_layers{100};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Throws std::invalid_argument; batch size is checked against n.
  void validate(std::size_t n) const;
  bool operator==(const Hyperparams&) const = default;
};

// Same shapes as Model::layers.
using Gradients = std::vector<Layer>;

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const Model& model);
};

struct TrainTrace {
  std::vector<double> epoch_loss;
};

// Uniform Glorot initialization, zero biases.
Model init_network(const Architecture& arch, std::uint64_t seed);

double relu(double z);
double sigmoid(double z);

// Score in (0, 1) for a single input.
double forward(const Model& model, std::span<const double> x);
// Scores for every row of a row-major n x input_width matrix.
std::vector<double> forward_batch(const Model& model, std::span<const double> rows, std::size_t n);

double mse_loss(std::span<const double> scores, std::span<const double> labels);

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

// Exact gradient of mse_loss over the batch; ReLU'(0) = 0. Throws
// DivergenceError on non-finite intermediates.
LossAndGradients backprop_gradients(const Model& model, std::span<const double> batch_x,
                                    std::span<const double> batch_y);

void adam_step(Model& model, const Gradients& grads, AdamState& state, double learning_rate,
               double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

struct TrainResult {
  Model model;
  TrainTrace trace;
};

// Requires both classes in `train`.
TrainResult train_ann(const Dataset& train, const Hyperparams& hp, std::uint64_t seed);

// Mini-batch Adam on raw arrays (row-major x, targets y); no class checks.
TrainResult train_network(std::span<const double> x, std::span<const double> y, std::size_t width,
                          const Hyperparams& hp, std::uint64_t seed);

// Label 1 iff score > threshold.
int classify(double score, double threshold = 0.5);

}  // namespace moyapred::ann
