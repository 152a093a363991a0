#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace msrich {

// Dense feedforward network in float64. Columns are samples throughout, so a
// batch of patches is an input_size x batch matrix.

enum class Activation : std::uint8_t { linear = 0, selu = 1, relu = 2 };

struct MlpModel {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<Eigen::VectorXd> biases;
  std::vector<Activation> activations;  // one tag per weight layer, last one linear

  int n_weight_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::int64_t n_parameters() const;
};

// Weights drawn layer by layer in row-major order from one counter stream:
// the first hidden layer is LeCun normal (variance 1/fan_in), the second He
// normal (2/fan_in), every later layer Normal(0, 0.05^2). Biases start at
// zero. Hidden activations are SELU then ReLU, the output layer stays affine.
MlpModel init_model(const std::vector<int>& layer_sizes, std::uint64_t seed);

double selu(double x);
double relu(double x);

std::vector<double> forward(const MlpModel& model, std::span<const double> input);
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& input);

// Mean over columns of the squared Euclidean distance between prediction and
// target columns.
double mse_loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets);

struct Gradients {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
};

struct BatchEval {
  double loss = 0.0;
  Eigen::MatrixXd prediction;
  Gradients grads;
};

// Forward pass plus exact backpropagation of the mean squared distance loss.
BatchEval forward_backward(const MlpModel& model, const Eigen::MatrixXd& input,
                           const Eigen::MatrixXd& target);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
};

AdamState make_adam_state(const MlpModel& model);

// One bias-corrected Adam update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, double learning_rate);

// Per-feature affine map onto [-1, 1]; a constant feature (max == min) maps
// to 0 and denormalizes back to its min.
std::vector<double> normalize(std::span<const double> x, std::span<const double> mn,
                              std::span<const double> mx);
std::vector<double> denormalize(std::span<const double> x, std::span<const double> mn,
                                std::span<const double> mx);

struct NormalizationBounds {
  std::vector<double> in_min, in_max;
  std::vector<double> out_min, out_max;
};

// Componentwise min/max over a sample set, one bounds pair per feature.
void fit_bounds(const std::vector<std::vector<double>>& samples, std::vector<double>& mn,
                std::vector<double>& mx);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;  // running batch mean per epoch, normalized units
  std::vector<double> val_loss;    // full validation pass per epoch; empty without a split
};

struct TrainResult {
  MlpModel model;
  NormalizationBounds bounds;
  TrainHistory history;
};

// Splits off round(validation_fraction * N) samples after a seeded shuffle,
// fits the normalization bounds on the training part only, then runs seeded
// mini-batch Adam for the configured number of epochs.
TrainResult train(MlpModel model, const std::vector<std::vector<double>>& inputs,
                  const std::vector<std::vector<double>>& targets, const TrainConfig& cfg);

// Central-difference check (eps = 1e-6) of the backpropagated gradients on a
// single sample pair; returns the worst relative deviation over parameters.
// Meant for small models; refuses more than 10^3 parameters.
double gradient_check(const MlpModel& model, std::span<const double> input,
                      std::span<const double> target);

// normalize -> forward -> denormalize, the full prediction map for one patch.
std::vector<double> predict_basis(const MlpModel& model, const NormalizationBounds& bounds,
                                  std::span<const double> kappa_patch);

struct RmseResult {
  double value = 0.0;
  bool degenerate = false;  // all targets zero, the ratio is undefined
};

// sqrt(sum over samples of |prediction - target|^2 / sum of |target|^2) in
// denormalized units.
RmseResult rmse(const MlpModel& model, const NormalizationBounds& bounds,
                const std::vector<std::vector<double>>& inputs,
                const std::vector<std::vector<double>>& targets);

// Binary model checkpoint: magic "MSRM", version, layer shapes and activation
// tags, row-major float64 weights and biases, then the four bounds vectors.
// Native little-endian layout; load validates the header and rejects trailing
// bytes, so a round-trip is byte-exact.
void save_model(const MlpModel& model, const NormalizationBounds& bounds,
                const std::string& path);

struct LoadedModel {
  MlpModel model;
  NormalizationBounds bounds;
};

LoadedModel load_model(const std::string& path);

}  // namespace msrich
