#include "msrich/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "msrich/binary_io.hpp"
#include "msrich/errors.hpp"
#include "msrich/rng.hpp"

namespace msrich {

namespace {

constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;

double activate(Activation act, double x) {
  switch (act) {
    case Activation::selu:
      return selu(x);
    case Activation::relu:
      return relu(x);
    case Activation::linear:
      return x;
  }
  return x;
}

// Derivative as a function of the pre-activation value.
double activate_prime(Activation act, double x) {
  switch (act) {
    case Activation::selu:
      return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::linear:
      return 1.0;
  }
  return 1.0;
}

void check_model_shapes(const MlpModel& model, const char* caller) {
  if (model.layer_sizes.size() < 2) {
    throw ConfigError(std::string(caller) + ": model needs at least two layers");
  }
  if (model.weights.size() + 1 != model.layer_sizes.size() ||
      model.biases.size() != model.weights.size() ||
      model.activations.size() != model.weights.size()) {
    throw DimensionError(std::string(caller) + ": inconsistent model structure");
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    if (model.weights[l].rows() != model.layer_sizes[l + 1] ||
        model.weights[l].cols() != model.layer_sizes[l] ||
        model.biases[l].size() != model.layer_sizes[l + 1]) {
      throw DimensionError(std::string(caller) + ": layer " + std::to_string(l) +
                           " shapes do not match layer_sizes");
    }
  }
}

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;   // z_l per weight layer
  std::vector<Eigen::MatrixXd> post;  // a_l per weight layer
};

ForwardTrace run_forward(const MlpModel& model, const Eigen::MatrixXd& input) {
  ForwardTrace trace;
  trace.pre.reserve(model.weights.size());
  trace.post.reserve(model.weights.size());
  const Eigen::MatrixXd* a = &input;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Eigen::MatrixXd z = model.weights[l] * (*a);
    z.colwise() += model.biases[l];
    Eigen::MatrixXd out = z.unaryExpr(
        [act = model.activations[l]](double x) { return activate(act, x); });
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(out));
    a = &trace.post.back();
  }
  return trace;
}

void check_feature_lengths(std::size_t x, std::size_t mn, std::size_t mx, const char* caller) {
  if (x != mn || x != mx) {
    throw DimensionError(std::string(caller) + ": vector length " + std::to_string(x) +
                         " does not match bounds of length " + std::to_string(mn) + "/" +
                         std::to_string(mx));
  }
}

}  // namespace

std::int64_t MlpModel::n_parameters() const {
  std::int64_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * (std::exp(x) - 1.0);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

MlpModel init_model(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw ConfigError("init_model: need at least two layers, got " +
                      std::to_string(layer_sizes.size()));
  }
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("init_model: zero-width layer in layer_sizes");
  }

  MlpModel model;
  model.layer_sizes = layer_sizes;
  const int n_layers = static_cast<int>(layer_sizes.size()) - 1;
  Philox rng(seed);
  for (int l = 0; l < n_layers; ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    double sd = 0.05;
    if (l == 0) sd = std::sqrt(1.0 / fan_in);
    if (l == 1) sd = std::sqrt(2.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) w(i, j) = sd * rng.normal();
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    if (l == n_layers - 1) {
      model.activations.push_back(Activation::linear);
    } else {
      model.activations.push_back(l == 0 ? Activation::selu : Activation::relu);
    }
  }
  return model;
}

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& input) {
  check_model_shapes(model, "forward");
  if (input.rows() != model.input_size()) {
    throw DimensionError("forward: input has " + std::to_string(input.rows()) +
                         " features, model expects " + std::to_string(model.input_size()));
  }
  return run_forward(model, input).post.back();
}

std::vector<double> forward(const MlpModel& model, std::span<const double> input) {
  Eigen::MatrixXd x(input.size(), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<int>(i), 0) = input[i];
  const Eigen::MatrixXd y = forward_batch(model, x);
  return std::vector<double>(y.data(), y.data() + y.rows());
}

double mse_loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
    throw DimensionError("mse_loss: shape mismatch " + std::to_string(predictions.rows()) + "x" +
                         std::to_string(predictions.cols()) + " vs " +
                         std::to_string(targets.rows()) + "x" + std::to_string(targets.cols()));
  }
  if (predictions.cols() == 0) return 0.0;
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.cols());
}

BatchEval forward_backward(const MlpModel& model, const Eigen::MatrixXd& input,
                           const Eigen::MatrixXd& target) {
  check_model_shapes(model, "forward_backward");
  if (input.rows() != model.input_size() || target.rows() != model.output_size() ||
      input.cols() != target.cols()) {
    throw DimensionError("forward_backward: batch shapes " + std::to_string(input.rows()) + "x" +
                         std::to_string(input.cols()) + " -> " + std::to_string(target.rows()) +
                         "x" + std::to_string(target.cols()) + " do not fit the model");
  }

  const ForwardTrace trace = run_forward(model, input);
  const int n_layers = model.n_weight_layers();
  const double batch = static_cast<double>(input.cols());

  BatchEval eval;
  eval.prediction = trace.post.back();
  eval.loss = mse_loss(eval.prediction, target);
  eval.grads.d_weights.resize(n_layers);
  eval.grads.d_biases.resize(n_layers);

  Eigen::MatrixXd delta = (2.0 / batch) * (eval.prediction - target);
  for (int l = n_layers - 1; l >= 0; --l) {
    delta.array() *= trace.pre[l]
                         .unaryExpr([act = model.activations[l]](double x) {
                           return activate_prime(act, x);
                         })
                         .array();
    const Eigen::MatrixXd& a_prev = l == 0 ? input : trace.post[l - 1];
    eval.grads.d_weights[l].noalias() = delta * a_prev.transpose();
    eval.grads.d_biases[l] = delta.rowwise().sum();
    if (l > 0) delta = model.weights[l].transpose() * delta;
  }
  return eval;
}

AdamState make_adam_state(const MlpModel& model) {
  AdamState state;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    state.m_weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    state.v_weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    state.m_biases.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    state.v_biases.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }
  return state;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, double learning_rate) {
  if (grads.d_weights.size() != model.weights.size() ||
      grads.d_biases.size() != model.biases.size()) {
    throw DimensionError("adam_step: gradient layer count does not match the model");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    state.m_weights[l] = state.beta1 * state.m_weights[l] + (1.0 - state.beta1) * grads.d_weights[l];
    state.v_weights[l] = state.beta2 * state.v_weights[l] +
                         (1.0 - state.beta2) * grads.d_weights[l].cwiseProduct(grads.d_weights[l]);
    model.weights[l].array() -=
        learning_rate * (state.m_weights[l].array() / bc1) /
        ((state.v_weights[l].array() / bc2).sqrt() + state.eps);

    state.m_biases[l] = state.beta1 * state.m_biases[l] + (1.0 - state.beta1) * grads.d_biases[l];
    state.v_biases[l] = state.beta2 * state.v_biases[l] +
                        (1.0 - state.beta2) * grads.d_biases[l].cwiseProduct(grads.d_biases[l]);
    model.biases[l].array() -= learning_rate * (state.m_biases[l].array() / bc1) /
                               ((state.v_biases[l].array() / bc2).sqrt() + state.eps);
  }
}

std::vector<double> normalize(std::span<const double> x, std::span<const double> mn,
                              std::span<const double> mx) {
  check_feature_lengths(x.size(), mn.size(), mx.size(), "normalize");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double span = mx[i] - mn[i];
    out[i] = span > 0.0 ? 2.0 * (x[i] - mn[i]) / span - 1.0 : 0.0;
  }
  return out;
}

std::vector<double> denormalize(std::span<const double> x, std::span<const double> mn,
                                std::span<const double> mx) {
  check_feature_lengths(x.size(), mn.size(), mx.size(), "denormalize");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double span = mx[i] - mn[i];
    out[i] = span > 0.0 ? mn[i] + 0.5 * (x[i] + 1.0) * span : mn[i];
  }
  return out;
}

void fit_bounds(const std::vector<std::vector<double>>& samples, std::vector<double>& mn,
                std::vector<double>& mx) {
  if (samples.empty()) throw ConfigError("fit_bounds: empty sample set");
  const std::size_t m = samples.front().size();
  mn.assign(m, std::numeric_limits<double>::infinity());
  mx.assign(m, -std::numeric_limits<double>::infinity());
  for (const auto& s : samples) {
    if (s.size() != m) {
      throw DimensionError("fit_bounds: sample length " + std::to_string(s.size()) +
                           " differs from " + std::to_string(m));
    }
    for (std::size_t i = 0; i < m; ++i) {
      mn[i] = std::min(mn[i], s[i]);
      mx[i] = std::max(mx[i], s[i]);
    }
  }
}

TrainResult train(MlpModel model, const std::vector<std::vector<double>>& inputs,
                  const std::vector<std::vector<double>>& targets, const TrainConfig& cfg) {
  check_model_shapes(model, "train");
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.epochs < 1 ||
      !(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
    throw ConfigError("train: invalid configuration (learning_rate " +
                      std::to_string(cfg.learning_rate) + ", batch_size " +
                      std::to_string(cfg.batch_size) + ", epochs " + std::to_string(cfg.epochs) +
                      ", validation_fraction " + std::to_string(cfg.validation_fraction) + ")");
  }
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw DimensionError("train: " + std::to_string(inputs.size()) + " inputs vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const int n_total = static_cast<int>(inputs.size());
  const int m_in = model.input_size();
  const int m_out = model.output_size();
  for (int i = 0; i < n_total; ++i) {
    if (static_cast<int>(inputs[i].size()) != m_in ||
        static_cast<int>(targets[i].size()) != m_out) {
      throw DimensionError("train: sample " + std::to_string(i) + " has lengths " +
                           std::to_string(inputs[i].size()) + "/" +
                           std::to_string(targets[i].size()) + ", expected " +
                           std::to_string(m_in) + "/" + std::to_string(m_out));
    }
  }

  Philox rng(cfg.seed);
  std::vector<int> order(n_total);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n_total - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  const int n_val = static_cast<int>(std::lround(cfg.validation_fraction * n_total));
  const int n_train = n_total - n_val;
  if (n_train < 1) {
    throw ConfigError("train: validation split of " + std::to_string(n_val) +
                      " leaves no training samples");
  }

  TrainResult result;
  result.bounds = NormalizationBounds{};
  {
    std::vector<std::vector<double>> train_in, train_out;
    train_in.reserve(n_train);
    train_out.reserve(n_train);
    for (int i = 0; i < n_train; ++i) {
      train_in.push_back(inputs[order[i]]);
      train_out.push_back(targets[order[i]]);
    }
    fit_bounds(train_in, result.bounds.in_min, result.bounds.in_max);
    fit_bounds(train_out, result.bounds.out_min, result.bounds.out_max);
  }

  Eigen::MatrixXd x_train(m_in, n_train), y_train(m_out, n_train);
  for (int i = 0; i < n_train; ++i) {
    const std::vector<double> xi =
        normalize(inputs[order[i]], result.bounds.in_min, result.bounds.in_max);
    const std::vector<double> yi =
        normalize(targets[order[i]], result.bounds.out_min, result.bounds.out_max);
    for (int r = 0; r < m_in; ++r) x_train(r, i) = xi[r];
    for (int r = 0; r < m_out; ++r) y_train(r, i) = yi[r];
  }
  Eigen::MatrixXd x_val(m_in, n_val), y_val(m_out, n_val);
  for (int i = 0; i < n_val; ++i) {
    const std::vector<double> xi =
        normalize(inputs[order[n_train + i]], result.bounds.in_min, result.bounds.in_max);
    const std::vector<double> yi =
        normalize(targets[order[n_train + i]], result.bounds.out_min, result.bounds.out_max);
    for (int r = 0; r < m_in; ++r) x_val(r, i) = xi[r];
    for (int r = 0; r < m_out; ++r) y_val(r, i) = yi[r];
  }

  AdamState state = make_adam_state(model);
  std::vector<int> batch_order(n_train);
  std::iota(batch_order.begin(), batch_order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n_train - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(batch_order[i], batch_order[j]);
    }
    double epoch_sq_sum = 0.0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int bn = std::min(cfg.batch_size, n_train - start);
      Eigen::MatrixXd xb(m_in, bn), yb(m_out, bn);
      for (int k = 0; k < bn; ++k) {
        xb.col(k) = x_train.col(batch_order[start + k]);
        yb.col(k) = y_train.col(batch_order[start + k]);
      }
      const BatchEval eval = forward_backward(model, xb, yb);
      if (!std::isfinite(eval.loss)) {
        throw NumericError("train: loss diverged at epoch " + std::to_string(epoch + 1) +
                           ", batch " + std::to_string(start / cfg.batch_size + 1));
      }
      epoch_sq_sum += eval.loss * bn;
      adam_step(model, eval.grads, state, cfg.learning_rate);
    }
    result.history.train_loss.push_back(epoch_sq_sum / n_train);
    if (n_val > 0) {
      const Eigen::MatrixXd pred = forward_batch(model, x_val);
      result.history.val_loss.push_back(mse_loss(pred, y_val));
    }
  }

  result.model = std::move(model);
  return result;
}

double gradient_check(const MlpModel& model, std::span<const double> input,
                      std::span<const double> target) {
  check_model_shapes(model, "gradient_check");
  if (model.n_parameters() > 1000) {
    throw ConfigError("gradient_check: model has " + std::to_string(model.n_parameters()) +
                      " parameters, limit is 1000");
  }
  Eigen::MatrixXd x(input.size(), 1), y(target.size(), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<int>(i), 0) = input[i];
  for (std::size_t i = 0; i < target.size(); ++i) y(static_cast<int>(i), 0) = target[i];

  const BatchEval eval = forward_backward(model, x, y);
  MlpModel probe = model;
  const double eps = 1e-6;
  double worst = 0.0;

  auto probe_param = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + eps;
    const double up = mse_loss(forward_batch(probe, x), y);
    *slot = saved - eps;
    const double down = mse_loss(forward_batch(probe, x), y);
    *slot = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double rel = std::abs(analytic - fd) /
                       std::max({std::abs(analytic), std::abs(fd), 1e-8});
    worst = std::max(worst, rel);
  };

  for (int l = 0; l < model.n_weight_layers(); ++l) {
    for (int i = 0; i < probe.weights[l].rows(); ++i) {
      for (int j = 0; j < probe.weights[l].cols(); ++j) {
        probe_param(&probe.weights[l](i, j), eval.grads.d_weights[l](i, j));
      }
    }
    for (int i = 0; i < probe.biases[l].size(); ++i) {
      probe_param(&probe.biases[l](i), eval.grads.d_biases[l](i));
    }
  }
  return worst;
}

std::vector<double> predict_basis(const MlpModel& model, const NormalizationBounds& bounds,
                                  std::span<const double> kappa_patch) {
  if (static_cast<int>(kappa_patch.size()) != model.input_size()) {
    throw DimensionError("predict_basis: patch length " + std::to_string(kappa_patch.size()) +
                         ", model expects " + std::to_string(model.input_size()));
  }
  const std::vector<double> z = normalize(kappa_patch, bounds.in_min, bounds.in_max);
  const std::vector<double> out = forward(model, z);
  return denormalize(out, bounds.out_min, bounds.out_max);
}

RmseResult rmse(const MlpModel& model, const NormalizationBounds& bounds,
                const std::vector<std::vector<double>>& inputs,
                const std::vector<std::vector<double>>& targets) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw DimensionError("rmse: " + std::to_string(inputs.size()) + " inputs vs " +
                         std::to_string(targets.size()) + " targets");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const std::vector<double> pred = predict_basis(model, bounds, inputs[s]);
    if (pred.size() != targets[s].size()) {
      throw DimensionError("rmse: target length " + std::to_string(targets[s].size()) +
                           " does not match prediction length " + std::to_string(pred.size()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - targets[s][i];
      num += d * d;
      den += targets[s][i] * targets[s][i];
    }
  }
  RmseResult out;
  if (den == 0.0) {
    out.degenerate = true;
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.value = std::sqrt(num / den);
  return out;
}

void save_model(const MlpModel& model, const NormalizationBounds& bounds,
                const std::string& path) {
  check_model_shapes(model, "save_model");
  if (static_cast<int>(bounds.in_min.size()) != model.input_size() ||
      static_cast<int>(bounds.in_max.size()) != model.input_size() ||
      static_cast<int>(bounds.out_min.size()) != model.output_size() ||
      static_cast<int>(bounds.out_max.size()) != model.output_size()) {
    throw DimensionError("save_model: bounds do not match the model input/output sizes");
  }
  BinaryWriter out(path);
  out.magic("MSRM");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(model.n_weight_layers()));
  for (int l = 0; l < model.n_weight_layers(); ++l) {
    out.u64(static_cast<std::uint64_t>(model.weights[l].rows()));
    out.u64(static_cast<std::uint64_t>(model.weights[l].cols()));
    out.u8(static_cast<std::uint8_t>(model.activations[l]));
  }
  for (int l = 0; l < model.n_weight_layers(); ++l) {
    // Row-major on disk, independent of the in-memory layout.
    const auto& w = model.weights[l];
    for (int i = 0; i < w.rows(); ++i) {
      for (int j = 0; j < w.cols(); ++j) out.f64(w(i, j));
    }
    out.f64_array({model.biases[l].data(), static_cast<std::size_t>(model.biases[l].size())});
  }
  for (const auto* vec : {&bounds.in_min, &bounds.in_max, &bounds.out_min, &bounds.out_max}) {
    out.f64_array(*vec);
  }
  out.finish();
}

LoadedModel load_model(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("MSRM");
  const std::uint32_t version = in.u32();
  if (version != 1) {
    throw IoError("load_model: unsupported version " + std::to_string(version) + " in " + path);
  }
  const std::uint32_t n_layers = in.u32();
  if (n_layers == 0 || n_layers > 64) {
    throw IoError("load_model: implausible layer count " + std::to_string(n_layers) + " in " +
                  path);
  }

  LoadedModel loaded;
  MlpModel& model = loaded.model;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint64_t rows = in.u64();
    const std::uint64_t cols = in.u64();
    const std::uint8_t act = in.u8();
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
      throw IoError("load_model: implausible layer shape in " + path);
    }
    if (act > 2) throw IoError("load_model: unknown activation tag in " + path);
    shapes.emplace_back(rows, cols);
    model.activations.push_back(static_cast<Activation>(act));
  }
  model.layer_sizes.push_back(static_cast<int>(shapes.front().second));
  for (const auto& [rows, cols] : shapes) model.layer_sizes.push_back(static_cast<int>(rows));

  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const auto [rows, cols] = shapes[l];
    Eigen::MatrixXd w(rows, cols);
    for (std::uint64_t i = 0; i < rows; ++i) {
      for (std::uint64_t j = 0; j < cols; ++j) {
        w(static_cast<int>(i), static_cast<int>(j)) = in.f64();
      }
    }
    const std::vector<double> b = in.f64_array(rows);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
  }

  const int m_in = model.layer_sizes.front();
  const int m_out = model.layer_sizes.back();
  loaded.bounds.in_min = in.f64_array(m_in);
  loaded.bounds.in_max = in.f64_array(m_in);
  loaded.bounds.out_min = in.f64_array(m_out);
  loaded.bounds.out_max = in.f64_array(m_out);
  in.expect_eof();

  check_model_shapes(model, "load_model");
  return loaded;
}

}  // namespace msrich
