#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "facet/errors.hpp"

namespace facet::nn {

// Dense row-major f64 tensor. Training runs entirely in 64-bit; the
// inference path down-converts when a bundle is compiled.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  static Tensor zeros(std::vector<int> shape);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor row_vector(std::vector<double> values);

  std::int64_t size() const;
  // 2-D view: rank-1 tensors read as a single row.
  int rows() const;
  int cols() const;
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

enum class LayerKind { dense, relu, sigmoid, softmax };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int in_dim = 0;
  int out_dim = 0;
  bool has_bias = true;

  static LayerSpec dense(int in, int out, bool bias = true) { return {LayerKind::dense, in, out, bias}; }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0, false}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid, 0, 0, false}; }
  static LayerSpec softmax() { return {LayerKind::softmax, 0, 0, false}; }
};

enum class NetworkRole { encoder, classifier };

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  NetworkRole role = NetworkRole::encoder;

  int input_dim() const;   // in_dim of the first dense layer
  int output_dim() const;  // out_dim of the last dense layer
};

// Throws ConfigError when the dimension chain is broken or no dense layer exists.
void validate_spec(const NetworkSpec& spec);

// Flat parameter list; entry order is the walk order over dense layers
// (weight, then bias when present). Names like "layer0.weight" key error
// messages and the serialized manifest.
struct ParamSet {
  std::vector<Tensor> tensors;
  std::vector<std::string> names;

  std::size_t count() const { return tensors.size(); }
};

// He-scaled zero-mean weights (stddev sqrt(2/in_dim)), zero biases.
// Bit-deterministic for a fixed seed.
ParamSet init_network(const NetworkSpec& spec, std::uint64_t seed);

// Records one forward pass. backward() consumes it exactly once. Borrows the
// spec and params it was recorded against; both must outlive the tape.
struct GradientTape {
  const NetworkSpec* spec = nullptr;
  const ParamSet* params = nullptr;
  std::vector<Tensor> layer_inputs;
  Tensor output;
  bool consumed = false;
};

Tensor forward(const ParamSet& params, const NetworkSpec& spec, const Tensor& input);
GradientTape forward_tape(const ParamSet& params, const NetworkSpec& spec, const Tensor& input);

struct Gradients {
  ParamSet params;  // aligned index-for-index with the network ParamSet
  Tensor input;
};

Gradients backward(GradientTape& tape, const Tensor& output_grad);

struct OptimizerState {
  double learning_rate = 3e-5;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static OptimizerState for_params(const ParamSet& params, double lr, double wd);
};

// Decoupled weight decay, bias-corrected moments. Throws NumericError naming
// the parameter when a gradient is non-finite.
void adamw_step(OptimizerState& state, ParamSet& params, const Gradients& grads);

// Loss adapter for grad_check: maps the network output to (loss, dLoss/dOutput).
using LossFn = std::function<std::pair<double, Tensor>(const Tensor& output)>;

// Max relative error between analytic parameter gradients and central finite
// differences with step eps.
double grad_check(const NetworkSpec& spec, const ParamSet& params, const LossFn& loss_fn,
                  const Tensor& input, double eps);

// Row-wise softmax with max subtraction; shared by layers, losses and heads.
void softmax_row(const double* x, double* out, int n);

}  // namespace facet::nn
