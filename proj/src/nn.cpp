#include "facet/nn.hpp"

#include <cmath>
#include <cstdint>

#include "facet/kernels/kernels.hpp"
#include "facet/rng.hpp"

namespace facet::nn {

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= d;
  }
  t.shape = std::move(shape);
  t.data.assign(static_cast<std::size_t>(n), 0.0);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  Tensor t = zeros(shape);
  if (t.data.size() != values.size()) {
    throw ShapeError("tensor data length does not match shape product");
  }
  t.data = std::move(values);
  return t;
}

Tensor Tensor::row_vector(std::vector<double> values) {
  if (values.empty()) throw ShapeError("empty tensor");
  const int n = static_cast<int>(values.size());
  return from({n}, std::move(values));
}

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(data.size()); }

int Tensor::rows() const {
  if (shape.size() == 1) return 1;
  if (shape.size() == 2) return shape[0];
  throw ShapeError("expected a rank-1 or rank-2 tensor");
}

int Tensor::cols() const {
  if (shape.size() == 1) return shape[0];
  if (shape.size() == 2) return shape[1];
  throw ShapeError("expected a rank-1 or rank-2 tensor");
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

int NetworkSpec::input_dim() const {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::dense) return l.in_dim;
  }
  return -1;
}

int NetworkSpec::output_dim() const {
  int dim = input_dim();
  for (const auto& l : layers) {
    if (l.kind == LayerKind::dense) dim = l.out_dim;
  }
  return dim;
}

void validate_spec(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("network spec has no layers");
  int current = -1;
  bool saw_dense = false;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == LayerKind::dense) {
      if (l.in_dim <= 0 || l.out_dim <= 0) {
        throw ConfigError("dense layer " + std::to_string(i) + " has non-positive dimensions");
      }
      if (current != -1 && current != l.in_dim) {
        throw ConfigError("dimension chain mismatch at layer " + std::to_string(i) + ": expected in_dim " +
                          std::to_string(current) + ", got " + std::to_string(l.in_dim));
      }
      current = l.out_dim;
      saw_dense = true;
    }
  }
  if (!saw_dense) throw ConfigError("network spec has no dense layer");
}

ParamSet init_network(const NetworkSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  ParamSet params;
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind != LayerKind::dense) continue;
    Tensor w = Tensor::zeros({l.in_dim, l.out_dim});
    const double stddev = std::sqrt(2.0 / static_cast<double>(l.in_dim));
    for (double& v : w.data) v = stddev * rng.normal();
    params.tensors.push_back(std::move(w));
    params.names.push_back("layer" + std::to_string(i) + ".weight");
    if (l.has_bias) {
      params.tensors.push_back(Tensor::zeros({l.out_dim}));
      params.names.push_back("layer" + std::to_string(i) + ".bias");
    }
  }
  return params;
}

void softmax_row(const double* x, double* out, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= sum;
}

namespace {

void apply_layer(const LayerSpec& l, const Tensor& w, const Tensor* b, const Tensor& in, Tensor& out) {
  const int rows = in.rows();
  const int cols = in.cols();
  switch (l.kind) {
    case LayerKind::dense: {
      if (cols != l.in_dim) {
        throw ShapeError("dense layer expects input dim " + std::to_string(l.in_dim) + ", got " +
                         std::to_string(cols));
      }
      out = in.shape.size() == 1 ? Tensor::zeros({l.out_dim}) : Tensor::zeros({rows, l.out_dim});
      kernels::matmul_f64(in.data.data(), w.data.data(), out.data.data(), rows, cols, l.out_dim);
      if (b != nullptr) {
        kernels::add_bias_f64(out.data.data(), b->data.data(), rows, l.out_dim);
      }
      break;
    }
    case LayerKind::relu: {
      out = in;
      kernels::relu_f64(in.data.data(), out.data.data(), in.data.size());
      break;
    }
    case LayerKind::sigmoid: {
      out = in;
      for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = 1.0 / (1.0 + std::exp(-in.data[i]));
      break;
    }
    case LayerKind::softmax: {
      out = in;
      for (int r = 0; r < rows; ++r) {
        softmax_row(in.data.data() + static_cast<std::size_t>(r) * cols,
                    out.data.data() + static_cast<std::size_t>(r) * cols, cols);
      }
      break;
    }
  }
}

// Walks spec layers, yielding the (weight, bias) parameter slot per dense layer.
struct ParamCursor {
  const ParamSet& params;
  std::size_t next = 0;

  std::pair<const Tensor*, const Tensor*> take(const LayerSpec& l) {
    const Tensor* w = &params.tensors.at(next++);
    const Tensor* b = l.has_bias ? &params.tensors.at(next++) : nullptr;
    return {w, b};
  }
};

Tensor run_forward(const ParamSet& params, const NetworkSpec& spec, const Tensor& input,
                   std::vector<Tensor>* record) {
  validate_spec(spec);
  if (input.shape.size() != 1 && input.shape.size() != 2) {
    throw ShapeError("forward expects a rank-1 or rank-2 input");
  }
  std::size_t expected_slots = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::dense) expected_slots += l.has_bias ? 2 : 1;
  }
  if (params.count() != expected_slots) {
    throw ShapeError("parameter set has " + std::to_string(params.count()) + " tensors, spec needs " +
                     std::to_string(expected_slots));
  }
  ParamCursor cursor{params};
  Tensor current = input;
  for (const auto& l : spec.layers) {
    if (record != nullptr) record->push_back(current);
    const Tensor* w = nullptr;
    const Tensor* b = nullptr;
    if (l.kind == LayerKind::dense) std::tie(w, b) = cursor.take(l);
    Tensor next;
    apply_layer(l, w != nullptr ? *w : Tensor{}, b, current, next);
    current = std::move(next);
  }
  return current;
}

}  // namespace

Tensor forward(const ParamSet& params, const NetworkSpec& spec, const Tensor& input) {
  return run_forward(params, spec, input, nullptr);
}

GradientTape forward_tape(const ParamSet& params, const NetworkSpec& spec, const Tensor& input) {
  GradientTape tape;
  tape.spec = &spec;
  tape.params = &params;
  tape.output = run_forward(params, spec, input, &tape.layer_inputs);
  return tape;
}

Gradients backward(GradientTape& tape, const Tensor& output_grad) {
  if (tape.spec == nullptr) throw UsageError("backward on an empty tape");
  if (tape.consumed) throw UsageError("gradient tape already consumed");
  tape.consumed = true;
  if (!output_grad.same_shape(tape.output)) {
    throw ShapeError("output_grad shape does not match forward output shape");
  }

  const NetworkSpec& spec = *tape.spec;
  const ParamSet& params = *tape.params;

  Gradients grads;
  grads.params.tensors.resize(params.count());
  grads.params.names = params.names;
  for (std::size_t i = 0; i < params.count(); ++i) {
    grads.params.tensors[i] = Tensor::zeros(params.tensors[i].shape);
  }

  // Parameter slot offsets per layer, recomputed by the same walk as forward.
  std::vector<std::size_t> slot(spec.layers.size(), 0);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    slot[i] = cursor;
    if (spec.layers[i].kind == LayerKind::dense) cursor += spec.layers[i].has_bias ? 2 : 1;
  }

  Tensor g = output_grad;
  for (std::size_t idx = spec.layers.size(); idx-- > 0;) {
    const auto& l = spec.layers[idx];
    const Tensor& in = tape.layer_inputs[idx];
    const Tensor& out = idx + 1 < spec.layers.size() ? tape.layer_inputs[idx + 1] : tape.output;
    const int rows = in.rows();
    switch (l.kind) {
      case LayerKind::dense: {
        const Tensor& w = params.tensors[slot[idx]];
        Tensor& dw = grads.params.tensors[slot[idx]];
        // dW = X^T * G
        kernels::matmul_tn_f64(in.data.data(), g.data.data(), dw.data.data(), l.in_dim, rows, l.out_dim);
        if (l.has_bias) {
          Tensor& db = grads.params.tensors[slot[idx] + 1];
          kernels::colsum_f64(g.data.data(), db.data.data(), rows, l.out_dim);
        }
        // dX = G * W^T
        Tensor dx = Tensor::zeros(in.shape);
        kernels::matmul_nt_f64(g.data.data(), w.data.data(), dx.data.data(), rows, l.out_dim, l.in_dim);
        g = std::move(dx);
        break;
      }
      case LayerKind::relu: {
        Tensor dx = Tensor::zeros(in.shape);
        kernels::relu_backward_f64(in.data.data(), g.data.data(), dx.data.data(), in.data.size());
        g = std::move(dx);
        break;
      }
      case LayerKind::sigmoid: {
        Tensor dx = Tensor::zeros(in.shape);
        for (std::size_t i = 0; i < in.data.size(); ++i) {
          const double s = out.data[i];
          dx.data[i] = g.data[i] * s * (1.0 - s);
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::softmax: {
        Tensor dx = Tensor::zeros(in.shape);
        const int cols = in.cols();
        for (int r = 0; r < rows; ++r) {
          const double* s = out.data.data() + static_cast<std::size_t>(r) * cols;
          const double* gr = g.data.data() + static_cast<std::size_t>(r) * cols;
          const double dot = kernels::dot_f64(gr, s, static_cast<std::size_t>(cols));
          double* dxr = dx.data.data() + static_cast<std::size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) dxr[c] = s[c] * (gr[c] - dot);
        }
        g = std::move(dx);
        break;
      }
    }
  }
  grads.input = std::move(g);
  return grads;
}

OptimizerState OptimizerState::for_params(const ParamSet& params, double lr, double wd) {
  OptimizerState s;
  s.learning_rate = lr;
  s.weight_decay = wd;
  s.m.reserve(params.count());
  s.v.reserve(params.count());
  for (const auto& t : params.tensors) {
    s.m.push_back(Tensor::zeros(t.shape));
    s.v.push_back(Tensor::zeros(t.shape));
  }
  return s;
}

void adamw_step(OptimizerState& state, ParamSet& params, const Gradients& grads) {
  if (state.m.size() != params.count() || grads.params.count() != params.count()) {
    throw ShapeError("optimizer state / parameter / gradient count mismatch");
  }
  for (std::size_t i = 0; i < params.count(); ++i) {
    if (!params.tensors[i].same_shape(grads.params.tensors[i])) {
      throw ShapeError("gradient shape mismatch for " + params.names[i]);
    }
    if (!grads.params.tensors[i].all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + params.names[i] + "'");
    }
  }
  state.step += 1;
  kernels::AdamWScalars s{};
  s.lr = state.learning_rate;
  s.beta1 = state.beta1;
  s.beta2 = state.beta2;
  s.eps = state.epsilon;
  s.weight_decay = state.weight_decay;
  s.bias_c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  s.bias_c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.count(); ++i) {
    kernels::adamw_update_f64(params.tensors[i].data.data(), state.m[i].data.data(),
                              state.v[i].data.data(), grads.params.tensors[i].data.data(),
                              params.tensors[i].data.size(), s);
  }
}

double grad_check(const NetworkSpec& spec, const ParamSet& params, const LossFn& loss_fn,
                  const Tensor& input, double eps) {
  if (eps <= 0.0) throw ConfigError("grad_check eps must be positive");

  GradientTape tape = forward_tape(params, spec, input);
  auto [loss0, out_grad] = loss_fn(tape.output);
  (void)loss0;
  Gradients analytic = backward(tape, out_grad);

  ParamSet probe = params;
  double max_rel = 0.0;
  for (std::size_t t = 0; t < probe.count(); ++t) {
    for (std::size_t i = 0; i < probe.tensors[t].data.size(); ++i) {
      const double saved = probe.tensors[t].data[i];
      probe.tensors[t].data[i] = saved + eps;
      const double lp = loss_fn(forward(probe, spec, input)).first;
      probe.tensors[t].data[i] = saved - eps;
      const double lm = loss_fn(forward(probe, spec, input)).first;
      probe.tensors[t].data[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double a = analytic.params.tensors[t].data[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-3});
      const double rel = std::fabs(a - numeric) / denom;
      max_rel = rel > max_rel ? rel : max_rel;
    }
  }
  return max_rel;
}

}  // namespace facet::nn
