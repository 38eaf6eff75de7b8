#include "facet/losses.hpp"

#include <cmath>
#include <cstddef>

#include "facet/kernels/kernels.hpp"

namespace facet::losses {

LossBreakdown total_loss(double l_fm, double l_task, double l_kl, double alpha, double beta) {
  if (!std::isfinite(l_fm) || !std::isfinite(l_task) || !std::isfinite(l_kl)) {
    throw NumericError("total_loss: non-finite component loss");
  }
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw NumericError("total_loss: non-finite loss weight");
  }
  LossBreakdown b;
  b.l_fm = l_fm;
  b.l_task = l_task;
  b.l_kl = l_kl;
  b.alpha = alpha;
  b.beta = beta;
  b.total = l_fm + alpha * l_task + beta * l_kl;
  return b;
}

TaskTarget TaskTarget::regression(std::vector<double> v) {
  TaskTarget t;
  t.kind = Kind::regression;
  t.values = std::move(v);
  t.validate();
  return t;
}

TaskTarget TaskTarget::classification(int label, int num_classes) {
  if (label < 0 || label >= num_classes) throw DataError("classification label out of range");
  TaskTarget t;
  t.kind = Kind::classification;
  t.values.assign(static_cast<std::size_t>(num_classes), 0.0);
  t.values[static_cast<std::size_t>(label)] = 1.0;
  return t;
}

void TaskTarget::validate() const {
  if (values.empty()) throw DataError("empty task target");
  if (kind == Kind::regression) {
    for (double v : values) {
      if (!(v >= 0.0 && v <= 5.0)) throw DataError("regression target outside [0, 5]");
    }
  } else {
    int ones = 0;
    double sum = 0.0;
    for (double v : values) {
      if (v != 0.0 && v != 1.0) throw DataError("classification target is not one-hot");
      ones += v == 1.0 ? 1 : 0;
      sum += v;
    }
    if (ones != 1 || sum != 1.0) throw DataError("classification target is not one-hot");
  }
}

namespace {

void require_same_shape(const nn::Tensor& a, const nn::Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": shape mismatch");
}

void require_nonempty(const nn::Tensor& t, const char* what) {
  if (t.data.empty()) throw ShapeError(std::string(what) + ": empty tensor");
}

}  // namespace

ScalarWithGrad mse_task_loss(const nn::Tensor& pred, const nn::Tensor& target) {
  require_nonempty(pred, "mse_task_loss");
  require_same_shape(pred, target, "mse_task_loss");
  const std::size_t n = pred.data.size();
  ScalarWithGrad r;
  r.value = kernels::sumsq_diff_f64(pred.data.data(), target.data.data(), n) / static_cast<double>(n);
  r.grad = nn::Tensor::zeros(pred.shape);
  const double scale = 2.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) r.grad.data[i] = scale * (pred.data[i] - target.data[i]);
  return r;
}

ScalarWithGrad ce_task_loss(const nn::Tensor& logits, const nn::Tensor& one_hot) {
  require_nonempty(logits, "ce_task_loss");
  require_same_shape(logits, one_hot, "ce_task_loss");
  const int rows = logits.rows();
  const int cols = logits.cols();
  // Validate every row is one-hot.
  for (int r = 0; r < rows; ++r) {
    int ones = 0;
    for (int c = 0; c < cols; ++c) {
      const double v = one_hot.at(r, c);
      if (v != 0.0 && v != 1.0) throw DataError("ce_task_loss: target is not one-hot");
      if (v == 1.0) ++ones;
    }
    if (ones != 1) throw DataError("ce_task_loss: target is not one-hot");
  }

  ScalarWithGrad out;
  out.grad = nn::Tensor::zeros(logits.shape);
  std::vector<double> sm(static_cast<std::size_t>(cols));
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* lr = logits.data.data() + static_cast<std::size_t>(r) * cols;
    nn::softmax_row(lr, sm.data(), cols);
    for (int c = 0; c < cols; ++c) {
      const double y = one_hot.at(r, c);
      if (y == 1.0) {
        // -log softmax via log-sum-exp for stability.
        double mx = lr[0];
        for (int j = 1; j < cols; ++j) mx = lr[j] > mx ? lr[j] : mx;
        double se = 0.0;
        for (int j = 0; j < cols; ++j) se += std::exp(lr[j] - mx);
        loss += std::log(se) + mx - lr[c];
      }
      out.grad.at(r, c) = (sm[static_cast<std::size_t>(c)] - y) / static_cast<double>(rows);
    }
  }
  out.value = loss / static_cast<double>(rows);
  return out;
}

ScalarWithGrad bce_logits_loss(const nn::Tensor& logits, const nn::Tensor& targets) {
  require_nonempty(logits, "bce_logits_loss");
  require_same_shape(logits, targets, "bce_logits_loss");
  const std::size_t n = logits.data.size();
  ScalarWithGrad out;
  out.grad = nn::Tensor::zeros(logits.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.data[i];
    const double t = targets.data[i];
    if (t != 0.0 && t != 1.0) throw DataError("bce_logits_loss: targets must be 0/1");
    // max(z,0) - z*t + log(1 + exp(-|z|))
    loss += (z > 0.0 ? z : 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
    const double s = 1.0 / (1.0 + std::exp(-z));
    out.grad.data[i] = (s - t) / static_cast<double>(n);
  }
  out.value = loss / static_cast<double>(n);
  return out;
}

namespace {

struct InterpWeight {
  int lo;
  int hi;
  double w;  // value = (1-w)*f[lo] + w*f[hi]
};

std::vector<InterpWeight> interp_weights(int n, int m) {
  if (n < 1) throw ShapeError("interpolate_features: empty input");
  if (m < 1) throw ShapeError("interpolate_features: target dimension must be >= 1");
  std::vector<InterpWeight> ws(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    double pos = 0.0;
    if (m > 1 && n > 1) {
      pos = static_cast<double>(j) * static_cast<double>(n - 1) / static_cast<double>(m - 1);
    }
    int lo = static_cast<int>(std::floor(pos));
    if (lo > n - 1) lo = n - 1;
    double w = pos - static_cast<double>(lo);
    int hi = lo + 1;
    if (hi > n - 1) {
      hi = n - 1;
      w = 0.0;
    }
    ws[static_cast<std::size_t>(j)] = {lo, hi, w};
  }
  return ws;
}

}  // namespace

std::vector<double> interpolate_features(const std::vector<double>& f, int m) {
  const auto ws = interp_weights(static_cast<int>(f.size()), m);
  std::vector<double> out(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto& iw = ws[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(j)] =
        (1.0 - iw.w) * f[static_cast<std::size_t>(iw.lo)] + iw.w * f[static_cast<std::size_t>(iw.hi)];
  }
  return out;
}

nn::Tensor interpolate_rows(const nn::Tensor& f, int m) {
  require_nonempty(f, "interpolate_rows");
  const int rows = f.rows();
  const int n = f.cols();
  const auto ws = interp_weights(n, m);
  nn::Tensor out = f.shape.size() == 1 ? nn::Tensor::zeros({m}) : nn::Tensor::zeros({rows, m});
  for (int r = 0; r < rows; ++r) {
    const double* src = f.data.data() + static_cast<std::size_t>(r) * n;
    double* dst = out.data.data() + static_cast<std::size_t>(r) * m;
    for (int j = 0; j < m; ++j) {
      const auto& iw = ws[static_cast<std::size_t>(j)];
      dst[j] = (1.0 - iw.w) * src[iw.lo] + iw.w * src[iw.hi];
    }
  }
  return out;
}

nn::Tensor interpolate_rows_backward(const nn::Tensor& out_grad, int input_dim) {
  require_nonempty(out_grad, "interpolate_rows_backward");
  const int rows = out_grad.rows();
  const int m = out_grad.cols();
  const auto ws = interp_weights(input_dim, m);
  nn::Tensor in_grad = out_grad.shape.size() == 1 ? nn::Tensor::zeros({input_dim})
                                                  : nn::Tensor::zeros({rows, input_dim});
  for (int r = 0; r < rows; ++r) {
    const double* g = out_grad.data.data() + static_cast<std::size_t>(r) * m;
    double* dst = in_grad.data.data() + static_cast<std::size_t>(r) * input_dim;
    for (int j = 0; j < m; ++j) {
      const auto& iw = ws[static_cast<std::size_t>(j)];
      dst[iw.lo] += (1.0 - iw.w) * g[j];
      dst[iw.hi] += iw.w * g[j];
    }
  }
  return in_grad;
}

ScalarWithGrad feature_match_loss(const nn::Tensor& f_t, const nn::Tensor& f_s) {
  require_nonempty(f_t, "feature_match_loss");
  require_nonempty(f_s, "feature_match_loss");
  if (f_t.rows() != f_s.rows()) throw ShapeError("feature_match_loss: batch size mismatch");
  const int m = f_t.cols();
  const nn::Tensor interp = interpolate_rows(f_s, m);
  ScalarWithGrad mse = mse_task_loss(interp, f_t);
  ScalarWithGrad out;
  out.value = mse.value;
  out.grad = interpolate_rows_backward(mse.grad, f_s.cols());
  return out;
}

ScalarWithGrad kl_distill_loss(const nn::Tensor& teacher_logits, const nn::Tensor& student_logits) {
  require_nonempty(teacher_logits, "kl_distill_loss");
  require_same_shape(teacher_logits, student_logits, "kl_distill_loss");
  const int rows = teacher_logits.rows();
  const int cols = teacher_logits.cols();
  ScalarWithGrad out;
  out.grad = nn::Tensor::zeros(student_logits.shape);
  std::vector<double> pt(static_cast<std::size_t>(cols));
  std::vector<double> ps(static_cast<std::size_t>(cols));
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* trow = teacher_logits.data.data() + static_cast<std::size_t>(r) * cols;
    const double* srow = student_logits.data.data() + static_cast<std::size_t>(r) * cols;
    nn::softmax_row(trow, pt.data(), cols);
    nn::softmax_row(srow, ps.data(), cols);
    // log softmax via log-sum-exp.
    double mx = srow[0];
    for (int j = 1; j < cols; ++j) mx = srow[j] > mx ? srow[j] : mx;
    double se = 0.0;
    for (int j = 0; j < cols; ++j) se += std::exp(srow[j] - mx);
    const double lse = std::log(se) + mx;
    for (int c = 0; c < cols; ++c) {
      loss += -pt[static_cast<std::size_t>(c)] * (srow[c] - lse);
      out.grad.at(r, c) =
          (ps[static_cast<std::size_t>(c)] - pt[static_cast<std::size_t>(c)]) / static_cast<double>(rows);
    }
  }
  out.value = loss / static_cast<double>(rows);
  return out;
}

}  // namespace facet::losses
