#pragma once

#include <vector>

#include "facet/nn.hpp"

namespace facet::losses {

// The four scalars of the distillation objective for one batch:
//   total = l_fm + alpha * l_task + beta * l_kl
struct LossBreakdown {
  double l_fm = 0.0;
  double l_task = 0.0;
  double l_kl = 0.0;
  double total = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
};

LossBreakdown total_loss(double l_fm, double l_task, double l_kl, double alpha, double beta);

// Supervision target for one sample. Regression targets are AU intensities
// in [0, 5] (binary detection targets fit the same range); classification
// targets are one-hot.
struct TaskTarget {
  enum class Kind { regression, classification };
  Kind kind = Kind::regression;
  std::vector<double> values;

  static TaskTarget regression(std::vector<double> v);
  static TaskTarget classification(int label, int num_classes);
  void validate() const;
};

struct ScalarWithGrad {
  double value = 0.0;
  nn::Tensor grad;
};

// Mean squared error over every element (batch included in the mean).
ScalarWithGrad mse_task_loss(const nn::Tensor& pred, const nn::Tensor& target);

// Softmax cross-entropy from logits, one-hot targets, mean over batch rows.
ScalarWithGrad ce_task_loss(const nn::Tensor& logits, const nn::Tensor& one_hot);

// Element-wise sigmoid + binary cross-entropy from logits, 0/1 targets,
// mean over every element. Used for AU detection heads.
ScalarWithGrad bce_logits_loss(const nn::Tensor& logits, const nn::Tensor& targets);

// Samples f at m positions linearly spaced over [0, n-1], endpoints included.
// Identity when m == n.
std::vector<double> interpolate_features(const std::vector<double>& f, int m);

// Row-wise interpolation of a (B x n) feature tensor to width m, and the
// transpose operation routing output-side gradients back to input slots.
nn::Tensor interpolate_rows(const nn::Tensor& f, int m);
nn::Tensor interpolate_rows_backward(const nn::Tensor& out_grad, int input_dim);

// ||f_T - I(f_S)||^2 under mean reduction; gradient w.r.t. f_S flows through
// the interpolation weights.
ScalarWithGrad feature_match_loss(const nn::Tensor& f_t, const nn::Tensor& f_s);

// Cross-entropy of the student softmax against the teacher softmax
// distribution, mean over batch rows; gradient w.r.t. student logits.
ScalarWithGrad kl_distill_loss(const nn::Tensor& teacher_logits, const nn::Tensor& student_logits);

}  // namespace facet::losses
