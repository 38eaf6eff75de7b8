#include "facet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "facet/metrics.hpp"
#include "facet/rng.hpp"

namespace facet::train {

const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::au_regression: return "au_regression";
    case TaskKind::au_detection: return "au_detection";
    case TaskKind::fer_classification: return "fer_classification";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "au_regression") return TaskKind::au_regression;
  if (s == "au_detection") return TaskKind::au_detection;
  if (s == "fer_classification") return TaskKind::fer_classification;
  throw ConfigError("unknown task kind '" + s + "'");
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (cfg.max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (cfg.early_stop_patience <= 0) throw ConfigError("early_stop_patience must be positive");
  if (cfg.max_epochs > 0 && cfg.early_stop_patience > cfg.max_epochs) {
    throw ConfigError("early_stop_patience must not exceed max_epochs");
  }
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) throw ConfigError("alpha/beta must be non-negative");
}

int effective_batch_size(const TrainConfig& cfg, std::size_t dataset_size) {
  if (cfg.batch_size == TrainConfig{}.batch_size && dataset_size < 1000) return 32;
  return cfg.batch_size;
}

void Dataset::validate() const {
  if (samples.empty()) throw DataError("dataset is empty");
  const auto kind = samples.front().target.kind;
  const std::size_t in_dim = samples.front().input.size();
  const std::size_t t_dim = samples.front().target.values.size();
  for (const auto& s : samples) {
    if (s.subject_id.empty()) throw DataError("dataset sample without subject_id");
    if (s.target.kind != kind) throw DataError("dataset mixes target kinds");
    if (s.input.size() != in_dim) throw DataError("dataset mixes input dimensions");
    if (s.target.values.size() != t_dim) throw DataError("dataset mixes target dimensions");
    s.target.validate();
  }
}

int Dataset::input_dim() const {
  if (samples.empty()) throw DataError("dataset is empty");
  return static_cast<int>(samples.front().input.size());
}

int Dataset::target_dim() const {
  if (samples.empty()) throw DataError("dataset is empty");
  return static_cast<int>(samples.front().target.values.size());
}

std::vector<std::vector<int>> make_batches(const Dataset& dataset, int batch_size,
                                           std::uint64_t seed, int epoch) {
  if (dataset.samples.empty()) throw DataError("make_batches: dataset is empty");
  if (batch_size <= 0) throw ConfigError("make_batches: batch_size must be positive");
  std::vector<int> order(dataset.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

bool early_stopping_update(EarlyStopState& state, double epoch_metric,
                           const model::ModelBundle& current, int epoch, int patience) {
  if (!std::isfinite(epoch_metric)) throw NumericError("early stopping metric is non-finite");
  if (epoch_metric > state.best_metric) {
    state.best_metric = epoch_metric;
    state.best_epoch = epoch;
    state.epochs_since_improvement = 0;
    state.best = current;
    state.has_best = true;
    return false;
  }
  state.epochs_since_improvement = epoch - state.best_epoch;
  return state.epochs_since_improvement >= patience;
}

namespace {

struct Batch {
  nn::Tensor inputs;
  nn::Tensor targets;
};

Batch assemble_batch(const Dataset& dataset, const std::vector<int>& idx) {
  const int b = static_cast<int>(idx.size());
  const int din = dataset.input_dim();
  const int dout = dataset.target_dim();
  Batch batch;
  batch.inputs = nn::Tensor::zeros({b, din});
  batch.targets = nn::Tensor::zeros({b, dout});
  for (int r = 0; r < b; ++r) {
    const Sample& s = dataset.samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
    std::copy(s.input.begin(), s.input.end(),
              batch.inputs.data.begin() + static_cast<std::ptrdiff_t>(r) * din);
    std::copy(s.target.values.begin(), s.target.values.end(),
              batch.targets.data.begin() + static_cast<std::ptrdiff_t>(r) * dout);
  }
  return batch;
}

losses::ScalarWithGrad task_loss(TaskKind task, const nn::Tensor& pred, const nn::Tensor& targets) {
  switch (task) {
    case TaskKind::au_regression: return losses::mse_task_loss(pred, targets);
    case TaskKind::au_detection: return losses::bce_logits_loss(pred, targets);
    case TaskKind::fer_classification: return losses::ce_task_loss(pred, targets);
  }
  throw ConfigError("unhandled task kind");
}

void check_model_data_dims(const model::ModelBundle& bundle, const Dataset& train_set,
                           const Dataset& val_set) {
  model::validate_bundle(bundle);
  if (bundle.encoder_spec.input_dim() != train_set.input_dim()) {
    throw ConfigError("encoder input dim " + std::to_string(bundle.encoder_spec.input_dim()) +
                      " does not match data dim " + std::to_string(train_set.input_dim()));
  }
  if (bundle.classifier_spec.output_dim() != train_set.target_dim()) {
    throw ConfigError("classifier output dim " + std::to_string(bundle.classifier_spec.output_dim()) +
                      " does not match target dim " + std::to_string(train_set.target_dim()));
  }
  if (val_set.input_dim() != train_set.input_dim() || val_set.target_dim() != train_set.target_dim()) {
    throw ConfigError("train/validation dimension mismatch");
  }
}

void scale_params(nn::ParamSet& params, double factor) {
  for (auto& t : params.tensors) {
    for (double& v : t.data) v *= factor;
  }
}

void add_params(nn::ParamSet& dst, const nn::ParamSet& src, double factor) {
  for (std::size_t i = 0; i < dst.count(); ++i) {
    for (std::size_t j = 0; j < dst.tensors[i].data.size(); ++j) {
      dst.tensors[i].data[j] += factor * src.tensors[i].data[j];
    }
  }
}

}  // namespace

double evaluate_metric(const model::ModelBundle& bundle, const Dataset& dataset, TaskKind task) {
  dataset.validate();
  const int n = static_cast<int>(dataset.samples.size());
  const int dout = dataset.target_dim();

  // Forward in fixed-size chunks; predictions land row-by-row.
  std::vector<double> preds(static_cast<std::size_t>(n) * dout);
  constexpr int kChunk = 256;
  std::vector<int> idx;
  for (int start = 0; start < n; start += kChunk) {
    idx.clear();
    const int end = std::min(n, start + kChunk);
    for (int i = start; i < end; ++i) idx.push_back(i);
    const Batch batch = assemble_batch(dataset, idx);
    const nn::Tensor features = nn::forward(bundle.encoder_params, bundle.encoder_spec, batch.inputs);
    const nn::Tensor out = nn::forward(bundle.classifier_params, bundle.classifier_spec, features);
    std::copy(out.data.begin(), out.data.end(),
              preds.begin() + static_cast<std::ptrdiff_t>(start) * dout);
  }

  switch (task) {
    case TaskKind::au_regression: {
      // Per-dimension PCC, skipping dimensions where it is undefined.
      double sum = 0.0;
      int valid = 0;
      std::vector<double> p(static_cast<std::size_t>(n)), t(static_cast<std::size_t>(n));
      for (int d = 0; d < dout; ++d) {
        for (int i = 0; i < n; ++i) {
          p[static_cast<std::size_t>(i)] = preds[static_cast<std::size_t>(i) * dout + d];
          t[static_cast<std::size_t>(i)] = dataset.samples[static_cast<std::size_t>(i)].target.values[static_cast<std::size_t>(d)];
        }
        try {
          sum += metrics::pcc(p, t);
          ++valid;
        } catch (const DataError&) {
          // constant column; excluded from the average
        }
      }
      return valid > 0 ? sum / valid : -1.0;
    }
    case TaskKind::au_detection: {
      double sum = 0.0;
      std::vector<double> probs(static_cast<std::size_t>(n));
      std::vector<int> labels(static_cast<std::size_t>(n));
      for (int d = 0; d < dout; ++d) {
        for (int i = 0; i < n; ++i) {
          const double z = preds[static_cast<std::size_t>(i) * dout + d];
          probs[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-z));
          labels[static_cast<std::size_t>(i)] = dataset.samples[static_cast<std::size_t>(i)]
                                                        .target.values[static_cast<std::size_t>(d)] > 0.5
                                                    ? 1
                                                    : 0;
        }
        sum += metrics::f1_binary(probs, labels);
      }
      return sum / dout;
    }
    case TaskKind::fer_classification: {
      std::vector<int> pred_labels(static_cast<std::size_t>(n));
      std::vector<int> true_labels(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int d = 1; d < dout; ++d) {
          if (preds[static_cast<std::size_t>(i) * dout + d] >
              preds[static_cast<std::size_t>(i) * dout + best]) {
            best = d;
          }
        }
        pred_labels[static_cast<std::size_t>(i)] = best;
        const auto& tv = dataset.samples[static_cast<std::size_t>(i)].target.values;
        true_labels[static_cast<std::size_t>(i)] =
            static_cast<int>(std::max_element(tv.begin(), tv.end()) - tv.begin());
      }
      return metrics::accuracy(pred_labels, true_labels);
    }
  }
  throw ConfigError("unhandled task kind");
}

TrainResult train_supervised(const model::ModelBundle& init, const Dataset& train_set,
                             const Dataset& val_set, const TrainConfig& cfg) {
  validate_config(cfg);
  train_set.validate();
  val_set.validate();
  check_model_data_dims(init, train_set, val_set);

  TrainResult result;
  result.model = init;
  if (cfg.max_epochs == 0) return result;

  model::ModelBundle model = init;
  auto enc_state = nn::OptimizerState::for_params(model.encoder_params, cfg.learning_rate, cfg.weight_decay);
  auto cls_state = nn::OptimizerState::for_params(model.classifier_params, cfg.learning_rate, cfg.weight_decay);
  EarlyStopState stopper;
  const int batch_size = effective_batch_size(cfg, train_set.samples.size());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto batches = make_batches(train_set, batch_size, cfg.seed, epoch - 1);
    double loss_sum = 0.0;
    std::size_t sample_count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch batch = assemble_batch(train_set, batches[bi]);
      nn::GradientTape enc_tape = nn::forward_tape(model.encoder_params, model.encoder_spec, batch.inputs);
      nn::GradientTape cls_tape = nn::forward_tape(model.classifier_params, model.classifier_spec, enc_tape.output);
      const auto loss = task_loss(cfg.task, cls_tape.output, batch.targets);
      if (!std::isfinite(loss.value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi));
      }
      loss_sum += loss.value * static_cast<double>(batches[bi].size());
      sample_count += batches[bi].size();
      nn::Gradients cls_grads = nn::backward(cls_tape, loss.grad);
      nn::Gradients enc_grads = nn::backward(enc_tape, cls_grads.input);
      nn::adamw_step(cls_state, model.classifier_params, cls_grads);
      nn::adamw_step(enc_state, model.encoder_params, enc_grads);
    }
    const double mean_loss = loss_sum / static_cast<double>(sample_count);
    const double val_metric = evaluate_metric(model, val_set, cfg.task);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = losses::total_loss(0.0, mean_loss, 0.0, 1.0, 1.0);
    rec.val_metric = val_metric;
    result.history.push_back(rec);

    if (early_stopping_update(stopper, val_metric, model, epoch, cfg.early_stop_patience)) break;
  }

  result.model = stopper.has_best ? stopper.best : model;
  return result;
}

TrainResult distill(const model::ModelBundle& teacher, const model::ModelBundle& student_init,
                    const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
  validate_config(cfg);
  train_set.validate();
  val_set.validate();
  model::validate_bundle(teacher);
  check_model_data_dims(student_init, train_set, val_set);

  // Configuration checks up front, before any training step.
  if (teacher.encoder_spec.input_dim() != student_init.encoder_spec.input_dim()) {
    throw ConfigError("distill: teacher and student encoder input dims differ");
  }
  if (teacher.classifier_spec.output_dim() != student_init.classifier_spec.output_dim()) {
    throw ConfigError("distill: teacher and student classifier output dims differ");
  }
  if (teacher.meta.head != student_init.meta.head) {
    throw ConfigError("distill: teacher and student head kinds differ");
  }
  const int teacher_fdim = teacher.meta.feature_dim;
  const int student_fdim = student_init.meta.feature_dim;
  if (teacher_fdim < 1 || student_fdim < 1) {
    throw ConfigError("distill: feature dimensions must be >= 1");
  }

  TrainResult result;
  result.model = student_init;
  if (cfg.max_epochs == 0) return result;

  model::ModelBundle student = student_init;
  auto enc_state = nn::OptimizerState::for_params(student.encoder_params, cfg.learning_rate, cfg.weight_decay);
  auto cls_state = nn::OptimizerState::for_params(student.classifier_params, cfg.learning_rate, cfg.weight_decay);
  EarlyStopState stopper;
  const int batch_size = effective_batch_size(cfg, train_set.samples.size());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto batches = make_batches(train_set, batch_size, cfg.seed, epoch - 1);
    double fm_sum = 0.0, task_sum = 0.0, kl_sum = 0.0;
    std::size_t sample_count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch batch = assemble_batch(train_set, batches[bi]);
      const double bsz = static_cast<double>(batches[bi].size());

      // Teacher side, frozen: no tapes, no gradients kept.
      const nn::Tensor f_t = nn::forward(teacher.encoder_params, teacher.encoder_spec, batch.inputs);
      const nn::Tensor y_t = nn::forward(teacher.classifier_params, teacher.classifier_spec, f_t);

      // Student side.
      nn::GradientTape enc_tape = nn::forward_tape(student.encoder_params, student.encoder_spec, batch.inputs);
      const nn::Tensor& f_s = enc_tape.output;
      const nn::Tensor interp = losses::interpolate_rows(f_s, teacher_fdim);
      nn::GradientTape ct_tape = nn::forward_tape(teacher.classifier_params, teacher.classifier_spec, interp);
      nn::GradientTape cs_tape = nn::forward_tape(student.classifier_params, student.classifier_spec, f_s);

      const auto fm = losses::mse_task_loss(interp, f_t);      // grad w.r.t. interp
      const auto task = task_loss(cfg.task, cs_tape.output, batch.targets);
      const auto kl = losses::kl_distill_loss(y_t, ct_tape.output);
      const auto breakdown = losses::total_loss(fm.value, task.value, kl.value, cfg.alpha, cfg.beta);
      if (!std::isfinite(breakdown.total)) {
        throw NumericError("non-finite distillation loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(bi));
      }
      fm_sum += fm.value * bsz;
      task_sum += task.value * bsz;
      kl_sum += kl.value * bsz;
      sample_count += batches[bi].size();

      // KL gradients route through the frozen teacher classifier; its
      // parameter gradients are discarded, only the input gradient flows on.
      nn::Gradients ct_grads = nn::backward(ct_tape, kl.grad);
      nn::Tensor d_interp = fm.grad;
      for (std::size_t i = 0; i < d_interp.data.size(); ++i) {
        d_interp.data[i] += cfg.beta * ct_grads.input.data[i];
      }
      nn::Tensor d_fs = losses::interpolate_rows_backward(d_interp, student_fdim);

      nn::Gradients cs_grads = nn::backward(cs_tape, task.grad);
      for (std::size_t i = 0; i < d_fs.data.size(); ++i) {
        d_fs.data[i] += cfg.alpha * cs_grads.input.data[i];
      }
      scale_params(cs_grads.params, cfg.alpha);

      nn::Gradients enc_grads = nn::backward(enc_tape, d_fs);
      nn::adamw_step(cls_state, student.classifier_params, cs_grads);
      nn::adamw_step(enc_state, student.encoder_params, enc_grads);
    }

    const double n = static_cast<double>(sample_count);
    const double val_metric = evaluate_metric(student, val_set, cfg.task);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = losses::total_loss(fm_sum / n, task_sum / n, kl_sum / n, cfg.alpha, cfg.beta);
    rec.val_metric = val_metric;
    result.history.push_back(rec);

    if (early_stopping_update(stopper, val_metric, student, epoch, cfg.early_stop_patience)) break;
  }

  result.model = stopper.has_best ? stopper.best : student;
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,l_fm,l_task,l_kl,total,val_metric\n";
  for (const auto& r : history) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.loss.l_fm,
                  r.loss.l_task, r.loss.l_kl, r.loss.total, r.val_metric);
    out << buf;
  }
  return out.str();
}

std::pair<Dataset, Dataset> subject_holdout(const Dataset& all, double val_fraction,
                                            std::uint64_t seed) {
  all.validate();
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must be in (0, 1)");
  }
  std::vector<std::string> subjects;
  for (const auto& s : all.samples) subjects.push_back(s.subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 2) throw DataError("subject_holdout: need at least 2 subjects");

  Rng rng(seed);
  rng.shuffle(subjects);
  const std::size_t val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(subjects.size()))));
  std::set<std::string> val_subjects(subjects.begin(),
                                     subjects.begin() + static_cast<std::ptrdiff_t>(
                                                            std::min(val_count, subjects.size() - 1)));

  Dataset train_out;
  train_out.split = SplitTag::train;
  Dataset val_out;
  val_out.split = SplitTag::validation;
  for (const auto& s : all.samples) {
    (val_subjects.count(s.subject_id) != 0 ? val_out : train_out).samples.push_back(s);
  }
  return {std::move(train_out), std::move(val_out)};
}

}  // namespace facet::train
