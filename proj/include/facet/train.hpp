#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "facet/bundle.hpp"
#include "facet/losses.hpp"

namespace facet::train {

enum class TaskKind { au_regression, au_detection, fer_classification };
const char* task_kind_name(TaskKind k);
TaskKind parse_task_kind(const std::string& s);

struct TrainConfig {
  double learning_rate = 3e-5;
  double weight_decay = 1e-4;
  int batch_size = 128;
  int max_epochs = 20;
  int early_stop_patience = 5;
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t seed = 0;
  TaskKind task = TaskKind::au_regression;
};

void validate_config(const TrainConfig& cfg);

// 128 is a full-scale figure; desk-scale datasets (< 1000 samples) drop to 32
// unless the config was explicitly overridden away from the default.
int effective_batch_size(const TrainConfig& cfg, std::size_t dataset_size);

struct Sample {
  std::vector<double> input;
  losses::TaskTarget target;
  std::string subject_id;
};

enum class SplitTag { train, validation, test };

struct Dataset {
  std::vector<Sample> samples;
  SplitTag split = SplitTag::train;

  void validate() const;  // non-empty subjects, homogeneous targets and dims
  int input_dim() const;
  int target_dim() const;
};

// Deterministic shuffle keyed by (seed, epoch); the final short batch is kept.
std::vector<std::vector<int>> make_batches(const Dataset& dataset, int batch_size,
                                           std::uint64_t seed, int epoch);

struct EarlyStopState {
  double best_metric = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epochs_since_improvement = 0;
  model::ModelBundle best;
  bool has_best = false;
};

// Strict improvement snapshots and resets the counter; ties count as
// non-improvement. Returns true when the counter reaches `patience`.
bool early_stopping_update(EarlyStopState& state, double epoch_metric,
                           const model::ModelBundle& current, int epoch, int patience);

struct EpochRecord {
  int epoch = 0;  // 1-based
  losses::LossBreakdown loss;
  double val_metric = 0.0;
};

struct TrainResult {
  model::ModelBundle model;  // best-validation-epoch snapshot
  std::vector<EpochRecord> history;
};

// Supervised training with the task loss picked by cfg.task; validation
// metric evaluated after every epoch (PCC / F1 / accuracy).
TrainResult train_supervised(const model::ModelBundle& init, const Dataset& train_set,
                             const Dataset& val_set, const TrainConfig& cfg);

// Frozen-teacher feature-wise distillation. Per batch:
//   f_T = E_T(x), f_S = E_S(x), y_T = C_T(f_T), y_S = C_T(I(f_S)),
//   task prediction = C_S(f_S),
// optimizing l_fm + alpha*l_task + beta*l_kl over E_S and C_S only.
TrainResult distill(const model::ModelBundle& teacher, const model::ModelBundle& student_init,
                    const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg);

// Task-specific validation metric: avg PCC (au_regression), avg F1
// (au_detection), accuracy (fer). Higher is better for all three.
double evaluate_metric(const model::ModelBundle& bundle, const Dataset& dataset, TaskKind task);

// `epoch,l_fm,l_task,l_kl,total,val_metric` rows, LF endings.
std::string history_csv(const std::vector<EpochRecord>& history);

// Subject-disjoint train/validation split; the validation part takes
// ceil(val_fraction * #subjects) subjects after a seeded shuffle.
std::pair<Dataset, Dataset> subject_holdout(const Dataset& all, double val_fraction,
                                            std::uint64_t seed);

}  // namespace facet::train
