#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facet/errors.hpp"

namespace facet::metrics {

// Sample Pearson correlation in [-1, 1]. A constant input vector has no
// defined correlation and raises DataError rather than returning 0.
double pcc(std::span<const double> x, std::span<const double> y);

// {mean |pred - truth|, mean (pred - truth)^2}
std::pair<double, double> error_metrics(std::span<const double> pred, std::span<const double> truth);

// F1 after thresholding probabilities (>= threshold counts positive).
// Returns 0 when precision + recall is 0.
double f1_binary(std::span<const double> pred_probs, std::span<const int> labels,
                 double threshold = 0.5);

double accuracy(std::span<const int> pred_labels, std::span<const int> true_labels);

struct FoldSplit {
  int k = 0;
  std::map<std::string, int> assignments;  // subject -> fold
  std::uint64_t seed = 0;

  std::vector<int> fold_sizes() const;
};

// Subject-disjoint k-fold: seeded shuffle of the (sorted, deduplicated)
// subject list, then round-robin assignment. Sizes balance within 1.
FoldSplit kfold_split(const std::vector<std::string>& subject_ids, int k, std::uint64_t seed);

struct MetricsReport {
  std::map<int, double> per_au_pcc;
  std::optional<double> avg_pcc;
  std::optional<double> mae;
  std::optional<double> mse;
  std::map<int, double> per_au_f1;  // stored as fractions; rendered x100
  std::optional<double> avg_f1;
  std::optional<double> accuracy;
  int fold_id = -1;

  // Recomputes avg_pcc / avg_f1 from the per-AU maps.
  void refresh_averages();
};

// Per-AU means across folds, then average columns recomputed from the
// averaged per-AU values. Requires homogeneous metric sets.
MetricsReport aggregate_report(const std::vector<MetricsReport>& per_fold);

std::string to_json(const MetricsReport& report);
// Table-shaped rows: metric label, one column per AU, then Avg.
std::string to_table_csv(const MetricsReport& report);

}  // namespace facet::metrics
