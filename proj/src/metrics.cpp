#include "facet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "facet/rng.hpp"

#include "json.hpp"

namespace facet::metrics {

double pcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pcc: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw DataError("pcc: need at least 2 samples");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DataError("pcc: undefined correlation for a constant input vector");
  }
  double r = sxy / std::sqrt(sxx * syy);
  // Rounding can push |r| a hair past 1.
  r = r > 1.0 ? 1.0 : (r < -1.0 ? -1.0 : r);
  return r;
}

std::pair<double, double> error_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DataError("error_metrics: length mismatch");
  if (pred.empty()) throw DataError("error_metrics: empty input");
  double mae = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    mae += std::fabs(d);
    mse += d * d;
  }
  const double n = static_cast<double>(pred.size());
  return {mae / n, mse / n};
}

double f1_binary(std::span<const double> pred_probs, std::span<const int> labels, double threshold) {
  if (pred_probs.size() != labels.size()) throw DataError("f1_binary: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred_probs.size(); ++i) {
    const double p = pred_probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("f1_binary: probability outside [0, 1]");
    if (labels[i] != 0 && labels[i] != 1) throw DataError("f1_binary: labels must be 0/1");
    const bool pos = p >= threshold;
    if (pos && labels[i] == 1) ++tp;
    if (pos && labels[i] == 0) ++fp;
    if (!pos && labels[i] == 1) ++fn;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  if (denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(tp) / denom;
}

double accuracy(std::span<const int> pred_labels, std::span<const int> true_labels) {
  if (pred_labels.size() != true_labels.size()) throw DataError("accuracy: length mismatch");
  if (pred_labels.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred_labels.size(); ++i) {
    if (pred_labels[i] == true_labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred_labels.size());
}

std::vector<int> FoldSplit::fold_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [subject, fold] : assignments) {
    (void)subject;
    sizes[static_cast<std::size_t>(fold)] += 1;
  }
  return sizes;
}

FoldSplit kfold_split(const std::vector<std::string>& subject_ids, int k, std::uint64_t seed) {
  std::vector<std::string> subjects(subject_ids);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (k < 1) throw DataError("kfold_split: k must be >= 1");
  if (static_cast<std::size_t>(k) > subjects.size()) {
    throw DataError("kfold_split: k (" + std::to_string(k) + ") exceeds subject count (" +
                    std::to_string(subjects.size()) + ")");
  }
  Rng rng(seed);
  rng.shuffle(subjects);
  FoldSplit split;
  split.k = k;
  split.seed = seed;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    split.assignments[subjects[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return split;
}

void MetricsReport::refresh_averages() {
  if (!per_au_pcc.empty()) {
    double s = 0.0;
    for (const auto& [au, v] : per_au_pcc) {
      (void)au;
      s += v;
    }
    avg_pcc = s / static_cast<double>(per_au_pcc.size());
  }
  if (!per_au_f1.empty()) {
    double s = 0.0;
    for (const auto& [au, v] : per_au_f1) {
      (void)au;
      s += v;
    }
    avg_f1 = s / static_cast<double>(per_au_f1.size());
  }
}

namespace {

std::set<int> key_set(const std::map<int, double>& m) {
  std::set<int> keys;
  for (const auto& [k, v] : m) {
    (void)v;
    keys.insert(k);
  }
  return keys;
}

}  // namespace

MetricsReport aggregate_report(const std::vector<MetricsReport>& per_fold) {
  if (per_fold.empty()) throw DataError("aggregate_report: no fold reports");
  const auto& first = per_fold.front();
  const auto pcc_keys = key_set(first.per_au_pcc);
  const auto f1_keys = key_set(first.per_au_f1);
  for (const auto& r : per_fold) {
    if (key_set(r.per_au_pcc) != pcc_keys || key_set(r.per_au_f1) != f1_keys ||
        r.mae.has_value() != first.mae.has_value() || r.mse.has_value() != first.mse.has_value() ||
        r.accuracy.has_value() != first.accuracy.has_value()) {
      throw DataError("aggregate_report: heterogeneous metric sets across folds");
    }
  }
  const double nf = static_cast<double>(per_fold.size());
  MetricsReport agg;
  agg.fold_id = -1;
  for (int au : pcc_keys) {
    double s = 0.0;
    for (const auto& r : per_fold) s += r.per_au_pcc.at(au);
    agg.per_au_pcc[au] = s / nf;
  }
  for (int au : f1_keys) {
    double s = 0.0;
    for (const auto& r : per_fold) s += r.per_au_f1.at(au);
    agg.per_au_f1[au] = s / nf;
  }
  const auto mean_of = [&](auto getter) -> std::optional<double> {
    if (!getter(first).has_value()) return std::nullopt;
    double s = 0.0;
    for (const auto& r : per_fold) s += *getter(r);
    return s / nf;
  };
  agg.mae = mean_of([](const MetricsReport& r) { return r.mae; });
  agg.mse = mean_of([](const MetricsReport& r) { return r.mse; });
  agg.accuracy = mean_of([](const MetricsReport& r) { return r.accuracy; });
  agg.refresh_averages();
  return agg;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["fold_id"] = report.fold_id;
  if (!report.per_au_pcc.empty()) {
    nlohmann::json m;
    for (const auto& [au, v] : report.per_au_pcc) m["AU" + std::to_string(au)] = v;
    j["per_au_pcc"] = m;
  }
  if (report.avg_pcc) j["avg_pcc"] = *report.avg_pcc;
  if (report.mae) j["mae"] = *report.mae;
  if (report.mse) j["mse"] = *report.mse;
  if (!report.per_au_f1.empty()) {
    nlohmann::json m;
    for (const auto& [au, v] : report.per_au_f1) m["AU" + std::to_string(au)] = v;
    j["per_au_f1"] = m;
  }
  if (report.avg_f1) j["avg_f1"] = *report.avg_f1;
  if (report.accuracy) j["accuracy"] = *report.accuracy;
  return j.dump(2);
}

std::string to_table_csv(const MetricsReport& report) {
  std::ostringstream out;
  const auto row = [&out](const char* label, const std::map<int, double>& per_au, double avg,
                          double scale) {
    out << label;
    for (const auto& [au, v] : per_au) {
      (void)au;
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.4f", v * scale);
      out << buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), ",%.4f", avg * scale);
    out << buf << "\n";
  };
  const auto header = [&out](const char* label, const std::map<int, double>& per_au) {
    out << label;
    for (const auto& [au, v] : per_au) {
      (void)v;
      out << ",AU" << au;
    }
    out << ",Avg\n";
  };
  if (!report.per_au_pcc.empty()) {
    header("metric", report.per_au_pcc);
    row("pcc", report.per_au_pcc, report.avg_pcc.value_or(0.0), 1.0);
  }
  if (!report.per_au_f1.empty()) {
    header("metric", report.per_au_f1);
    // F1 rendered as percentages, table style.
    row("f1", report.per_au_f1, report.avg_f1.value_or(0.0), 100.0);
  }
  if (report.accuracy) {
    out << "metric,Value\naccuracy," << *report.accuracy << "\n";
  }
  return out.str();
}

}  // namespace facet::metrics
