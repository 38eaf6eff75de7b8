#include "facet/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>

#include "facet/kernels/backend.hpp"

#include "json.hpp"

namespace facet::bench {

BenchReport summarize_durations(const std::vector<double>& durations, int image_count) {
  if (durations.empty()) throw DataError("summarize_durations: need at least one duration");
  if (image_count <= 0) throw DataError("summarize_durations: image_count must be positive");
  for (double d : durations) {
    if (!(d > 0.0)) throw DataError("summarize_durations: non-positive duration");
  }
  BenchReport r;
  r.rounds = durations;
  r.image_count = image_count;
  double sum = 0.0;
  for (double d : durations) sum += d;
  r.avg_seconds = sum / static_cast<double>(durations.size());
  if (durations.size() > 1) {
    double ss = 0.0;
    for (double d : durations) ss += (d - r.avg_seconds) * (d - r.avg_seconds);
    r.std_seconds = std::sqrt(ss / static_cast<double>(durations.size() - 1));
  }
  r.fps = static_cast<double>(image_count) / r.avg_seconds;
  r.backend = kernels::name(kernels::active());
  return r;
}

Clock monotonic_clock() {
  return [] {
    const auto now = std::chrono::steady_clock::now().time_since_epoch();
    return std::chrono::duration<double>(now).count();
  };
}

Clock scripted_clock(std::vector<double> timestamps) {
  auto state = std::make_shared<std::pair<std::vector<double>, std::size_t>>(std::move(timestamps), 0);
  return [state]() -> double {
    if (state->second >= state->first.size()) {
      throw DataError("scripted clock exhausted after " + std::to_string(state->second) + " reads");
    }
    return state->first[state->second++];
  };
}

BenchReport run_benchmark(const BenchmarkSetup& setup, Clock clock) {
  if (setup.rounds < 1) throw ConfigError("run_benchmark: rounds must be >= 1");
  const int image_count = setup.sources.frame_count();
  if (image_count < 1) throw DataError("run_benchmark: no images");

  const auto run_round = [&](int round_index) {
    try {
      pipeline::run_pipeline(setup.sources, setup.bundles, pipeline::null_sink(),
                             setup.pipeline_options);
    } catch (const Error& e) {
      throw Error(e.category(), "benchmark round " + std::to_string(round_index) + ": " + e.what());
    }
  };

  // Warm-up round, excluded from the stats.
  run_round(0);

  std::vector<double> durations;
  durations.reserve(static_cast<std::size_t>(setup.rounds));
  for (int r = 1; r <= setup.rounds; ++r) {
    const double t0 = clock();
    run_round(r);
    const double t1 = clock();
    durations.push_back(t1 - t0);
  }

  BenchReport report = summarize_durations(durations, image_count);
  report.config = setup.description;
  report.preloaded = setup.preloaded;
  return report;
}

std::string to_json(const BenchReport& report) {
  nlohmann::json j;
  j["rounds"] = report.rounds;
  j["image_count"] = report.image_count;
  j["avg_seconds"] = report.avg_seconds;
  j["std_seconds"] = report.std_seconds;
  j["fps"] = report.fps;
  j["config"] = report.config;
  j["preloaded"] = report.preloaded;
  j["backend"] = report.backend;
  return j.dump(2);
}

std::string table_row(const BenchReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-40s %8.2f %8.2f %8.2f", report.config.c_str(),
                report.avg_seconds, report.std_seconds, report.fps);
  return buf;
}

}  // namespace facet::bench
