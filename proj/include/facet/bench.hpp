#pragma once

#include <functional>
#include <string>
#include <vector>

#include "facet/pipeline.hpp"

namespace facet::bench {

struct BenchReport {
  std::vector<double> rounds;  // seconds per timed round
  int image_count = 0;
  double avg_seconds = 0.0;
  double std_seconds = 0.0;  // sample (n-1) standard deviation
  double fps = 0.0;          // image_count / unrounded avg
  std::string config;
  bool preloaded = true;
  std::string backend;
};

// avg/std/fps per the BenchReport invariants; a single round reports std 0.
BenchReport summarize_durations(const std::vector<double>& durations, int image_count);

// Monotonic seconds.
using Clock = std::function<double()>;
Clock monotonic_clock();
// Returns the scripted timestamps one per call; throws when exhausted.
Clock scripted_clock(std::vector<double> timestamps);

struct BenchmarkSetup {
  pipeline::FrameSources sources;
  std::vector<const model::ModelBundle*> bundles;
  pipeline::PipelineOptions pipeline_options;
  int rounds = 5;
  bool preloaded = true;  // stamped into the report
  std::string description;
};

// One unmeasured warm-up round, then `rounds` timed rounds, each pushing the
// full image list through run_pipeline into a null sink.
BenchReport run_benchmark(const BenchmarkSetup& setup, Clock clock = monotonic_clock());

std::string to_json(const BenchReport& report);
// Columns in efficiency-table order: Avg, Std, FPS.
std::string table_row(const BenchReport& report);

}  // namespace facet::bench
