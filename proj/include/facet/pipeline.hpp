#pragma once

#include <array>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "facet/align.hpp"
#include "facet/bundle.hpp"

namespace facet::pipeline {

// Output schema AU sets: intensity (R) and detection (D) rows.
inline constexpr std::array<int, 12> kIntensityAUs{1, 2, 4, 5, 6, 9, 12, 15, 17, 20, 25, 26};
inline constexpr std::array<int, 5> kDetectionAUs{7, 10, 14, 23, 24};

struct AURecord {
  std::map<int, double> intensities;  // AU -> [0, 5]
  std::map<int, double> detections;   // AU -> probability
  int frame = 0;
};

enum class ExpressionClassSet { affectnet8, rafdb7 };

struct ExpressionRecord {
  int label = 0;
  std::string label_name;
  std::vector<double> probabilities;
  ExpressionClassSet class_set = ExpressionClassSet::affectnet8;
  int frame = 0;
};

const std::vector<std::string>& expression_labels(ExpressionClassSet set);

// Bundle weights down-converted to f32 once; inference runs entirely in
// 32-bit so results are invariant under a save/load round trip.
struct CompiledLayer {
  nn::LayerKind kind;
  int in_dim = 0;
  int out_dim = 0;
  bool has_bias = false;
  std::vector<float> weight;  // in x out, row-major
  std::vector<float> bias;
};

struct CompiledModel {
  std::vector<CompiledLayer> encoder;
  std::vector<CompiledLayer> classifier;
  model::HeadKind head;
  int class_count = 0;
  int input_dim = 0;

  std::vector<float> run(const std::vector<float>& input) const;
};

CompiledModel compile(const model::ModelBundle& bundle);

// Combined 17-output AU head: first 12 outputs clamped to [0,5] as
// intensities, last 5 through sigmoid as detection probabilities.
AURecord predict_au(const align::AlignedFace& face, const model::ModelBundle& bundle);
ExpressionRecord predict_fer(const align::AlignedFace& face, const model::ModelBundle& bundle);

// Frame-indexed sources. `landmarks` returns nullptr for frames without a
// detected face; those degrade to success=0 rows.
struct FrameSources {
  std::function<int()> frame_count;
  std::function<align::ImageF32(int)> image;
  std::function<const align::LandmarkSet*(int)> landmarks;
};

FrameSources preloaded_sources(const std::vector<align::ImageF32>* images,
                               const std::map<int, align::LandmarkSet>* landmarks);

struct PipelineOptions {
  int workers = 1;
  int warp_size = 256;
  int crop_size = 224;
};

// Aligns, crops and runs every enabled head per frame, streaming one CSV row
// per frame in strictly increasing frame order regardless of worker count.
// Returns the number of data rows written.
int run_pipeline(const FrameSources& sources, const std::vector<const model::ModelBundle*>& bundles,
                 std::ostream& csv_out, const PipelineOptions& opt = {});

std::string csv_header(const std::vector<const model::ModelBundle*>& bundles);

// An ostream that discards everything; the benchmark's output sink.
std::ostream& null_sink();

}  // namespace facet::pipeline
