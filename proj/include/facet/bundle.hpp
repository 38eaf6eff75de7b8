#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facet/nn.hpp"

namespace facet::model {

// au            : combined 17-output head (12 intensity + 5 detection)
// au_intensity  : 12 intensity outputs
// au_detection  : 5 detection outputs
// fer           : class_count outputs (7 or 8)
enum class HeadKind { au, au_intensity, au_detection, fer };

const char* head_kind_name(HeadKind k);
HeadKind parse_head_kind(const std::string& s);
int head_output_dim(HeadKind k, int class_count);

struct BundleMeta {
  int schema_version = 1;
  HeadKind head = HeadKind::au_intensity;
  int feature_dim = 0;
  int class_count = 0;  // fer only
  std::string provenance;
};

// Encoder + classifier with weights: the unit of training, freezing,
// serialization and inference. Parameters live as f64 in memory; the file
// format stores f32, so save -> load is weight-exact at 32-bit precision.
struct ModelBundle {
  nn::NetworkSpec encoder_spec;
  nn::ParamSet encoder_params;
  nn::NetworkSpec classifier_spec;
  nn::ParamSet classifier_params;
  BundleMeta meta;
};

// Checks the dimension chains plus: encoder output == feature_dim ==
// classifier input, and the head's declared output dimension.
void validate_bundle(const ModelBundle& bundle);

// File layout: magic "LFMB", u32 LE version, u64 LE metadata length, UTF-8
// JSON metadata (specs, head kind, ordered blob manifest), then the f32 LE
// weight blobs in manifest order.
std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes, const std::string& origin);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

// FNV-1a over the serialized bytes; the frozen-teacher invariant check.
std::uint64_t bundle_hash(const ModelBundle& bundle);

}  // namespace facet::model
