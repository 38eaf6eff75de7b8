#pragma once

#include <string>

#include "facet/train.hpp"

namespace facet::data {

// Dataset directory layout:
//   annotations.csv                 target + subject per frame
//   aligned/frame_%06d.ften         input tensors (any rank, flattened)
// or, when no aligned/ directory exists:
//   images/frame_%06d.ppm           raw frames
//   landmarks.csv                   five-point landmark rows
// in which case frames are aligned on load (center crop, no augmentation).
//
// annotations.csv headers by task:
//   au_regression: frame,subject,AU01,AU02,AU04,AU05,AU06,AU09,AU12,AU15,AU17,AU20,AU25,AU26
//   au_detection:  frame,subject,AU07,AU10,AU14,AU23,AU24
//   fer:           frame,subject,expression
train::Dataset load_dataset(const std::string& dir, train::TaskKind task);

// Writes annotations.csv + aligned/ tensors (f32).
void write_dataset(const std::string& dir, const train::Dataset& dataset, train::TaskKind task);

const char* annotations_header(train::TaskKind task);

}  // namespace facet::data
