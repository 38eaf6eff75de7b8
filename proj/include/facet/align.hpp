#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "facet/errors.hpp"

namespace facet::align {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

enum class LandmarkSchema { five_point, custom };

// Five-point order is fixed: left eye center, right eye center, nose tip,
// left mouth corner, right mouth corner.
struct LandmarkSet {
  std::vector<Point2> points;
  LandmarkSchema schema = LandmarkSchema::five_point;
  int source_frame = 0;
};

// CSV schema: header `frame,x0,y0,x1,y1,x2,y2,x3,y3,x4,y4`, one row per
// detected face, LF endings. Returns sets ordered by frame index.
std::vector<LandmarkSet> parse_landmarks(const std::string& path);
const char* landmark_csv_header();

// Rotation + uniform scale + translation.
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;

  // Row-major 2x3 affine: [a -b tx; b a ty] with a = s*cos, b = s*sin.
  std::array<double, 6> matrix() const;
  SimilarityTransform inverse() const;
  Point2 apply(Point2 p) const;
  static SimilarityTransform identity() { return {}; }
};

// Least-squares similarity fit (Procrustes, reflection disallowed): the
// global minimizer of sum ||s*R*p + t - q||^2 over scale, rotation and
// translation. Throws GeometryError for degenerate configurations (source
// spread below 1e-6 px, or zero optimal scale).
SimilarityTransform estimate_similarity(const LandmarkSet& src, const LandmarkSet& dst);

// Fixed five-point face template at 112x112 reference scale; other sizes
// scale linearly.
LandmarkSet canonical_template(int out_size);

// Planar float image, values in [0, 1]. Plane-major layout: data[c*H*W + y*W + x].
struct ImageF32 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  static ImageF32 create(int width, int height, int channels, float fill = 0.0f);
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
};

enum class CropMode { center, random };
enum class FlipMode { none, random };

struct WarpOptions {
  int out_size = 256;
  CropMode crop = CropMode::center;
  int crop_size = 224;
  FlipMode flip = FlipMode::none;
  std::uint64_t seed = 0;
};

struct AlignedFace {
  ImageF32 pixels;
  SimilarityTransform transform_used;
  int warp_size = 256;
  int crop_size = 224;
};

// Bilinear warp of `image` through `transform` (image -> canvas coordinates)
// onto an out_size canvas, zero fill outside the source, then crop and
// optional horizontal flip. Deterministic for a fixed seed.
AlignedFace warp_and_crop(const ImageF32& image, const SimilarityTransform& transform,
                          const WarpOptions& opt = {});

// Planar pixels flattened (c, y, x) as doubles; training-side input vector.
std::vector<double> flatten(const ImageF32& image);

}  // namespace facet::align
