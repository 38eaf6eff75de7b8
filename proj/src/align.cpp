#include "facet/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "facet/kernels/kernels.hpp"
#include "facet/rng.hpp"

namespace facet::align {

namespace {

// The de-facto standard five-point template at 112x112.
constexpr std::array<Point2, 5> kTemplate112 = {{{38.2946, 51.6963},
                                                 {73.5318, 51.5014},
                                                 {56.0252, 71.7366},
                                                 {41.5493, 92.3655},
                                                 {70.7299, 92.2041}}};

constexpr double kSpreadEpsilon = 1e-6;

}  // namespace

const char* landmark_csv_header() { return "frame,x0,y0,x1,y1,x2,y2,x3,y3,x4,y4"; }

std::vector<LandmarkSet> parse_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmark file: " + path);

  std::vector<LandmarkSet> out;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != landmark_csv_header()) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected header '" +
                         landmark_csv_header() + "'");
      }
      saw_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 11 fields, got " +
                       std::to_string(fields.size()));
    }
    LandmarkSet set;
    set.schema = LandmarkSchema::five_point;
    const auto parse_num = [&](const std::string& s, const char* what) -> double {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &pos);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
      }
      if (pos != s.size()) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": non-finite " + what);
      }
      return v;
    };
    set.source_frame = static_cast<int>(parse_num(fields[0], "frame"));
    for (int p = 0; p < 5; ++p) {
      Point2 pt;
      pt.x = parse_num(fields[1 + 2 * p], "x");
      pt.y = parse_num(fields[2 + 2 * p], "y");
      set.points.push_back(pt);
    }
    out.push_back(std::move(set));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LandmarkSet& a, const LandmarkSet& b) { return a.source_frame < b.source_frame; });
  return out;
}

std::array<double, 6> SimilarityTransform::matrix() const {
  const double a = scale * std::cos(rotation);
  const double b = scale * std::sin(rotation);
  return {a, -b, tx, b, a, ty};
}

SimilarityTransform SimilarityTransform::inverse() const {
  if (scale <= 0.0) throw GeometryError("cannot invert a transform with non-positive scale");
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = -rotation;
  // t' = -1/s * R(-r) * t
  const double c = std::cos(-rotation);
  const double s = std::sin(-rotation);
  inv.tx = -inv.scale * (c * tx - s * ty);
  inv.ty = -inv.scale * (s * tx + c * ty);
  return inv;
}

Point2 SimilarityTransform::apply(Point2 p) const {
  const auto m = matrix();
  return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
}

SimilarityTransform estimate_similarity(const LandmarkSet& src, const LandmarkSet& dst) {
  if (src.points.size() != dst.points.size() || src.schema != dst.schema) {
    throw DataError("estimate_similarity: point count or schema mismatch");
  }
  const std::size_t n = src.points.size();
  if (n < 3) throw DataError("estimate_similarity: need at least 3 points");

  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = src.points[i].x - src.points[j].x;
      const double dy = src.points[i].y - src.points[j].y;
      spread = std::max(spread, std::hypot(dx, dy));
    }
  }
  if (spread < kSpreadEpsilon) {
    throw GeometryError("estimate_similarity: source points are degenerate (spread " +
                        std::to_string(spread) + " px)");
  }

  Point2 mean_s{0, 0};
  Point2 mean_d{0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    mean_s.x += src.points[i].x;
    mean_s.y += src.points[i].y;
    mean_d.x += dst.points[i].x;
    mean_d.y += dst.points[i].y;
  }
  mean_s.x /= static_cast<double>(n);
  mean_s.y /= static_cast<double>(n);
  mean_d.x /= static_cast<double>(n);
  mean_d.y /= static_cast<double>(n);

  // Closed-form 2-D similarity Procrustes with det(R) = +1:
  //   rotation = atan2(sum(xs*yd - ys*xd), sum(xs*xd + ys*yd))
  //   scale    = |(a, b)| / sum(|p|^2)
  double a = 0.0;
  double b = 0.0;
  double norm_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xs = src.points[i].x - mean_s.x;
    const double ys = src.points[i].y - mean_s.y;
    const double xd = dst.points[i].x - mean_d.x;
    const double yd = dst.points[i].y - mean_d.y;
    a += xs * xd + ys * yd;
    b += xs * yd - ys * xd;
    norm_s += xs * xs + ys * ys;
  }
  const double mag = std::hypot(a, b);
  if (norm_s <= 0.0 || mag <= 0.0) {
    throw GeometryError("estimate_similarity: singular covariance");
  }

  SimilarityTransform t;
  t.rotation = std::atan2(b, a);
  t.scale = mag / norm_s;
  const double c = std::cos(t.rotation);
  const double s = std::sin(t.rotation);
  t.tx = mean_d.x - t.scale * (c * mean_s.x - s * mean_s.y);
  t.ty = mean_d.y - t.scale * (s * mean_s.x + c * mean_s.y);
  return t;
}

LandmarkSet canonical_template(int out_size) {
  if (out_size <= 0) throw ConfigError("canonical_template: out_size must be positive");
  LandmarkSet set;
  set.schema = LandmarkSchema::five_point;
  const double f = static_cast<double>(out_size) / 112.0;
  for (const auto& p : kTemplate112) set.points.push_back({p.x * f, p.y * f});
  return set;
}

ImageF32 ImageF32::create(int width, int height, int channels, float fill) {
  if (width <= 0 || height <= 0 || channels <= 0) throw DataError("image dimensions must be positive");
  ImageF32 img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(width) * height * channels, fill);
  return img;
}

namespace {

ImageF32 crop_image(const ImageF32& src, int ox, int oy, int size) {
  ImageF32 out = ImageF32::create(size, size, src.channels);
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < size; ++y) {
      const float* s = &src.data[(static_cast<std::size_t>(c) * src.height + oy + y) * src.width + ox];
      float* d = &out.data[(static_cast<std::size_t>(c) * size + y) * size];
      std::copy(s, s + size, d);
    }
  }
  return out;
}

void flip_horizontal(ImageF32& img) {
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      float* row = &img.data[(static_cast<std::size_t>(c) * img.height + y) * img.width];
      for (int x = 0; x < img.width / 2; ++x) std::swap(row[x], row[img.width - 1 - x]);
    }
  }
}

}  // namespace

AlignedFace warp_and_crop(const ImageF32& image, const SimilarityTransform& transform,
                          const WarpOptions& opt) {
  if (image.data.empty()) throw DataError("warp_and_crop: empty image");
  if (opt.out_size <= 0 || opt.crop_size <= 0 || opt.crop_size > opt.out_size) {
    throw ConfigError("warp_and_crop: invalid out_size/crop_size");
  }

  const auto inv = transform.inverse().matrix();
  ImageF32 canvas = ImageF32::create(opt.out_size, opt.out_size, image.channels);
  for (int c = 0; c < image.channels; ++c) {
    const float* plane = image.data.data() + static_cast<std::size_t>(c) * image.plane_size();
    for (int y = 0; y < opt.out_size; ++y) {
      // Source position is affine in the output column: row start + column step.
      const float sx0 = static_cast<float>(inv[1] * y + inv[2]);
      const float sy0 = static_cast<float>(inv[4] * y + inv[5]);
      float* dst = &canvas.data[(static_cast<std::size_t>(c) * opt.out_size + y) * opt.out_size];
      kernels::warp_bilinear_row_f32(plane, image.width, image.height, sx0, sy0,
                                     static_cast<float>(inv[0]), static_cast<float>(inv[3]), dst,
                                     opt.out_size);
    }
  }
  for (float& v : canvas.data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);

  Rng rng(opt.seed);
  int ox = (opt.out_size - opt.crop_size) / 2;
  int oy = ox;
  if (opt.crop == CropMode::random) {
    const int span = opt.out_size - opt.crop_size + 1;
    ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
    oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
  }
  ImageF32 cropped = crop_image(canvas, ox, oy, opt.crop_size);
  if (opt.flip == FlipMode::random && rng.bernoulli(0.5)) flip_horizontal(cropped);

  AlignedFace face;
  face.pixels = std::move(cropped);
  face.transform_used = transform;
  face.warp_size = opt.out_size;
  face.crop_size = opt.crop_size;
  return face;
}

std::vector<double> flatten(const ImageF32& image) {
  std::vector<double> out(image.data.size());
  for (std::size_t i = 0; i < image.data.size(); ++i) out[i] = static_cast<double>(image.data[i]);
  return out;
}

}  // namespace facet::align
