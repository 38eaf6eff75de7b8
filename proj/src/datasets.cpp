#include "facet/datasets.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "facet/image_io.hpp"

namespace fs = std::filesystem;

namespace facet::data {

namespace {

constexpr const char* kRegressionHeader =
    "frame,subject,AU01,AU02,AU04,AU05,AU06,AU09,AU12,AU15,AU17,AU20,AU25,AU26";
constexpr const char* kDetectionHeader = "frame,subject,AU07,AU10,AU14,AU23,AU24";
constexpr const char* kFerHeader = "frame,subject,expression";

std::string frame_name(int frame, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%06d%s", frame, ext);
  return buf;
}

struct AnnotationRow {
  int frame = 0;
  std::string subject;
  std::vector<double> values;
};

std::vector<AnnotationRow> parse_annotations(const std::string& path, train::TaskKind task) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations: " + path);
  const std::string expected = annotations_header(task);
  std::string line;
  std::vector<AnnotationRow> rows;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != expected) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected header '" + expected + "'");
      }
      saw_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    const std::size_t want = task == train::TaskKind::au_regression ? 14
                             : task == train::TaskKind::au_detection ? 7
                                                                     : 3;
    if (fields.size() != want) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(want) +
                       " fields, got " + std::to_string(fields.size()));
    }
    AnnotationRow row;
    try {
      row.frame = std::stoi(fields[0]);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad frame id '" + fields[0] + "'");
    }
    row.subject = fields[1];
    if (row.subject.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty subject id");
    }
    for (std::size_t i = 2; i < fields.size(); ++i) {
      try {
        row.values.push_back(std::stod(fields[i]));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad value '" + fields[i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!saw_header) throw ParseError(path + ": missing header");
  return rows;
}

losses::TaskTarget target_from_row(const AnnotationRow& row, train::TaskKind task) {
  if (task == train::TaskKind::fer_classification) {
    const int label = static_cast<int>(row.values.at(0));
    // Class count is fixed by the largest label downstream; here targets are
    // built per dataset after scanning (see load_dataset).
    (void)label;
  }
  if (task == train::TaskKind::au_regression || task == train::TaskKind::au_detection) {
    return losses::TaskTarget::regression(row.values);
  }
  throw ConfigError("target_from_row: fer handled separately");
}

}  // namespace

const char* annotations_header(train::TaskKind task) {
  switch (task) {
    case train::TaskKind::au_regression: return kRegressionHeader;
    case train::TaskKind::au_detection: return kDetectionHeader;
    case train::TaskKind::fer_classification: return kFerHeader;
  }
  return "";
}

train::Dataset load_dataset(const std::string& dir, train::TaskKind task) {
  const fs::path root(dir);
  const auto rows = parse_annotations((root / "annotations.csv").string(), task);
  if (rows.empty()) throw DataError(dir + ": no annotation rows");

  int num_classes = 0;
  if (task == train::TaskKind::fer_classification) {
    for (const auto& r : rows) num_classes = std::max(num_classes, static_cast<int>(r.values.at(0)) + 1);
    if (num_classes < 2) throw DataError(dir + ": fer dataset needs at least 2 classes");
  }

  const bool has_aligned = fs::exists(root / "aligned");
  const bool has_images = fs::exists(root / "images") && fs::exists(root / "landmarks.csv");
  if (!has_aligned && !has_images) {
    throw IoError(dir + ": expected aligned/ tensors or images/ + landmarks.csv");
  }

  std::map<int, align::LandmarkSet> landmarks;
  if (!has_aligned) {
    for (auto& set : align::parse_landmarks((root / "landmarks.csv").string())) {
      landmarks[set.source_frame] = std::move(set);
    }
  }

  train::Dataset ds;
  for (const auto& row : rows) {
    train::Sample sample;
    sample.subject_id = row.subject;
    if (task == train::TaskKind::fer_classification) {
      sample.target = losses::TaskTarget::classification(static_cast<int>(row.values.at(0)), num_classes);
    } else {
      sample.target = target_from_row(row, task);
    }
    if (has_aligned) {
      const auto t = img::read_ften((root / "aligned" / frame_name(row.frame, ".ften")).string());
      sample.input.assign(t.data.begin(), t.data.end());
    } else {
      const auto it = landmarks.find(row.frame);
      if (it == landmarks.end()) {
        throw DataError(dir + ": no landmarks for annotated frame " + std::to_string(row.frame));
      }
      const auto image = img::read_pnm((root / "images" / frame_name(row.frame, ".ppm")).string());
      const auto tmpl = align::canonical_template(256);
      const auto transform = align::estimate_similarity(it->second, tmpl);
      const auto face = align::warp_and_crop(image, transform);
      sample.input = align::flatten(face.pixels);
    }
    ds.samples.push_back(std::move(sample));
  }
  ds.validate();
  return ds;
}

void write_dataset(const std::string& dir, const train::Dataset& dataset, train::TaskKind task) {
  dataset.validate();
  const fs::path root(dir);
  fs::create_directories(root / "aligned");

  std::ofstream ann((root / "annotations.csv").string(), std::ios::binary);
  if (!ann) throw IoError("cannot write annotations in " + dir);
  ann << annotations_header(task) << "\n";
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    ann << i << "," << s.subject_id;
    if (task == train::TaskKind::fer_classification) {
      const auto& tv = s.target.values;
      const int label = static_cast<int>(std::max_element(tv.begin(), tv.end()) - tv.begin());
      ann << "," << label;
    } else {
      for (double v : s.target.values) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), ",%.6f", v);
        ann << buf;
      }
    }
    ann << "\n";

    img::FloatTensor t;
    t.shape = {static_cast<int>(s.input.size())};
    t.data.assign(s.input.begin(), s.input.end());
    img::write_ften(t, (root / "aligned" / frame_name(static_cast<int>(i), ".ften")).string());
  }
  if (!ann) throw IoError("failed writing annotations in " + dir);
}

}  // namespace facet::data
