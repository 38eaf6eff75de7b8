#include "facet/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "facet/kernels/kernels.hpp"

namespace facet::pipeline {

const std::vector<std::string>& expression_labels(ExpressionClassSet set) {
  static const std::vector<std::string> affectnet8{"neutral", "happy",   "sad",   "surprise",
                                                   "fear",    "disgust", "anger", "contempt"};
  static const std::vector<std::string> rafdb7{"surprise", "fear",  "disgust", "happy",
                                               "sad",      "anger", "neutral"};
  return set == ExpressionClassSet::affectnet8 ? affectnet8 : rafdb7;
}

namespace {

std::vector<CompiledLayer> compile_network(const nn::NetworkSpec& spec, const nn::ParamSet& params) {
  std::vector<CompiledLayer> out;
  std::size_t slot = 0;
  for (const auto& l : spec.layers) {
    CompiledLayer cl;
    cl.kind = l.kind;
    if (l.kind == nn::LayerKind::dense) {
      cl.in_dim = l.in_dim;
      cl.out_dim = l.out_dim;
      cl.has_bias = l.has_bias;
      const nn::Tensor& w = params.tensors[slot++];
      cl.weight.resize(w.data.size());
      for (std::size_t i = 0; i < w.data.size(); ++i) cl.weight[i] = static_cast<float>(w.data[i]);
      if (l.has_bias) {
        const nn::Tensor& b = params.tensors[slot++];
        cl.bias.resize(b.data.size());
        for (std::size_t i = 0; i < b.data.size(); ++i) cl.bias[i] = static_cast<float>(b.data[i]);
      }
    }
    out.push_back(std::move(cl));
  }
  return out;
}

void run_layers(const std::vector<CompiledLayer>& layers, std::vector<float>& x) {
  for (const auto& l : layers) {
    switch (l.kind) {
      case nn::LayerKind::dense: {
        if (static_cast<int>(x.size()) != l.in_dim) {
          throw ConfigError("inference: wrong input size (" + std::to_string(x.size()) + " vs dense in_dim " +
                            std::to_string(l.in_dim) + ")");
        }
        std::vector<float> y(static_cast<std::size_t>(l.out_dim));
        kernels::matmul_f32(x.data(), l.weight.data(), y.data(), 1, l.in_dim, l.out_dim);
        if (l.has_bias) kernels::add_bias_f32(y.data(), l.bias.data(), 1, l.out_dim);
        x = std::move(y);
        break;
      }
      case nn::LayerKind::relu:
        kernels::relu_f32(x.data(), x.data(), x.size());
        break;
      case nn::LayerKind::sigmoid:
        for (float& v : x) v = 1.0f / (1.0f + std::exp(-v));
        break;
      case nn::LayerKind::softmax: {
        float mx = x[0];
        for (float v : x) mx = v > mx ? v : mx;
        float sum = 0.0f;
        for (float& v : x) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (float& v : x) v /= sum;
        break;
      }
    }
  }
}

}  // namespace

std::vector<float> CompiledModel::run(const std::vector<float>& input) const {
  std::vector<float> x = input;
  run_layers(encoder, x);
  run_layers(classifier, x);
  return x;
}

CompiledModel compile(const model::ModelBundle& bundle) {
  model::validate_bundle(bundle);
  CompiledModel m;
  m.encoder = compile_network(bundle.encoder_spec, bundle.encoder_params);
  m.classifier = compile_network(bundle.classifier_spec, bundle.classifier_params);
  m.head = bundle.meta.head;
  m.class_count = bundle.meta.class_count;
  m.input_dim = bundle.encoder_spec.input_dim();
  return m;
}

namespace {

std::vector<float> face_input(const align::AlignedFace& face) { return face.pixels.data; }

double clamp_intensity(double v) { return v < 0.0 ? 0.0 : (v > 5.0 ? 5.0 : v); }

AURecord au_record_from_outputs(const std::vector<float>& out, int frame) {
  AURecord rec;
  rec.frame = frame;
  for (std::size_t i = 0; i < kIntensityAUs.size(); ++i) {
    rec.intensities[kIntensityAUs[i]] = clamp_intensity(static_cast<double>(out[i]));
  }
  for (std::size_t i = 0; i < kDetectionAUs.size(); ++i) {
    const double z = static_cast<double>(out[kIntensityAUs.size() + i]);
    rec.detections[kDetectionAUs[i]] = 1.0 / (1.0 + std::exp(-z));
  }
  return rec;
}

ExpressionRecord fer_record_from_logits(const std::vector<float>& logits, int class_count, int frame) {
  ExpressionRecord rec;
  rec.frame = frame;
  rec.class_set = class_count == 8 ? ExpressionClassSet::affectnet8 : ExpressionClassSet::rafdb7;
  std::vector<double> dl(logits.begin(), logits.end());
  rec.probabilities.resize(dl.size());
  nn::softmax_row(dl.data(), rec.probabilities.data(), static_cast<int>(dl.size()));
  int best = 0;
  for (std::size_t i = 1; i < rec.probabilities.size(); ++i) {
    if (rec.probabilities[i] > rec.probabilities[best]) best = static_cast<int>(i);
  }
  rec.label = best;
  rec.label_name = expression_labels(rec.class_set)[static_cast<std::size_t>(best)];
  return rec;
}

}  // namespace

AURecord predict_au(const align::AlignedFace& face, const model::ModelBundle& bundle) {
  if (bundle.meta.head != model::HeadKind::au) {
    throw ConfigError("predict_au: bundle head kind is not 'au'");
  }
  const CompiledModel m = compile(bundle);
  return au_record_from_outputs(m.run(face_input(face)), 0);
}

ExpressionRecord predict_fer(const align::AlignedFace& face, const model::ModelBundle& bundle) {
  if (bundle.meta.head != model::HeadKind::fer) {
    throw ConfigError("predict_fer: bundle head kind is not 'fer'");
  }
  const CompiledModel m = compile(bundle);
  return fer_record_from_logits(m.run(face_input(face)), m.class_count, 0);
}

FrameSources preloaded_sources(const std::vector<align::ImageF32>* images,
                               const std::map<int, align::LandmarkSet>* landmarks) {
  FrameSources s;
  s.frame_count = [images] { return static_cast<int>(images->size()); };
  s.image = [images](int k) { return (*images)[static_cast<std::size_t>(k)]; };
  s.landmarks = [landmarks](int k) -> const align::LandmarkSet* {
    const auto it = landmarks->find(k);
    return it == landmarks->end() ? nullptr : &it->second;
  };
  return s;
}

namespace {

struct HeadSet {
  const CompiledModel* au = nullptr;          // combined or intensity-only
  const CompiledModel* au_detection = nullptr;
  const CompiledModel* fer = nullptr;
  bool has_intensity = false;
  bool has_detection = false;
};

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string make_row(int frame, const FrameSources& sources, const HeadSet& heads,
                     const std::vector<CompiledModel>& models, const PipelineOptions& opt) {
  (void)models;
  std::ostringstream row;
  row << frame;

  bool success = false;
  AURecord au;
  ExpressionRecord fer;
  bool have_au = false;
  bool have_det = false;
  bool have_fer = false;

  align::ImageF32 image;
  try {
    image = sources.image(frame);
  } catch (const IoError& e) {
    throw IoError("frame " + std::to_string(frame) + ": " + e.what());
  }

  const align::LandmarkSet* lms = sources.landmarks(frame);
  if (lms != nullptr) {
    try {
      const align::LandmarkSet tmpl = align::canonical_template(opt.warp_size);
      const align::SimilarityTransform t = align::estimate_similarity(*lms, tmpl);
      align::WarpOptions wopt;
      wopt.out_size = opt.warp_size;
      wopt.crop_size = opt.crop_size;
      wopt.crop = align::CropMode::center;
      wopt.flip = align::FlipMode::none;
      const align::AlignedFace face = align::warp_and_crop(image, t, wopt);
      const std::vector<float> input = face_input(face);
      if (heads.au != nullptr) {
        const auto out = heads.au->run(input);
        if (heads.au->head == model::HeadKind::au) {
          au = au_record_from_outputs(out, frame);
          have_au = true;
          have_det = true;
        } else {
          au.frame = frame;
          for (std::size_t i = 0; i < kIntensityAUs.size(); ++i) {
            au.intensities[kIntensityAUs[i]] = clamp_intensity(static_cast<double>(out[i]));
          }
          have_au = true;
        }
      }
      if (heads.au_detection != nullptr) {
        const auto out = heads.au_detection->run(input);
        for (std::size_t i = 0; i < kDetectionAUs.size(); ++i) {
          const double z = static_cast<double>(out[i]);
          au.detections[kDetectionAUs[i]] = 1.0 / (1.0 + std::exp(-z));
        }
        have_det = true;
      }
      if (heads.fer != nullptr) {
        fer = fer_record_from_logits(heads.fer->run(input), heads.fer->class_count, frame);
        have_fer = true;
      }
      success = true;
    } catch (const DataError&) {
      // Degenerate geometry or bad pixels degrade to a success=0 row.
      success = false;
      have_au = have_det = have_fer = false;
    }
  }

  row << "," << (success ? 1 : 0);
  for (int auid : kIntensityAUs) {
    row << ",";
    if (success && have_au && au.intensities.count(auid) != 0) row << format_value(au.intensities.at(auid));
  }
  for (int auid : kDetectionAUs) {
    row << ",";
    if (success && have_det && au.detections.count(auid) != 0) row << format_value(au.detections.at(auid));
  }
  row << ",";
  if (success && have_fer) row << fer.label;
  if (heads.fer != nullptr) {
    for (int c = 0; c < heads.fer->class_count; ++c) {
      row << ",";
      if (success && have_fer) row << format_value(fer.probabilities[static_cast<std::size_t>(c)]);
    }
  }
  row << "\n";
  return row.str();
}

}  // namespace

std::string csv_header(const std::vector<const model::ModelBundle*>& bundles) {
  std::ostringstream h;
  h << "frame,success";
  for (int auid : kIntensityAUs) {
    h << ",AU" << (auid < 10 ? "0" : "") << auid << "_r";
  }
  for (int auid : kDetectionAUs) {
    h << ",AU" << (auid < 10 ? "0" : "") << auid << "_c";
  }
  h << ",expression";
  for (const auto* b : bundles) {
    if (b->meta.head == model::HeadKind::fer) {
      for (int c = 0; c < b->meta.class_count; ++c) h << ",expr_prob_" << c;
    }
  }
  h << "\n";
  return h.str();
}

int run_pipeline(const FrameSources& sources, const std::vector<const model::ModelBundle*>& bundles,
                 std::ostream& csv_out, const PipelineOptions& opt) {
  if (bundles.empty()) throw ConfigError("run_pipeline: at least one bundle required");

  std::vector<CompiledModel> models;
  models.reserve(bundles.size());
  for (const auto* b : bundles) models.push_back(compile(*b));

  HeadSet heads;
  for (const auto& m : models) {
    switch (m.head) {
      case model::HeadKind::au:
        if (heads.has_intensity || heads.has_detection) {
          throw ConfigError("run_pipeline: overlapping AU bundles");
        }
        heads.au = &m;
        heads.has_intensity = heads.has_detection = true;
        break;
      case model::HeadKind::au_intensity:
        if (heads.has_intensity) throw ConfigError("run_pipeline: overlapping AU intensity bundles");
        heads.au = &m;
        heads.has_intensity = true;
        break;
      case model::HeadKind::au_detection:
        if (heads.has_detection) throw ConfigError("run_pipeline: overlapping AU detection bundles");
        heads.au_detection = &m;
        heads.has_detection = true;
        break;
      case model::HeadKind::fer:
        if (heads.fer != nullptr) throw ConfigError("run_pipeline: multiple fer bundles");
        heads.fer = &m;
        break;
    }
  }

  const int n = sources.frame_count();
  csv_out << csv_header(bundles);

  if (opt.workers <= 1) {
    for (int k = 0; k < n; ++k) csv_out << make_row(k, sources, heads, models, opt);
    csv_out.flush();
    return n;
  }

  // Workers claim frames; the writer drains rows strictly in frame order so
  // the bytes match the single-threaded run.
  std::atomic<int> next{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::condition_variable cv;
  std::map<int, std::string> ready;
  std::exception_ptr first_error;

  const auto worker = [&] {
    while (!abort.load(std::memory_order_relaxed)) {
      const int k = next.fetch_add(1);
      if (k >= n) break;
      try {
        std::string row = make_row(k, sources, heads, models, opt);
        {
          std::lock_guard<std::mutex> lock(mu);
          ready.emplace(k, std::move(row));
        }
        cv.notify_all();
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
        abort.store(true, std::memory_order_relaxed);
        cv.notify_all();
        break;
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < opt.workers; ++w) pool.emplace_back(worker);

  int written = 0;
  {
    std::unique_lock<std::mutex> lock(mu);
    for (int k = 0; k < n; ++k) {
      cv.wait(lock, [&] { return ready.count(k) != 0 || first_error != nullptr; });
      if (first_error != nullptr) break;
      csv_out << ready.at(k);
      ready.erase(k);
      ++written;
    }
  }
  abort.store(true, std::memory_order_relaxed);
  for (auto& t : pool) t.join();
  if (first_error != nullptr) std::rethrow_exception(first_error);
  csv_out.flush();
  return written;
}

namespace {

struct NullBuffer : std::streambuf {
  int overflow(int c) override { return c; }
};

}  // namespace

std::ostream& null_sink() {
  static NullBuffer buffer;
  static std::ostream stream(&buffer);
  return stream;
}

}  // namespace facet::pipeline
