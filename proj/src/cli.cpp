#include "facet/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include "facet/bench.hpp"
#include "facet/datasets.hpp"
#include "facet/image_io.hpp"
#include "facet/metrics.hpp"
#include "facet/pipeline.hpp"
#include "facet/rng.hpp"
#include "facet/train.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace facet::cli {

namespace {

// ---------------------------------------------------------------------------
// Config plumbing: defaults -> config file -> command-line flags.

template <class T>
T cfg_get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void merge_config_file(json& resolved, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json file;
  try {
    file = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  if (!file.is_object()) throw ConfigError(path + ": config root must be an object");
  for (const auto& [key, value] : file.items()) {
    if (!resolved.contains(key)) {
      throw ConfigError(path + ": unknown config key '" + key + "'");
    }
    resolved[key] = value;
  }
}

// Collects flag values and overlays them onto the resolved config after the
// file merge, so flags win.
struct OptionBinder {
  CLI::App* app;
  json* resolved;
  std::vector<std::function<void()>> appliers;

  template <class T>
  void add(const std::string& flag, const std::string& key, const std::string& desc) {
    auto storage = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *storage, desc);
    appliers.push_back([this, opt, storage, key] {
      if (opt->count() > 0) (*resolved)[key] = *storage;
    });
  }

  void add_flag(const std::string& flag, const std::string& key, const std::string& desc) {
    auto storage = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *storage, desc);
    appliers.push_back([this, opt, storage, key] {
      if (opt->count() > 0) (*resolved)[key] = *storage;
    });
  }

  void apply() {
    for (auto& f : appliers) f();
  }
};

void echo_config(const json& resolved, const fs::path& where) {
  fs::create_directories(where.parent_path().empty() ? "." : where.parent_path());
  std::ofstream out(where, std::ios::binary);
  if (!out) throw IoError("cannot write config echo: " + where.string());
  out << resolved.dump(2) << "\n";
}

fs::path echo_path_for(const std::string& out) {
  const fs::path p(out);
  if (p.has_extension()) return fs::path(out + ".config.json");
  return p / "config.echo.json";
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> list_ppm_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .ppm images in " + dir);
  return files;
}

void apply_backend(const json& resolved) {
  kernels::force(kernels::parse_backend(cfg_get<std::string>(resolved, "backend").c_str()));
}

// ---------------------------------------------------------------------------
// Model construction helpers.

nn::NetworkSpec encoder_spec_from_hidden(int input_dim, const std::vector<int>& hidden) {
  if (hidden.empty()) throw ConfigError("hidden layer list must not be empty");
  nn::NetworkSpec spec;
  spec.role = nn::NetworkRole::encoder;
  int in = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    spec.layers.push_back(nn::LayerSpec::dense(in, hidden[i]));
    spec.layers.push_back(nn::LayerSpec::relu());
    in = hidden[i];
  }
  return spec;
}

model::ModelBundle build_bundle(int input_dim, const std::vector<int>& hidden, int output_dim,
                                model::HeadKind head, int class_count, std::uint64_t seed,
                                const std::string& provenance) {
  model::ModelBundle b;
  b.encoder_spec = encoder_spec_from_hidden(input_dim, hidden);
  b.classifier_spec.role = nn::NetworkRole::classifier;
  b.classifier_spec.layers.push_back(nn::LayerSpec::dense(hidden.back(), output_dim));
  b.encoder_params = nn::init_network(b.encoder_spec, mix_seed(seed, 1));
  b.classifier_params = nn::init_network(b.classifier_spec, mix_seed(seed, 2));
  b.meta.head = head;
  b.meta.feature_dim = hidden.back();
  b.meta.class_count = class_count;
  b.meta.provenance = provenance;
  model::validate_bundle(b);
  return b;
}

model::HeadKind head_for_task(train::TaskKind task) {
  switch (task) {
    case train::TaskKind::au_regression: return model::HeadKind::au_intensity;
    case train::TaskKind::au_detection: return model::HeadKind::au_detection;
    case train::TaskKind::fer_classification: return model::HeadKind::fer;
  }
  return model::HeadKind::au_intensity;
}

// Raw f64 predictions of a bundle over a dataset, row-major (n x dout).
std::vector<double> forward_dataset(const model::ModelBundle& bundle, const train::Dataset& ds) {
  const int n = static_cast<int>(ds.samples.size());
  const int din = ds.input_dim();
  std::vector<double> preds;
  preds.reserve(static_cast<std::size_t>(n) * bundle.classifier_spec.output_dim());
  constexpr int kChunk = 256;
  for (int start = 0; start < n; start += kChunk) {
    const int end = std::min(n, start + kChunk);
    nn::Tensor x = nn::Tensor::zeros({end - start, din});
    for (int i = start; i < end; ++i) {
      std::copy(ds.samples[static_cast<std::size_t>(i)].input.begin(),
                ds.samples[static_cast<std::size_t>(i)].input.end(),
                x.data.begin() + static_cast<std::ptrdiff_t>(i - start) * din);
    }
    const nn::Tensor f = nn::forward(bundle.encoder_params, bundle.encoder_spec, x);
    const nn::Tensor out = nn::forward(bundle.classifier_params, bundle.classifier_spec, f);
    preds.insert(preds.end(), out.data.begin(), out.data.end());
  }
  return preds;
}

// ---------------------------------------------------------------------------
// Subcommands.

int run_align(const json& resolved) {
  apply_backend(resolved);
  const std::string images = cfg_get<std::string>(resolved, "images");
  const std::string landmarks_path = cfg_get<std::string>(resolved, "landmarks");
  const std::string out = cfg_get<std::string>(resolved, "out");
  if (images.empty() || landmarks_path.empty() || out.empty()) {
    throw ConfigError("align requires 'images', 'landmarks' and 'out'");
  }

  align::WarpOptions wopt;
  wopt.out_size = cfg_get<int>(resolved, "size");
  wopt.crop_size = cfg_get<int>(resolved, "crop_size");
  const std::string crop = cfg_get<std::string>(resolved, "crop");
  if (crop == "center") {
    wopt.crop = align::CropMode::center;
  } else if (crop == "random") {
    wopt.crop = align::CropMode::random;
  } else {
    throw ConfigError("config key 'crop': expected center|random, got '" + crop + "'");
  }
  const std::string flip = cfg_get<std::string>(resolved, "flip");
  if (flip == "none") {
    wopt.flip = align::FlipMode::none;
  } else if (flip == "random") {
    wopt.flip = align::FlipMode::random;
  } else {
    throw ConfigError("config key 'flip': expected none|random, got '" + flip + "'");
  }
  const std::uint64_t seed = cfg_get<std::uint64_t>(resolved, "seed");

  std::map<int, align::LandmarkSet> by_frame;
  for (auto& set : align::parse_landmarks(landmarks_path)) by_frame[set.source_frame] = std::move(set);

  const auto files = list_ppm_files(images);
  const auto tmpl = align::canonical_template(wopt.out_size);
  fs::create_directories(out);
  int written = 0;
  for (std::size_t k = 0; k < files.size(); ++k) {
    const auto it = by_frame.find(static_cast<int>(k));
    if (it == by_frame.end()) continue;
    const auto image = img::read_pnm(files[k]);
    const auto transform = align::estimate_similarity(it->second, tmpl);
    align::WarpOptions frame_opt = wopt;
    frame_opt.seed = mix_seed(seed, k);
    const auto face = align::warp_and_crop(image, transform, frame_opt);
    char name[64];
    std::snprintf(name, sizeof(name), "frame_%06zu.ften", k);
    img::write_ften(img::ften_from_image(face.pixels), (fs::path(out) / name).string());
    ++written;
  }
  echo_config(resolved, echo_path_for(out));
  std::cout << "aligned " << written << " frame(s) into " << out << "\n";
  return 0;
}

train::TrainConfig train_config_from(const json& resolved) {
  train::TrainConfig cfg;
  cfg.learning_rate = cfg_get<double>(resolved, "learning_rate");
  cfg.weight_decay = cfg_get<double>(resolved, "weight_decay");
  cfg.batch_size = cfg_get<int>(resolved, "batch_size");
  cfg.max_epochs = cfg_get<int>(resolved, "max_epochs");
  cfg.early_stop_patience = cfg_get<int>(resolved, "patience");
  cfg.seed = cfg_get<std::uint64_t>(resolved, "seed");
  cfg.task = train::parse_task_kind(cfg_get<std::string>(resolved, "task"));
  if (resolved.contains("alpha")) cfg.alpha = cfg_get<double>(resolved, "alpha");
  if (resolved.contains("beta")) cfg.beta = cfg_get<double>(resolved, "beta");
  train::validate_config(cfg);
  return cfg;
}

int run_train(const json& resolved) {
  apply_backend(resolved);
  const std::string data = cfg_get<std::string>(resolved, "data");
  const std::string out = cfg_get<std::string>(resolved, "out");
  if (data.empty() || out.empty()) throw ConfigError("train requires 'data' and 'out'");

  const train::TrainConfig cfg = train_config_from(resolved);
  const train::Dataset all = data::load_dataset(data, cfg.task);
  const auto [train_set, val_set] =
      train::subject_holdout(all, cfg_get<double>(resolved, "val_fraction"), cfg.seed);

  model::ModelBundle init;
  const std::string init_path = cfg_get<std::string>(resolved, "init");
  if (!init_path.empty()) {
    init = model::load_bundle(init_path);
  } else {
    const int classes = cfg.task == train::TaskKind::fer_classification ? all.target_dim() : 0;
    init = build_bundle(all.input_dim(), cfg_get<std::vector<int>>(resolved, "hidden"),
                        all.target_dim(), head_for_task(cfg.task), classes, cfg.seed,
                        "trained:" + std::string(train::task_kind_name(cfg.task)));
  }

  const train::TrainResult result = train::train_supervised(init, train_set, val_set, cfg);
  fs::create_directories(out);
  model::save_bundle(result.model, (fs::path(out) / "model.lfmb").string());
  write_text(fs::path(out) / "history.csv", train::history_csv(result.history));
  echo_config(resolved, echo_path_for(out));
  std::cout << "trained " << train::task_kind_name(cfg.task) << " model: " << out << "/model.lfmb ("
            << result.history.size() << " epochs)\n";
  return 0;
}

int run_distill(const json& resolved) {
  apply_backend(resolved);
  const std::string data = cfg_get<std::string>(resolved, "data");
  const std::string out = cfg_get<std::string>(resolved, "out");
  const std::string teacher_path = cfg_get<std::string>(resolved, "teacher");
  if (data.empty() || out.empty() || teacher_path.empty()) {
    throw ConfigError("distill requires 'data', 'teacher' and 'out'");
  }

  const train::TrainConfig cfg = train_config_from(resolved);
  const train::Dataset all = data::load_dataset(data, cfg.task);
  const auto [train_set, val_set] =
      train::subject_holdout(all, cfg_get<double>(resolved, "val_fraction"), cfg.seed);

  const model::ModelBundle teacher = model::load_bundle(teacher_path);
  const std::uint64_t teacher_hash_before = model::bundle_hash(teacher);

  model::ModelBundle student_init;
  const std::string student_init_path = cfg_get<std::string>(resolved, "student_init");
  if (!student_init_path.empty()) {
    student_init = model::load_bundle(student_init_path);
  } else {
    student_init = build_bundle(all.input_dim(), cfg_get<std::vector<int>>(resolved, "student_hidden"),
                                teacher.classifier_spec.output_dim(), teacher.meta.head,
                                teacher.meta.class_count, cfg.seed, "distilled-student");
  }

  const train::TrainResult result = train::distill(teacher, student_init, train_set, val_set, cfg);
  if (model::bundle_hash(teacher) != teacher_hash_before) {
    throw NumericError("teacher parameters changed during distillation");
  }
  fs::create_directories(out);
  model::save_bundle(result.model, (fs::path(out) / "student.lfmb").string());
  write_text(fs::path(out) / "history.csv", train::history_csv(result.history));
  echo_config(resolved, echo_path_for(out));
  std::cout << "distilled student: " << out << "/student.lfmb (" << result.history.size()
            << " epochs)\n";
  return 0;
}

int run_eval(const json& resolved) {
  apply_backend(resolved);
  const std::string data = cfg_get<std::string>(resolved, "data");
  const std::string bundle_path = cfg_get<std::string>(resolved, "bundle");
  const std::string out = cfg_get<std::string>(resolved, "out");
  if (data.empty() || bundle_path.empty() || out.empty()) {
    throw ConfigError("eval requires 'data', 'bundle' and 'out'");
  }
  const auto task = train::parse_task_kind(cfg_get<std::string>(resolved, "task"));
  const int folds = cfg_get<int>(resolved, "folds");
  const std::uint64_t seed = cfg_get<std::uint64_t>(resolved, "seed");
  const std::string mode = cfg_get<std::string>(resolved, "mode");
  if (mode != "pooled" && mode != "per_fold") {
    throw ConfigError("config key 'mode': expected pooled|per_fold, got '" + mode + "'");
  }

  const train::Dataset all = data::load_dataset(data, task);
  const model::ModelBundle bundle = model::load_bundle(bundle_path);
  std::vector<std::string> subjects;
  for (const auto& s : all.samples) subjects.push_back(s.subject_id);
  const metrics::FoldSplit split = metrics::kfold_split(subjects, folds, seed);

  const std::vector<double> preds = forward_dataset(bundle, all);
  const int dout = bundle.classifier_spec.output_dim();
  const auto au_ids = task == train::TaskKind::au_regression
                          ? std::vector<int>(pipeline::kIntensityAUs.begin(), pipeline::kIntensityAUs.end())
                          : std::vector<int>(pipeline::kDetectionAUs.begin(), pipeline::kDetectionAUs.end());
  if (task != train::TaskKind::fer_classification && dout != static_cast<int>(au_ids.size())) {
    throw ConfigError("eval: bundle output dim does not match the task's AU set");
  }

  // Gather per-fold sample indices.
  std::vector<std::vector<int>> fold_members(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < all.samples.size(); ++i) {
    const int f = split.assignments.at(all.samples[i].subject_id);
    fold_members[static_cast<std::size_t>(f)].push_back(static_cast<int>(i));
  }

  const auto report_for = [&](const std::vector<int>& members, int fold_id) {
    metrics::MetricsReport rep;
    rep.fold_id = fold_id;
    const std::size_t n = members.size();
    if (task == train::TaskKind::au_regression) {
      std::vector<double> p(n), t(n), all_p, all_t;
      for (int d = 0; d < dout; ++d) {
        for (std::size_t i = 0; i < n; ++i) {
          const int row = members[i];
          p[i] = preds[static_cast<std::size_t>(row) * dout + d];
          t[i] = all.samples[static_cast<std::size_t>(row)].target.values[static_cast<std::size_t>(d)];
        }
        rep.per_au_pcc[au_ids[static_cast<std::size_t>(d)]] = metrics::pcc(p, t);
        all_p.insert(all_p.end(), p.begin(), p.end());
        all_t.insert(all_t.end(), t.begin(), t.end());
      }
      const auto [mae, mse] = metrics::error_metrics(all_p, all_t);
      rep.mae = mae;
      rep.mse = mse;
    } else if (task == train::TaskKind::au_detection) {
      std::vector<double> p(n);
      std::vector<int> l(n);
      for (int d = 0; d < dout; ++d) {
        for (std::size_t i = 0; i < n; ++i) {
          const int row = members[i];
          const double z = preds[static_cast<std::size_t>(row) * dout + d];
          p[i] = 1.0 / (1.0 + std::exp(-z));
          l[i] = all.samples[static_cast<std::size_t>(row)].target.values[static_cast<std::size_t>(d)] > 0.5
                     ? 1
                     : 0;
        }
        rep.per_au_f1[au_ids[static_cast<std::size_t>(d)]] = metrics::f1_binary(p, l);
      }
    } else {
      std::vector<int> pl(n), tl(n);
      for (std::size_t i = 0; i < n; ++i) {
        const int row = members[i];
        int best = 0;
        for (int d = 1; d < dout; ++d) {
          if (preds[static_cast<std::size_t>(row) * dout + d] >
              preds[static_cast<std::size_t>(row) * dout + best]) {
            best = d;
          }
        }
        pl[i] = best;
        const auto& tv = all.samples[static_cast<std::size_t>(row)].target.values;
        tl[i] = static_cast<int>(std::max_element(tv.begin(), tv.end()) - tv.begin());
      }
      rep.accuracy = metrics::accuracy(pl, tl);
    }
    rep.refresh_averages();
    return rep;
  };

  metrics::MetricsReport final_report;
  if (mode == "pooled") {
    // Metrics over the concatenated test folds = the whole dataset, since
    // every sample sits in exactly one test fold.
    std::vector<int> everyone;
    for (const auto& members : fold_members) everyone.insert(everyone.end(), members.begin(), members.end());
    std::sort(everyone.begin(), everyone.end());
    final_report = report_for(everyone, -1);
  } else {
    std::vector<metrics::MetricsReport> per_fold;
    for (int f = 0; f < folds; ++f) per_fold.push_back(report_for(fold_members[static_cast<std::size_t>(f)], f));
    final_report = metrics::aggregate_report(per_fold);
  }

  fs::create_directories(out);
  write_text(fs::path(out) / "report.json", metrics::to_json(final_report));
  write_text(fs::path(out) / "report.csv", metrics::to_table_csv(final_report));
  echo_config(resolved, echo_path_for(out));
  std::cout << metrics::to_table_csv(final_report);
  return 0;
}

pipeline::FrameSources disk_sources(const std::vector<std::string>& files,
                                    const std::shared_ptr<std::map<int, align::LandmarkSet>>& lms) {
  pipeline::FrameSources s;
  s.frame_count = [n = static_cast<int>(files.size())] { return n; };
  s.image = [files](int k) { return img::read_pnm(files[static_cast<std::size_t>(k)]); };
  s.landmarks = [lms](int k) -> const align::LandmarkSet* {
    const auto it = lms->find(k);
    return it == lms->end() ? nullptr : &it->second;
  };
  return s;
}

int run_infer(const json& resolved) {
  apply_backend(resolved);
  const std::string images = cfg_get<std::string>(resolved, "images");
  const std::string landmarks_path = cfg_get<std::string>(resolved, "landmarks");
  const std::string out = cfg_get<std::string>(resolved, "out");
  const auto bundle_paths = cfg_get<std::vector<std::string>>(resolved, "bundles");
  if (images.empty() || landmarks_path.empty() || out.empty() || bundle_paths.empty()) {
    throw ConfigError("infer requires 'images', 'landmarks', 'bundles' and 'out'");
  }

  auto lms = std::make_shared<std::map<int, align::LandmarkSet>>();
  for (auto& set : align::parse_landmarks(landmarks_path)) (*lms)[set.source_frame] = std::move(set);
  const auto files = list_ppm_files(images);

  std::vector<model::ModelBundle> bundles;
  bundles.reserve(bundle_paths.size());
  for (const auto& p : bundle_paths) bundles.push_back(model::load_bundle(p));
  std::vector<const model::ModelBundle*> bundle_ptrs;
  for (const auto& b : bundles) bundle_ptrs.push_back(&b);

  pipeline::PipelineOptions popt;
  popt.workers = cfg_get<int>(resolved, "workers");

  fs::create_directories(fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path());
  std::ofstream csv(out, std::ios::binary);
  if (!csv) throw IoError("cannot write output CSV: " + out);
  const int rows = pipeline::run_pipeline(disk_sources(files, lms), bundle_ptrs, csv, popt);
  if (!csv) throw IoError("failed writing output CSV: " + out);
  csv.close();
  echo_config(resolved, echo_path_for(out));
  std::cout << "wrote " << rows << " row(s) to " << out << "\n";
  return 0;
}

int run_bench(const json& resolved) {
  apply_backend(resolved);
  const auto bundle_paths = cfg_get<std::vector<std::string>>(resolved, "bundles");
  if (bundle_paths.empty()) throw ConfigError("bench requires 'bundles'");

  std::vector<model::ModelBundle> bundles;
  for (const auto& p : bundle_paths) bundles.push_back(model::load_bundle(p));
  std::vector<const model::ModelBundle*> bundle_ptrs;
  for (const auto& b : bundles) bundle_ptrs.push_back(&b);

  const int synthetic = cfg_get<int>(resolved, "synthetic");
  const bool preloaded = cfg_get<bool>(resolved, "preloaded");
  const std::uint64_t seed = cfg_get<std::uint64_t>(resolved, "seed");

  bench::BenchmarkSetup setup;
  setup.rounds = cfg_get<int>(resolved, "rounds");
  setup.preloaded = preloaded;
  setup.pipeline_options.workers = cfg_get<int>(resolved, "workers");

  // Owned storage for preloaded/synthetic modes.
  auto images = std::make_shared<std::vector<align::ImageF32>>();
  auto lms = std::make_shared<std::map<int, align::LandmarkSet>>();

  if (synthetic > 0) {
    const int w = cfg_get<int>(resolved, "width");
    const int h = cfg_get<int>(resolved, "height");
    Rng rng(seed);
    const int face_size = std::min(w, h);
    for (int k = 0; k < synthetic; ++k) {
      align::ImageF32 im = align::ImageF32::create(w, h, 3);
      for (float& v : im.data) v = static_cast<float>(rng.uniform());
      images->push_back(std::move(im));
      (*lms)[k] = align::canonical_template(face_size);
    }
    setup.sources = pipeline::preloaded_sources(images.get(), lms.get());
    setup.description = "synthetic " + std::to_string(synthetic) + "x" + std::to_string(w) + "x" +
                        std::to_string(h);
  } else {
    const std::string image_dir = cfg_get<std::string>(resolved, "images");
    const std::string landmarks_path = cfg_get<std::string>(resolved, "landmarks");
    if (image_dir.empty() || landmarks_path.empty()) {
      throw ConfigError("bench requires 'images' + 'landmarks' or 'synthetic' > 0");
    }
    for (auto& set : align::parse_landmarks(landmarks_path)) (*lms)[set.source_frame] = std::move(set);
    const auto files = list_ppm_files(image_dir);
    if (preloaded) {
      for (const auto& f : files) images->push_back(img::read_pnm(f));
      setup.sources = pipeline::preloaded_sources(images.get(), lms.get());
    } else {
      setup.sources = disk_sources(files, lms);
    }
    setup.description = image_dir + " (" + std::to_string(files.size()) + " images, " +
                        (preloaded ? "preloaded" : "from-disk") + ")";
  }

  bench::Clock clock = bench::monotonic_clock();
  const std::string fake_clock_path = cfg_get<std::string>(resolved, "fake_clock");
  if (!fake_clock_path.empty()) {
    std::ifstream in(fake_clock_path);
    if (!in) throw IoError("cannot open fake clock fixture: " + fake_clock_path);
    json fixture;
    try {
      fixture = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError(fake_clock_path + ": invalid JSON: " + e.what());
    }
    std::vector<double> durations;
    try {
      durations = fixture.at("durations").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw DataError(fake_clock_path + ": expected {\"durations\": [...]}: " + e.what());
    }
    if (static_cast<int>(durations.size()) != setup.rounds) {
      throw DataError(fake_clock_path + ": fixture has " + std::to_string(durations.size()) +
                      " durations but rounds=" + std::to_string(setup.rounds));
    }
    std::vector<double> stamps;
    double acc = 0.0;
    for (double d : durations) {
      stamps.push_back(acc);
      acc += d;
      stamps.push_back(acc);
    }
    clock = bench::scripted_clock(std::move(stamps));
  }

  const bench::BenchReport report = bench::run_benchmark(setup, clock);
  std::cout << table_row(report) << "\n";

  const std::string out = cfg_get<std::string>(resolved, "out");
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(fs::path(out) / "bench.json", bench::to_json(report));
    echo_config(resolved, echo_path_for(out));
  }
  return 0;
}

// ---------------------------------------------------------------------------

json defaults_for(const std::string& command) {
  json d;
  d["backend"] = "auto";
  d["seed"] = 0;
  if (command == "align") {
    d["images"] = "";
    d["landmarks"] = "";
    d["out"] = "";
    d["size"] = 256;
    d["crop"] = "center";
    d["crop_size"] = 224;
    d["flip"] = "none";
  } else if (command == "train" || command == "distill") {
    d["data"] = "";
    d["out"] = "";
    d["task"] = "au_regression";
    d["learning_rate"] = 3e-5;
    d["weight_decay"] = 1e-4;
    d["batch_size"] = 128;
    d["max_epochs"] = 20;
    d["patience"] = 5;
    d["val_fraction"] = 0.2;
    d["init"] = "";
    d["hidden"] = std::vector<int>{64};
    if (command == "distill") {
      d["teacher"] = "";
      d["student_init"] = "";
      d["student_hidden"] = std::vector<int>{8};
      d["alpha"] = 1.0;
      d["beta"] = 1.0;
      d.erase("init");
      d.erase("hidden");
    }
  } else if (command == "eval") {
    d["data"] = "";
    d["bundle"] = "";
    d["out"] = "";
    d["task"] = "au_regression";
    d["folds"] = 5;
    d["mode"] = "pooled";
  } else if (command == "infer") {
    d["images"] = "";
    d["landmarks"] = "";
    d["bundles"] = std::vector<std::string>{};
    d["out"] = "";
    d["workers"] = 1;
  } else if (command == "bench") {
    d["images"] = "";
    d["landmarks"] = "";
    d["bundles"] = std::vector<std::string>{};
    d["synthetic"] = 0;
    d["width"] = 64;
    d["height"] = 64;
    d["rounds"] = 5;
    d["preloaded"] = true;
    d["fake_clock"] = "";
    d["workers"] = 1;
    d["out"] = "";
  }
  return d;
}

}  // namespace

int run_or_throw(const std::vector<std::string>& args) {
  CLI::App app{"facial expression analysis engine"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app = nullptr;
    json resolved;
    std::string config_path;
    OptionBinder binder;
    std::function<int(const json&)> fn;
  };
  std::vector<std::unique_ptr<Sub>> subs;

  const auto make_sub = [&](const std::string& name, const std::string& desc,
                            std::function<int(const json&)> fn) -> Sub& {
    auto sub = std::make_unique<Sub>();
    sub->app = app.add_subcommand(name, desc);
    sub->resolved = defaults_for(name);
    sub->binder.app = sub->app;
    sub->binder.resolved = &sub->resolved;
    sub->fn = std::move(fn);
    sub->app->add_option("--config", sub->config_path, "JSON config file; flags override its values");
    sub->binder.add<std::string>("--backend", "backend", "kernel backend: scalar|avx2|auto");
    sub->binder.add<std::uint64_t>("--seed", "seed", "RNG seed");
    subs.push_back(std::move(sub));
    return *subs.back();
  };

  {
    auto& s = make_sub("align", "align faces from images + landmark CSV", run_align);
    s.binder.add<std::string>("--images", "images", "directory of .ppm frames");
    s.binder.add<std::string>("--landmarks", "landmarks", "landmark CSV");
    s.binder.add<std::string>("--out", "out", "output directory");
    s.binder.add<int>("--size", "size", "warp canvas size");
    s.binder.add<std::string>("--crop", "crop", "center|random");
    s.binder.add<int>("--crop-size", "crop_size", "crop size");
    s.binder.add<std::string>("--flip", "flip", "none|random");
  }
  {
    auto& s = make_sub("train", "supervised training", run_train);
    s.binder.add<std::string>("--data", "data", "dataset directory");
    s.binder.add<std::string>("--out", "out", "output directory");
    s.binder.add<std::string>("--task", "task", "au_regression|au_detection|fer_classification");
    s.binder.add<std::string>("--init", "init", "initial bundle path (fresh init when empty)");
    s.binder.add<std::vector<int>>("--hidden", "hidden", "encoder hidden sizes");
    s.binder.add<double>("--learning-rate", "learning_rate", "AdamW learning rate");
    s.binder.add<double>("--weight-decay", "weight_decay", "AdamW weight decay");
    s.binder.add<int>("--batch-size", "batch_size", "batch size");
    s.binder.add<int>("--max-epochs", "max_epochs", "epoch cap");
    s.binder.add<int>("--patience", "patience", "early stopping patience");
    s.binder.add<double>("--val-fraction", "val_fraction", "validation subject fraction");
  }
  {
    auto& s = make_sub("distill", "frozen-teacher feature-wise distillation", run_distill);
    s.binder.add<std::string>("--data", "data", "dataset directory");
    s.binder.add<std::string>("--out", "out", "output directory");
    s.binder.add<std::string>("--task", "task", "au_regression|au_detection|fer_classification");
    s.binder.add<std::string>("--teacher", "teacher", "teacher bundle path");
    s.binder.add<std::string>("--student-init", "student_init", "student bundle path (fresh when empty)");
    s.binder.add<std::vector<int>>("--student-hidden", "student_hidden", "student hidden sizes");
    s.binder.add<double>("--alpha", "alpha", "task loss weight");
    s.binder.add<double>("--beta", "beta", "KL loss weight");
    s.binder.add<double>("--learning-rate", "learning_rate", "AdamW learning rate");
    s.binder.add<double>("--weight-decay", "weight_decay", "AdamW weight decay");
    s.binder.add<int>("--batch-size", "batch_size", "batch size");
    s.binder.add<int>("--max-epochs", "max_epochs", "epoch cap");
    s.binder.add<int>("--patience", "patience", "early stopping patience");
    s.binder.add<double>("--val-fraction", "val_fraction", "validation subject fraction");
  }
  {
    auto& s = make_sub("eval", "cross-validated bundle evaluation", run_eval);
    s.binder.add<std::string>("--data", "data", "dataset directory");
    s.binder.add<std::string>("--bundle", "bundle", "bundle path");
    s.binder.add<std::string>("--out", "out", "output directory");
    s.binder.add<std::string>("--task", "task", "au_regression|au_detection|fer_classification");
    s.binder.add<int>("--folds", "folds", "fold count");
    s.binder.add<std::string>("--mode", "mode", "pooled|per_fold");
  }
  {
    auto& s = make_sub("infer", "run the inference pipeline to CSV", run_infer);
    s.binder.add<std::string>("--images", "images", "directory of .ppm frames");
    s.binder.add<std::string>("--landmarks", "landmarks", "landmark CSV");
    s.binder.add<std::vector<std::string>>("--bundle", "bundles", "bundle path (repeatable)");
    s.binder.add<std::string>("--out", "out", "output CSV path");
    s.binder.add<int>("--workers", "workers", "worker threads");
  }
  {
    auto& s = make_sub("bench", "latency/throughput benchmark", run_bench);
    s.binder.add<std::string>("--images", "images", "directory of .ppm frames");
    s.binder.add<std::string>("--landmarks", "landmarks", "landmark CSV");
    s.binder.add<std::vector<std::string>>("--bundle", "bundles", "bundle path (repeatable)");
    s.binder.add<int>("--synthetic", "synthetic", "generate N synthetic frames instead of reading images");
    s.binder.add<int>("--width", "width", "synthetic frame width");
    s.binder.add<int>("--height", "height", "synthetic frame height");
    s.binder.add<int>("--rounds", "rounds", "timed rounds");
    s.binder.add_flag("--preloaded,!--from-disk", "preloaded", "preload images (timed region excludes decode)");
    s.binder.add<std::string>("--fake-clock", "fake_clock", "JSON fixture with per-round durations");
    s.binder.add<int>("--workers", "workers", "worker threads");
    s.binder.add<std::string>("--out", "out", "output directory for bench.json");
  }

  std::vector<const char*> argv;
  argv.push_back("facet");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help
      return app.exit(e);
    }
    throw ConfigError(e.what());
  }

  for (auto& sub : subs) {
    if (!sub->app->parsed()) continue;
    if (!sub->config_path.empty()) merge_config_file(sub->resolved, sub->config_path);
    sub->binder.apply();
    return sub->fn(sub->resolved);
  }
  throw ConfigError("no subcommand given");
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    return run_or_throw(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace facet::cli
