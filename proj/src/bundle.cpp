#include "facet/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace facet::model {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'M', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

const char* layer_kind_name(nn::LayerKind k) {
  switch (k) {
    case nn::LayerKind::dense: return "dense";
    case nn::LayerKind::relu: return "relu";
    case nn::LayerKind::sigmoid: return "sigmoid";
    case nn::LayerKind::softmax: return "softmax";
  }
  return "?";
}

nn::LayerKind parse_layer_kind(const std::string& s, const std::string& origin) {
  if (s == "dense") return nn::LayerKind::dense;
  if (s == "relu") return nn::LayerKind::relu;
  if (s == "sigmoid") return nn::LayerKind::sigmoid;
  if (s == "softmax") return nn::LayerKind::softmax;
  throw BundleMetadataError(origin + ": unknown layer kind '" + s + "'");
}

nlohmann::json spec_to_json(const nn::NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json jl;
    jl["kind"] = layer_kind_name(l.kind);
    if (l.kind == nn::LayerKind::dense) {
      jl["in"] = l.in_dim;
      jl["out"] = l.out_dim;
      jl["bias"] = l.has_bias;
    }
    layers.push_back(jl);
  }
  nlohmann::json j;
  j["role"] = spec.role == nn::NetworkRole::encoder ? "encoder" : "classifier";
  j["layers"] = layers;
  return j;
}

nn::NetworkSpec spec_from_json(const nlohmann::json& j, const std::string& origin) {
  nn::NetworkSpec spec;
  const std::string role = j.at("role").get<std::string>();
  if (role == "encoder") {
    spec.role = nn::NetworkRole::encoder;
  } else if (role == "classifier") {
    spec.role = nn::NetworkRole::classifier;
  } else {
    throw BundleMetadataError(origin + ": unknown network role '" + role + "'");
  }
  for (const auto& jl : j.at("layers")) {
    nn::LayerSpec l;
    l.kind = parse_layer_kind(jl.at("kind").get<std::string>(), origin);
    if (l.kind == nn::LayerKind::dense) {
      l.in_dim = jl.at("in").get<int>();
      l.out_dim = jl.at("out").get<int>();
      l.has_bias = jl.at("bias").get<bool>();
    }
    spec.layers.push_back(l);
  }
  return spec;
}

void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void append_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t read_u64le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::au: return "au";
    case HeadKind::au_intensity: return "au_intensity";
    case HeadKind::au_detection: return "au_detection";
    case HeadKind::fer: return "fer";
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& s) {
  if (s == "au") return HeadKind::au;
  if (s == "au_intensity") return HeadKind::au_intensity;
  if (s == "au_detection") return HeadKind::au_detection;
  if (s == "fer") return HeadKind::fer;
  throw ConfigError("unknown head kind '" + s + "'");
}

int head_output_dim(HeadKind k, int class_count) {
  switch (k) {
    case HeadKind::au: return 17;
    case HeadKind::au_intensity: return 12;
    case HeadKind::au_detection: return 5;
    case HeadKind::fer: return class_count;
  }
  return 0;
}

namespace {

void check_params_match(const nn::NetworkSpec& spec, const nn::ParamSet& params, const char* which) {
  std::size_t slot = 0;
  for (const auto& l : spec.layers) {
    if (l.kind != nn::LayerKind::dense) continue;
    if (slot >= params.count() || params.tensors[slot].shape != std::vector<int>{l.in_dim, l.out_dim}) {
      throw ConfigError(std::string("bundle: ") + which + " weight tensor missing or misshapen");
    }
    ++slot;
    if (l.has_bias) {
      if (slot >= params.count() || params.tensors[slot].shape != std::vector<int>{l.out_dim}) {
        throw ConfigError(std::string("bundle: ") + which + " bias tensor missing or misshapen");
      }
      ++slot;
    }
  }
  if (slot != params.count()) {
    throw ConfigError(std::string("bundle: ") + which + " has surplus parameter tensors");
  }
}

}  // namespace

void validate_bundle(const ModelBundle& b) {
  nn::validate_spec(b.encoder_spec);
  nn::validate_spec(b.classifier_spec);
  check_params_match(b.encoder_spec, b.encoder_params, "encoder");
  check_params_match(b.classifier_spec, b.classifier_params, "classifier");
  if (b.encoder_spec.output_dim() != b.meta.feature_dim) {
    throw ConfigError("bundle: encoder output dim " + std::to_string(b.encoder_spec.output_dim()) +
                      " != declared feature_dim " + std::to_string(b.meta.feature_dim));
  }
  if (b.classifier_spec.input_dim() != b.meta.feature_dim) {
    throw ConfigError("bundle: classifier input dim " + std::to_string(b.classifier_spec.input_dim()) +
                      " != feature_dim " + std::to_string(b.meta.feature_dim));
  }
  if (b.meta.head == HeadKind::fer && b.meta.class_count != 7 && b.meta.class_count != 8) {
    throw ConfigError("bundle: fer head requires class_count 7 or 8");
  }
  const int want = head_output_dim(b.meta.head, b.meta.class_count);
  if (b.classifier_spec.output_dim() != want) {
    throw ConfigError("bundle: " + std::string(head_kind_name(b.meta.head)) + " head requires " +
                      std::to_string(want) + " outputs, classifier has " +
                      std::to_string(b.classifier_spec.output_dim()));
  }
}

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& b) {
  validate_bundle(b);

  nlohmann::json meta;
  meta["schema_version"] = b.meta.schema_version;
  meta["head"] = head_kind_name(b.meta.head);
  meta["feature_dim"] = b.meta.feature_dim;
  meta["class_count"] = b.meta.class_count;
  meta["provenance"] = b.meta.provenance;
  meta["encoder"] = spec_to_json(b.encoder_spec);
  meta["classifier"] = spec_to_json(b.classifier_spec);

  nlohmann::json manifest = nlohmann::json::array();
  const auto add_manifest = [&manifest](const char* prefix, const nn::ParamSet& params) {
    for (std::size_t i = 0; i < params.count(); ++i) {
      nlohmann::json entry;
      entry["name"] = std::string(prefix) + "." + params.names[i];
      entry["shape"] = params.tensors[i].shape;
      manifest.push_back(entry);
    }
  };
  add_manifest("encoder", b.encoder_params);
  add_manifest("classifier", b.classifier_params);
  meta["manifest"] = manifest;

  const std::string meta_str = meta.dump();

  std::vector<std::uint8_t> bytes;
  bytes.insert(bytes.end(), kMagic, kMagic + 4);
  append_u32le(bytes, kFormatVersion);
  append_u64le(bytes, meta_str.size());
  bytes.insert(bytes.end(), meta_str.begin(), meta_str.end());
  const auto add_blob = [&bytes](const nn::ParamSet& params) {
    for (const auto& t : params.tensors) {
      for (double v : t.data) {
        append_u32le(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  };
  add_blob(b.encoder_params);
  add_blob(b.classifier_params);
  return bytes;
}

ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 16) throw TruncatedBundleError(origin + ": file shorter than the fixed header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError(origin + ": bad magic (expected LFMB)");
  }
  const std::uint32_t version = read_u32le(bytes.data() + 4);
  if (version != kFormatVersion) {
    throw BundleVersionError(origin + ": unsupported format version " + std::to_string(version));
  }
  const std::uint64_t meta_len = read_u64le(bytes.data() + 8);
  if (bytes.size() < 16 + meta_len) {
    throw TruncatedBundleError(origin + ": metadata truncated (expected " + std::to_string(meta_len) +
                               " bytes, have " + std::to_string(bytes.size() - 16) + ")");
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw BundleMetadataError(origin + ": metadata is not valid JSON: " + e.what());
  }

  ModelBundle b;
  try {
    b.meta.schema_version = meta.at("schema_version").get<int>();
    b.meta.head = parse_head_kind(meta.at("head").get<std::string>());
    b.meta.feature_dim = meta.at("feature_dim").get<int>();
    b.meta.class_count = meta.at("class_count").get<int>();
    b.meta.provenance = meta.at("provenance").get<std::string>();
    b.encoder_spec = spec_from_json(meta.at("encoder"), origin);
    b.classifier_spec = spec_from_json(meta.at("classifier"), origin);
  } catch (const nlohmann::json::exception& e) {
    throw BundleMetadataError(origin + ": metadata field error: " + e.what());
  }

  // Manifest drives the blob layout.
  std::uint64_t total_floats = 0;
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::uint64_t count;
  };
  std::vector<Entry> entries;
  try {
    for (const auto& je : meta.at("manifest")) {
      Entry e;
      e.name = je.at("name").get<std::string>();
      e.shape = je.at("shape").get<std::vector<int>>();
      e.count = 1;
      for (int d : e.shape) {
        if (d <= 0) throw BundleMetadataError(origin + ": non-positive dimension in manifest");
        e.count *= static_cast<std::uint64_t>(d);
      }
      total_floats += e.count;
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw BundleMetadataError(origin + ": manifest error: " + e.what());
  }

  const std::uint64_t blob_bytes = bytes.size() - 16 - meta_len;
  const std::uint64_t expected = total_floats * 4;
  if (blob_bytes < expected) {
    throw TruncatedBundleError(origin + ": weight blob truncated (expected " + std::to_string(expected) +
                               " bytes, got " + std::to_string(blob_bytes) + ")");
  }
  if (blob_bytes != expected) {
    throw BundleMetadataError(origin + ": manifest declares " + std::to_string(expected) +
                              " blob bytes but file carries " + std::to_string(blob_bytes));
  }

  // The blob is consumed sequentially in manifest order; each entry routes
  // to its network by name prefix.
  const std::uint8_t* p = bytes.data() + 16 + meta_len;
  for (const auto& e : entries) {
    nn::ParamSet* target = nullptr;
    std::string short_name;
    if (e.name.rfind("encoder.", 0) == 0) {
      target = &b.encoder_params;
      short_name = e.name.substr(8);
    } else if (e.name.rfind("classifier.", 0) == 0) {
      target = &b.classifier_params;
      short_name = e.name.substr(11);
    } else {
      throw BundleMetadataError(origin + ": manifest entry '" + e.name + "' has an unknown prefix");
    }
    nn::Tensor t = nn::Tensor::zeros(e.shape);
    for (std::uint64_t i = 0; i < e.count; ++i) {
      t.data[i] = static_cast<double>(std::bit_cast<float>(read_u32le(p)));
      p += 4;
    }
    target->tensors.push_back(std::move(t));
    target->names.push_back(std::move(short_name));
  }

  try {
    validate_bundle(b);
  } catch (const ConfigError& e) {
    throw BundleMetadataError(origin + ": inconsistent bundle: " + e.what());
  }
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  const auto bytes = serialize_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write bundle: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing bundle: " + path);
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes, path);
}

std::uint64_t bundle_hash(const ModelBundle& bundle) {
  const auto bytes = serialize_bundle(bundle);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t byte : bytes) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace facet::model
