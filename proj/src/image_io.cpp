#include "facet/image_io.hpp"

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace facet::img {

namespace {

int read_pnm_token(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments per the PNM grammar.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw ParseError(path + ": unexpected end of PNM header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw ParseError(path + ": malformed PNM header token");
  return value;
}

void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

align::ImageF32 read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  int channels = 0;
  if (m0 == 'P' && m1 == '6') {
    channels = 3;
  } else if (m0 == 'P' && m1 == '5') {
    channels = 1;
  } else {
    throw ParseError(path + ": not a binary PPM/PGM (P6/P5) file");
  }
  const int width = read_pnm_token(in, path);
  const int height = read_pnm_token(in, path);
  const int maxval = read_pnm_token(in, path);
  if (maxval != 255) throw ParseError(path + ": only 8-bit PNM supported (maxval 255)");
  if (width <= 0 || height <= 0) throw ParseError(path + ": bad image dimensions");

  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint8_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw ParseError(path + ": truncated pixel data");
  }

  // Interleaved u8 -> planar f32 in [0, 1].
  align::ImageF32 img = align::ImageF32::create(width, height, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::uint8_t v = raw[(static_cast<std::size_t>(y) * width + x) * channels + c];
        img.at(c, y, x) = static_cast<float>(v) / 255.0f;
      }
    }
  }
  return img;
}

void write_pnm(const align::ImageF32& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3) {
    throw DataError("write_pnm: only 1- or 3-channel images");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << (image.channels == 3 ? "P6" : "P5") << "\n"
      << image.width << " " << image.height << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(image.width) * image.height * image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        float v = image.at(c, y, x);
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        raw[(static_cast<std::size_t>(y) * image.width + x) * image.channels + c] =
            static_cast<std::uint8_t>(v * 255.0f + 0.5f);
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing image: " + path);
}

FloatTensor read_ften(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "FTEN", 4) != 0) {
    throw ParseError(path + ": not an FTEN tensor file");
  }
  const std::uint32_t version = read_u32le(bytes.data() + 4);
  if (version != 1) throw ParseError(path + ": unsupported FTEN version " + std::to_string(version));
  const std::uint32_t ndim = read_u32le(bytes.data() + 8);
  if (ndim == 0 || ndim > 8) throw ParseError(path + ": bad FTEN rank");
  std::size_t offset = 12;
  if (bytes.size() < offset + 4ull * ndim) throw ParseError(path + ": truncated FTEN header");
  FloatTensor t;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = read_u32le(bytes.data() + offset);
    offset += 4;
    if (d == 0) throw ParseError(path + ": zero FTEN dimension");
    t.shape.push_back(static_cast<int>(d));
    count *= d;
  }
  if (bytes.size() != offset + 4ull * count) {
    throw ParseError(path + ": FTEN payload size mismatch");
  }
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.data[i] = std::bit_cast<float>(read_u32le(bytes.data() + offset + 4 * i));
  }
  return t;
}

void write_ften(const FloatTensor& tensor, const std::string& path) {
  if (tensor.shape.empty()) throw DataError("write_ften: empty shape");
  std::size_t count = 1;
  for (int d : tensor.shape) {
    if (d <= 0) throw DataError("write_ften: non-positive dimension");
    count *= static_cast<std::size_t>(d);
  }
  if (count != tensor.data.size()) throw DataError("write_ften: shape/data mismatch");

  std::vector<std::uint8_t> bytes;
  bytes.reserve(12 + 4 * tensor.shape.size() + 4 * count);
  bytes.insert(bytes.end(), {'F', 'T', 'E', 'N'});
  append_u32le(bytes, 1);
  append_u32le(bytes, static_cast<std::uint32_t>(tensor.shape.size()));
  for (int d : tensor.shape) append_u32le(bytes, static_cast<std::uint32_t>(d));
  for (float v : tensor.data) append_u32le(bytes, std::bit_cast<std::uint32_t>(v));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tensor: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing tensor: " + path);
}

align::ImageF32 image_from_ften(const FloatTensor& t) {
  if (t.shape.size() != 3) throw DataError("image_from_ften: expected rank-3 (c, h, w)");
  align::ImageF32 img = align::ImageF32::create(t.shape[2], t.shape[1], t.shape[0]);
  img.data = t.data;
  return img;
}

FloatTensor ften_from_image(const align::ImageF32& image) {
  FloatTensor t;
  t.shape = {image.channels, image.height, image.width};
  t.data = image.data;
  return t;
}

}  // namespace facet::img
