// odecme: diffeomorphic image registration via complex matrix exponentials.
// SPDX-License-Identifier: Apache-2.0
#include "odecme/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "odecme/error.hpp"

namespace odecme {

namespace {

std::string lower_ext(const std::string& path) {
  size_t dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// --- PNG ---

struct PngReadCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

Image load_png(const std::string& path) {
  PngReadCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw Error::io("cannot open '" + path + "'");
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw Error::io("png: allocation failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw Error::io("png: allocation failed");

  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(ctx.png))) throw Error::io("png: failed reading '" + path + "'");

  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
  png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
  int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  int color_type = png_get_color_type(ctx.png, ctx.info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  int channels = png_get_channels(ctx.png, ctx.info);
  size_t rowbytes = png_get_rowbytes(ctx.png, ctx.info);

  raw.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  double norm = bit_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < h; ++y) {
    const png_byte* row = rows[y];
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        double v;
        if (bit_depth == 16) {
          // PNG stores 16-bit samples big-endian.
          size_t off = (static_cast<size_t>(x) * channels + c) * 2;
          v = static_cast<double>((row[off] << 8) | row[off + 1]);
        } else {
          v = static_cast<double>(row[static_cast<size_t>(x) * channels + c]);
        }
        img.at(static_cast<int>(x), static_cast<int>(y), 0, c) = v / norm;
      }
  }
  return img;
}

void save_png(const Image& img, const std::string& path) {
  if (img.dims == 3) throw Error::invalid("png: cannot store a volume; use .raw");
  int color_type;
  switch (img.channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 2: color_type = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default: throw Error::invalid("png: unsupported channel count " +
                                  std::to_string(img.channels));
  }

  PngWriteCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw Error::io("cannot open '" + path + "' for writing");
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw Error::io("png: allocation failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw Error::io("png: allocation failed");

  std::vector<png_byte> raw(static_cast<size_t>(img.width) * img.height * img.channels);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  if (setjmp(png_jmpbuf(ctx.png))) throw Error::io("png: failed writing '" + path + "'");

  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (int y = 0; y < img.height; ++y) {
    png_bytep row = raw.data() + static_cast<size_t>(y) * img.width * img.channels;
    rows[static_cast<size_t>(y)] = row;
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = std::clamp(img.at(x, y, 0, c), 0.0, 1.0);
        row[static_cast<size_t>(x) * img.channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
  }
  png_set_rows(ctx.png, ctx.info, rows.data());
  png_write_png(ctx.png, ctx.info, PNG_TRANSFORM_IDENTITY, nullptr);
}

// --- PGM / PPM ---

int pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments, then reads one unsigned integer.
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  if (!in || value < 0) throw Error::io("pnm: malformed header");
  return value;
}

Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "'");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  int channels;
  if (magic[0] == 'P' && magic[1] == '5')
    channels = 1;
  else if (magic[0] == 'P' && magic[1] == '6')
    channels = 3;
  else
    throw Error::io("pnm: expected binary P5 or P6 in '" + path + "'");

  int w = pnm_token(in);
  int h = pnm_token(in);
  int maxval = pnm_token(in);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw Error::io("pnm: bad header values");
  in.get();  // single whitespace byte before the raster

  int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw Error::io("pnm: truncated raster in '" + path + "'");

  Image img(w, h, channels);
  size_t i = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        int v;
        if (bytes == 2) {
          v = (raw[i] << 8) | raw[i + 1];  // big-endian per the format
          i += 2;
        } else {
          v = raw[i++];
        }
        img.at(x, y, 0, c) = static_cast<double>(v) / maxval;
      }
  return img;
}

void save_pnm(const Image& img, const std::string& path) {
  if (img.dims == 3) throw Error::invalid("pnm: cannot store a volume; use .raw");
  const char* magic;
  if (img.channels == 1)
    magic = "P5";
  else if (img.channels == 3)
    magic = "P6";
  else
    throw Error::invalid("pnm: only 1 or 3 channels supported, got " +
                         std::to_string(img.channels));
  std::string ext = lower_ext(path);
  if ((ext == "pgm") != (img.channels == 1))
    throw Error::invalid("pnm: extension does not match channel count");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  out << magic << "\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<size_t>(img.width) * img.height * img.channels * 2);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = std::clamp(img.at(x, y, 0, c), 0.0, 1.0);
        int q = static_cast<int>(std::lround(v * 65535.0));
        raw.push_back(static_cast<unsigned char>(q >> 8));
        raw.push_back(static_cast<unsigned char>(q & 0xff));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out.flush()) throw Error::io("failed writing '" + path + "'");
}

// --- raw float32 volume + sidecar ---

Image load_raw(const std::string& path) {
  std::string sidecar_path = path + ".json";
  std::ifstream side(sidecar_path);
  if (!side) throw Error::io("missing sidecar '" + sidecar_path + "'");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error::io("sidecar '" + sidecar_path + "': " + e.what());
  }
  if (!meta.contains("dims") || !meta["dims"].is_array() || meta["dims"].size() != 3)
    throw Error::io("sidecar must carry dims:[x,y,z]");
  if (meta.value("dtype", "") != "f32le")
    throw Error::io("sidecar dtype must be \"f32le\"");
  int w = meta["dims"][0].get<int>();
  int h = meta["dims"][1].get<int>();
  int d = meta["dims"][2].get<int>();
  int channels = meta.value("channels", 1);
  if (w < 1 || h < 1 || d < 1 || channels < 1) throw Error::io("sidecar dims must be positive");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "'");
  in.seekg(0, std::ios::end);
  auto file_size = static_cast<size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  size_t expected = static_cast<size_t>(w) * h * d * channels * 4;
  if (file_size != expected)
    throw Error::io("raw volume size mismatch: sidecar dims need " + std::to_string(expected) +
                    " bytes, file has " + std::to_string(file_size));

  std::vector<unsigned char> raw(file_size);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(file_size));
  if (static_cast<size_t>(in.gcount()) != file_size) throw Error::io("raw volume truncated");

  Image img(w, h, d, channels, true);
  for (size_t i = 0; i < img.data.size(); ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                         (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                         (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                         (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    float f = std::bit_cast<float>(bits);
    img.data[i] = std::clamp(static_cast<double>(f), 0.0, 1.0);
  }
  return img;
}

void save_raw(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  std::vector<unsigned char> raw(img.data.size() * 4);
  for (size_t i = 0; i < img.data.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.data[i]));
    raw[4 * i] = static_cast<unsigned char>(bits & 0xff);
    raw[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    raw[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    raw[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out.flush()) throw Error::io("failed writing '" + path + "'");

  nlohmann::ordered_json meta;
  meta["dims"] = {img.width, img.height, img.depth};
  meta["channels"] = img.channels;
  meta["dtype"] = "f32le";
  std::ofstream side(path + ".json");
  if (!side) throw Error::io("cannot open '" + path + ".json' for writing");
  side << meta.dump(2) << "\n";
  if (!side.flush()) throw Error::io("failed writing '" + path + ".json'");
}

}  // namespace

bool is_volume_path(const std::string& path) {
  std::string ext = lower_ext(path);
  return ext == "raw" || ext == "f32";
}

Image load_image(const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext == "png") return load_png(path);
  if (ext == "pgm" || ext == "ppm") return load_pnm(path);
  if (ext == "raw" || ext == "f32") return load_raw(path);
  throw Error::io("unsupported image extension '" + ext + "' (png, pgm, ppm, raw, f32)");
}

void save_image(const Image& img, const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext == "png") return save_png(img, path);
  if (ext == "pgm" || ext == "ppm") return save_pnm(img, path);
  if (ext == "raw" || ext == "f32") return save_raw(img, path);
  throw Error::io("unsupported image extension '" + ext + "' (png, pgm, ppm, raw, f32)");
}

}  // namespace odecme
