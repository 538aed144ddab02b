#include "pgdenoise/image.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>

#include "pgdenoise/errors.hpp"

namespace pgd {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(FILE* f, const std::string& path) {
  std::string tok;
  int c;
  while ((c = std::fgetc(f)) != EOF) {
    if (c == '#') {
      while ((c = std::fgetc(f)) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError(path, "truncated file: unexpected end of header");
  return tok;
}

long parse_long(const std::string& tok, const std::string& path, const char* what) {
  try {
    size_t pos = 0;
    long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path, std::string("invalid ") + what + " in header: '" + tok + "'");
  }
}

double parse_double(const std::string& tok, const std::string& path, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path, std::string("invalid ") + what + " in header: '" + tok + "'");
  }
}

void check_dims(long w, long h, const std::string& path) {
  if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20)
    throw IoError(path, "dimension mismatch: bad image size " + std::to_string(w) + "x" +
                            std::to_string(h));
}

float swap_float(float v) {
  uint32_t u = std::bit_cast<uint32_t>(v);
  u = __builtin_bswap32(u);
  return std::bit_cast<float>(u);
}

Image load_pgm(FILE* f, const std::string& path) {
  const long w = parse_long(next_token(f, path), path, "width");
  const long h = parse_long(next_token(f, path), path, "height");
  check_dims(w, h, path);
  const long maxval = parse_long(next_token(f, path), path, "maxval");
  if (maxval <= 0 || maxval > 65535)
    throw IoError(path, "unsupported format: maxval " + std::to_string(maxval));

  Image img(static_cast<int>(w), static_cast<int>(h));
  const size_t n = img.size();
  const double scale = 1.0 / static_cast<double>(maxval);
  if (maxval < 256) {
    std::vector<uint8_t> raw(n);
    if (std::fread(raw.data(), 1, n, f) != n) throw IoError(path, "truncated file: pixel data");
    for (size_t i = 0; i < n; ++i) img.data[i] = static_cast<float>(raw[i] * scale);
  } else {
    // 16-bit PGM stores big-endian sample pairs.
    std::vector<uint8_t> raw(n * 2);
    if (std::fread(raw.data(), 1, raw.size(), f) != raw.size())
      throw IoError(path, "truncated file: pixel data");
    for (size_t i = 0; i < n; ++i) {
      const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
      img.data[i] = static_cast<float>(v * scale);
    }
  }
  return img;
}

Image load_pfm(FILE* f, const std::string& path) {
  const long w = parse_long(next_token(f, path), path, "width");
  const long h = parse_long(next_token(f, path), path, "height");
  check_dims(w, h, path);
  const double scale = parse_double(next_token(f, path), path, "scale");
  if (scale == 0) throw IoError(path, "unsupported format: zero scale");
  const bool little_endian = scale < 0;

  Image img(static_cast<int>(w), static_cast<int>(h));
  std::vector<float> row(static_cast<size_t>(w));
  // PFM scanlines run bottom-to-top.
  for (long y = h - 1; y >= 0; --y) {
    if (std::fread(row.data(), sizeof(float), row.size(), f) != row.size())
      throw IoError(path, "truncated file: pixel data");
    for (long x = 0; x < w; ++x) {
      float v = little_endian == (std::endian::native == std::endian::little)
                    ? row[x]
                    : swap_float(row[x]);
      if (!std::isfinite(v))
        throw IoError(path, "non-finite pixel at (" + std::to_string(x) + "," + std::to_string(y) + ")");
      img.at(static_cast<int>(x), static_cast<int>(y)) = v;
    }
  }
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError(path, "cannot open file");
  char magic[2];
  if (std::fread(magic, 1, 2, f.get()) != 2) throw IoError(path, "truncated file: missing magic");
  if (magic[0] == 'P' && magic[1] == '5') return load_pgm(f.get(), path);
  if (magic[0] == 'P' && magic[1] == 'f') return load_pfm(f.get(), path);
  if (magic[0] == 'P' && magic[1] == 'F')
    throw IoError(path, "unsupported format: color PFM (grayscale 'Pf' only)");
  throw IoError(path, std::string("unsupported format: magic '") + magic[0] + magic[1] + "'");
}

void save_image(const Image& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0 || img.size() != static_cast<size_t>(img.width) * img.height)
    throw ArgumentError("save_image: malformed image");
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError(path, "cannot open file for writing");

  if (ext == ".pgm") {
    std::fprintf(f.get(), "P5\n%d %d\n255\n", img.width, img.height);
    std::vector<uint8_t> raw(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
      const double v = std::round(static_cast<double>(img.data[i]) * 255.0);
      raw[i] = static_cast<uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
    if (std::fwrite(raw.data(), 1, raw.size(), f.get()) != raw.size())
      throw IoError(path, "write failed");
  } else if (ext == ".pfm") {
    std::fprintf(f.get(), "Pf\n%d %d\n-1.0\n", img.width, img.height);
    std::vector<float> row(static_cast<size_t>(img.width));
    for (int y = img.height - 1; y >= 0; --y) {
      for (int x = 0; x < img.width; ++x)
        row[x] = std::endian::native == std::endian::little ? img.at(x, y) : swap_float(img.at(x, y));
      if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) != row.size())
        throw IoError(path, "write failed");
    }
  } else {
    throw IoError(path, "unsupported format: extension '" + ext + "' (use .pgm or .pfm)");
  }
  if (std::fflush(f.get()) != 0) throw IoError(path, "write failed");
}

Image random_crop(const Image& img, int size, Rng& rng) {
  if (size <= 0) throw ArgumentError("random_crop: size must be positive");
  if (size > img.width || size > img.height)
    throw ArgumentError("random_crop: size " + std::to_string(size) + " exceeds image " +
                        std::to_string(img.width) + "x" + std::to_string(img.height));
  const int ox = static_cast<int>(rng.below(static_cast<uint64_t>(img.width - size + 1)));
  const int oy = static_cast<int>(rng.below(static_cast<uint64_t>(img.height - size + 1)));
  Image out(size, size);
  for (int y = 0; y < size; ++y) {
    const float* src = img.data.data() + static_cast<size_t>(oy + y) * img.width + ox;
    std::memcpy(out.data.data() + static_cast<size_t>(y) * size, src,
                static_cast<size_t>(size) * sizeof(float));
  }
  return out;
}

Image augment(const Image& img, AugmentOp op) {
  Image rot;
  switch (((op.rotation % 360) + 360) % 360) {
    case 0:
      rot = img;
      break;
    case 90:  // counter-clockwise
      rot = Image(img.height, img.width);
      for (int y = 0; y < rot.height; ++y)
        for (int x = 0; x < rot.width; ++x) rot.at(x, y) = img.at(img.width - 1 - y, x);
      break;
    case 180:
      rot = Image(img.width, img.height);
      for (int y = 0; y < rot.height; ++y)
        for (int x = 0; x < rot.width; ++x) rot.at(x, y) = img.at(img.width - 1 - x, img.height - 1 - y);
      break;
    case 270:
      rot = Image(img.height, img.width);
      for (int y = 0; y < rot.height; ++y)
        for (int x = 0; x < rot.width; ++x) rot.at(x, y) = img.at(y, img.height - 1 - x);
      break;
    default:
      throw ArgumentError("augment: rotation must be a multiple of 90, got " +
                          std::to_string(op.rotation));
  }
  if (!op.flip_h && !op.flip_v) return rot;
  Image out(rot.width, rot.height);
  for (int y = 0; y < rot.height; ++y) {
    const int sy = op.flip_v ? rot.height - 1 - y : y;
    for (int x = 0; x < rot.width; ++x) {
      const int sx = op.flip_h ? rot.width - 1 - x : x;
      out.at(x, y) = rot.at(sx, sy);
    }
  }
  return out;
}

AugmentOp inverse(AugmentOp op) {
  const int k = ((op.rotation % 360) + 360) % 360;
  if (!op.flip_h && !op.flip_v) return {(360 - k) % 360, false, false};
  // A flip conjugates a rotation into its inverse, so single-flip ops are
  // involutions; the double flip equals a 180-degree rotation.
  if (op.flip_h != op.flip_v) return {k, op.flip_h, op.flip_v};
  return {(360 - (k + 180) % 360) % 360, false, false};
}

AugmentOp random_augment_op(Rng& rng) {
  AugmentOp op;
  op.rotation = 90 * static_cast<int>(rng.below(4));
  op.flip_h = rng.below(2) != 0;
  op.flip_v = rng.below(2) != 0;
  return op;
}

int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace pgd
