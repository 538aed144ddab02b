#pragma once

#include <string>
#include <vector>

#include "pgdenoise/rng.hpp"

namespace pgd {

// 2-D grid of row-major float intensities. Nominal range is [0,1] for data
// loaded from integer formats; float sources are unbounded above. All values
// are finite; I/O validates this on load.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height;
  }
};

// Geometric augmentation: rotate counter-clockwise by `rotation` degrees
// (0/90/180/270), then mirror horizontally, then vertically. Pixel-exact.
struct AugmentOp {
  int rotation = 0;
  bool flip_h = false;
  bool flip_v = false;
};

// Reads a binary PGM ("P5", 8- or 16-bit, scaled to [0,1] by the declared
// maxval) or a grayscale PFM ("Pf", float passthrough). Format is detected
// from the magic bytes only.
Image load_image(const std::string& path);

// Writes by extension: ".pgm" as 8-bit P5 with clamp(round(v*255), 0, 255),
// ".pfm" as little-endian grayscale float at full precision.
void save_image(const Image& img, const std::string& path);

// size x size contiguous sub-image at a uniformly drawn valid offset.
Image random_crop(const Image& img, int size, Rng& rng);

Image augment(const Image& img, AugmentOp op);

// Op undoing `op`: augment(augment(img, op), inverse(op)) == img.
AugmentOp inverse(AugmentOp op);

// Uniform draw over the 16 distinct ops.
AugmentOp random_augment_op(Rng& rng);

// Mirror-pads an out-of-range coordinate into [0, n): -1 -> 0, n -> n-1, ...
int reflect_index(int i, int n);

}  // namespace pgd
