// Copyright (c) 2026, The idlike Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IDLIKE_IMAGE_HPP_
#define IDLIKE_IMAGE_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idlike/errors.hpp"

namespace idlike {

/// Dense H x W x channels image, interleaved, values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c = 1) : height(h), width(w), channels(c), pixels(h * w * c, 0.0) {}

  double& at(std::size_t y, std::size_t x, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const { return pixels[(y * width + x) * channels + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Axis-aligned crop in pixel units.
struct CropBox {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  friend bool operator==(const CropBox&, const CropBox&) = default;
};

/// A (shared, immutable) image plus an optional crop region.
struct ImageRef {
  std::shared_ptr<const Image> image;
  std::optional<CropBox> crop;

  CropBox region() const {
    if (crop) return *crop;
    return CropBox{0, 0, image ? image->width : 0, image ? image->height : 0};
  }
};

inline ImageRef make_image_ref(Image img) {
  return ImageRef{std::make_shared<const Image>(std::move(img)), std::nullopt};
}

inline void validate(const ImageRef& ref) {
  enforce(ref.image != nullptr, ErrorCode::InvalidImage, "null image");
  const Image& img = *ref.image;
  enforce(img.height > 0 && img.width > 0 && img.channels > 0, ErrorCode::InvalidImage, "empty image");
  enforce(img.pixels.size() == img.height * img.width * img.channels, ErrorCode::InvalidImage,
          "pixel buffer does not match H x W x C");
  for (double p : img.pixels)
    enforce(p >= 0.0 && p <= 1.0, ErrorCode::InvalidImage, "pixel value outside [0, 1]");
  if (ref.crop) {
    const CropBox& b = *ref.crop;
    enforce(b.w > 0 && b.h > 0, ErrorCode::InvalidImage, "empty crop box");
    enforce(b.x + b.w <= img.width && b.y + b.h <= img.height, ErrorCode::InvalidImage,
            "crop box exceeds image bounds");
  }
}

namespace detail {

// Coverage of the unit source cell [i, i+1) by the interval [lo, hi).
inline double overlap(double lo, double hi, std::size_t i) {
  const double a = std::max(lo, static_cast<double>(i));
  const double b = std::min(hi, static_cast<double>(i + 1));
  return b > a ? b - a : 0.0;
}

}  // namespace detail

/**
 * Crop the referenced region and resample it to out_h x out_w with
 * box-filter (area) interpolation. Upsampling degenerates to nearest cell.
 */
inline Image materialize(const ImageRef& ref, std::size_t out_h, std::size_t out_w) {
  validate(ref);
  const Image& src = *ref.image;
  const CropBox box = ref.region();
  Image out(out_h, out_w, src.channels);
  const double sy = static_cast<double>(box.h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(box.w) / static_cast<double>(out_w);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double y0 = box.y + oy * sy;
    const double y1 = y0 + sy;
    const auto ylo = static_cast<std::size_t>(std::floor(y0));
    const auto yhi = std::min(static_cast<std::size_t>(std::ceil(y1)), box.y + box.h);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double x0 = box.x + ox * sx;
      const double x1 = x0 + sx;
      const auto xlo = static_cast<std::size_t>(std::floor(x0));
      const auto xhi = std::min(static_cast<std::size_t>(std::ceil(x1)), box.x + box.w);
      for (std::size_t c = 0; c < src.channels; ++c) {
        double acc = 0.0;
        double wsum = 0.0;
        for (std::size_t y = ylo; y < yhi; ++y) {
          const double wy = detail::overlap(y0, y1, y);
          if (wy == 0.0) continue;
          for (std::size_t x = xlo; x < xhi; ++x) {
            const double wxy = wy * detail::overlap(x0, x1, x);
            acc += wxy * src.at(y, x, c);
            wsum += wxy;
          }
        }
        out.at(oy, ox, c) = wsum > 0.0 ? acc / wsum : 0.0;
      }
    }
  }
  return out;
}

// Binary netpbm (P5 gray / P6 rgb, maxval <= 255) is the on-disk image format.

inline Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  enforce(static_cast<bool>(in), ErrorCode::MissingFile, "cannot open image " + path.string());
  auto next_token = [&in]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  const std::string magic = next_token();
  enforce(magic == "P5" || magic == "P6", ErrorCode::InvalidImage, path.string() + ": unsupported format " + magic);
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidImage, path.string() + ": malformed header");
  }
  enforce(w > 0 && h > 0 && maxval > 0 && maxval <= 255, ErrorCode::InvalidImage, path.string() + ": bad header");
  const std::size_t channels = magic == "P5" ? 1 : 3;
  Image img(h, w, channels);
  std::vector<unsigned char> raw(h * w * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  enforce(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorCode::InvalidImage, path.string() + ": truncated");
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = static_cast<double>(raw[i]) / static_cast<double>(maxval);
  return img;
}

inline void write_pnm(const std::filesystem::path& path, const Image& img) {
  enforce(img.channels == 1 || img.channels == 3, ErrorCode::InvalidImage, "pnm supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  enforce(static_cast<bool>(out), ErrorCode::MissingFile, "cannot write image " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace idlike

#endif  // IDLIKE_IMAGE_HPP_
