#include "sigspp/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace sigspp {

GrayHistogram histogram(const GrayImage& image) {
  GrayHistogram hist{};
  for (std::uint8_t p : image.pixels) ++hist[p];
  return hist;
}

int otsu_threshold(const GrayHistogram& hist) {
  std::uint64_t total = 0;
  int distinct = 0;
  double weighted_sum = 0.0;
  for (int level = 0; level < 256; ++level) {
    total += hist[level];
    if (hist[level] > 0) ++distinct;
    weighted_sum += static_cast<double>(level) * hist[level];
  }
  if (distinct < 2) throw DataError("degenerate histogram: needs >= 2 gray levels");

  // Sweep t, maintaining class 0 = {<= t} statistics incrementally.
  double best_variance = -1.0;
  int best_t = 0;
  std::uint64_t count0 = 0;
  double sum0 = 0.0;
  for (int t = 0; t < 255; ++t) {
    count0 += hist[t];
    sum0 += static_cast<double>(t) * hist[t];
    if (count0 == 0) continue;
    const std::uint64_t count1 = total - count0;
    if (count1 == 0) break;
    const double w0 = static_cast<double>(count0) / total;
    const double w1 = static_cast<double>(count1) / total;
    const double mu0 = sum0 / count0;
    const double mu1 = (weighted_sum - sum0) / count1;
    const double variance = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (variance > best_variance) {  // strict: ties keep the lowest level
      best_variance = variance;
      best_t = t;
    }
  }
  return best_t;
}

GrayImage remove_background_and_invert(const GrayImage& image) {
  const int threshold = otsu_threshold(histogram(image));
  GrayImage out(image.height, image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const std::uint8_t p = image.pixels[i] > threshold ? 255 : image.pixels[i];
    out.pixels[i] = static_cast<std::uint8_t>(255 - p);
  }
  return out;
}

GrayImage center_in_canvas(const GrayImage& image, int canvas_h, int canvas_w) {
  if (image.height > canvas_h || image.width > canvas_w) {
    throw DataError("image " + std::to_string(image.height) + "x" +
                    std::to_string(image.width) + " exceeds canvas " +
                    std::to_string(canvas_h) + "x" + std::to_string(canvas_w));
  }
  GrayImage out(canvas_h, canvas_w, 0);
  const int off_y = (canvas_h - image.height) / 2;
  const int off_x = (canvas_w - image.width) / 2;
  for (int y = 0; y < image.height; ++y) {
    std::copy_n(image.pixels.data() + static_cast<std::size_t>(y) * image.width,
                image.width,
                out.pixels.data() + static_cast<std::size_t>(y + off_y) * canvas_w + off_x);
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& image, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ConfigError("resize_bilinear: target must be >= 1x1");
  if (out_h == image.height && out_w == image.width) return image;
  GrayImage out(out_h, out_w);
  const double scale_y = static_cast<double>(image.height) / out_h;
  const double scale_x = static_cast<double>(image.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // pixel-center alignment: sample at (i + 0.5) * scale - 0.5
    double sy = (y + 0.5) * scale_y - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * scale_x - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - x0;
      const double top = (1.0 - fx) * image.at(y0, x0) + fx * image.at(y0, x1);
      const double bottom = (1.0 - fx) * image.at(y1, x0) + fx * image.at(y1, x1);
      const double v = (1.0 - fy) * top + fy * bottom;
      out.at(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

CanvasSet compute_canvas_set(const std::vector<ImageDims>& dims) {
  if (dims.size() < 2) {
    throw DataError("compute_canvas_set: needs at least 2 images");
  }
  CanvasSet set;
  double sum_h = 0, sum_w = 0;
  for (const auto& d : dims) {
    sum_h += d.height;
    sum_w += d.width;
    set.max_h = std::max(set.max_h, d.height);
    set.max_w = std::max(set.max_w, d.width);
  }
  set.mean_h = sum_h / dims.size();
  set.mean_w = sum_w / dims.size();
  double sq_h = 0, sq_w = 0;
  for (const auto& d : dims) {
    sq_h += (d.height - set.mean_h) * (d.height - set.mean_h);
    sq_w += (d.width - set.mean_w) * (d.width - set.mean_w);
  }
  set.std_h = std::sqrt(sq_h / dims.size());
  set.std_w = std::sqrt(sq_w / dims.size());
  set.tau_h = static_cast<int>(std::ceil(set.mean_h + 3.0 * set.std_h));
  set.tau_w = static_cast<int>(std::ceil(set.mean_w + 3.0 * set.std_w));

  // Medians over the non-outlier population; lower median for even counts.
  std::vector<int> heights, widths;
  for (const auto& d : dims) {
    if (d.height > set.tau_h || d.width > set.tau_w) continue;
    heights.push_back(d.height);
    widths.push_back(d.width);
  }
  if (heights.empty()) {
    // All images are outliers only when the thresholds round below every
    // size; fall back to the full population.
    for (const auto& d : dims) {
      heights.push_back(d.height);
      widths.push_back(d.width);
    }
  }
  std::sort(heights.begin(), heights.end());
  std::sort(widths.begin(), widths.end());
  set.median_h = heights[(heights.size() - 1) / 2];
  set.median_w = widths[(widths.size() - 1) / 2];

  set.canvases = {CanvasSize{set.median_h, set.median_w},
                  CanvasSize{set.median_h, set.tau_w},
                  CanvasSize{set.tau_h, set.median_w},
                  CanvasSize{set.tau_h, set.tau_w},
                  CanvasSize{set.max_h, set.max_w}};
  for (std::size_t a = 0; a < set.canvases.size() && !set.collapsed; ++a) {
    for (std::size_t b = a + 1; b < set.canvases.size(); ++b) {
      if (set.canvases[a] == set.canvases[b]) {
        set.collapsed = true;
        break;
      }
    }
  }
  return set;
}

int assign_canvas(const ImageDims& dims, const CanvasSet& set) {
  if (dims.height > set.canvases[4].height || dims.width > set.canvases[4].width) {
    throw DataError("assign_canvas: image " + std::to_string(dims.height) + "x" +
                    std::to_string(dims.width) + " exceeds the max canvas");
  }
  if (dims.height > set.tau_h || dims.width > set.tau_w) return 4;
  if (dims.height <= set.median_h) {
    return dims.width <= set.median_w ? 0 : 1;
  }
  return dims.width <= set.median_w ? 2 : 3;
}

PadAmount draw_pad(const PadAmount& max_pad, Rng& rng) {
  if (max_pad.height < 0 || max_pad.width < 0) {
    throw ConfigError("draw_pad: max pad must be >= 0");
  }
  return PadAmount{static_cast<int>(rng.uniform_int(0, max_pad.height)),
                   static_cast<int>(rng.uniform_int(0, max_pad.width))};
}

GrayImage pad_random_offset(const GrayImage& image, const PadAmount& pad, Rng& rng) {
  if (pad.height == 0 && pad.width == 0) return image;
  GrayImage out(image.height + pad.height, image.width + pad.width, 0);
  const int off_y = static_cast<int>(rng.uniform_int(0, pad.height));
  const int off_x = static_cast<int>(rng.uniform_int(0, pad.width));
  for (int y = 0; y < image.height; ++y) {
    std::copy_n(image.pixels.data() + static_cast<std::size_t>(y) * image.width,
                image.width,
                out.pixels.data() + static_cast<std::size_t>(y + off_y) * out.width + off_x);
  }
  return out;
}

GrayImage augment_pad(const GrayImage& image, const PadAmount& max_pad, Rng& rng) {
  return pad_random_offset(image, draw_pad(max_pad, rng), rng);
}

GrayImage random_crop(const GrayImage& image, int crop_h, int crop_w, Rng& rng) {
  if (crop_h > image.height || crop_w > image.width) {
    throw DataError("random_crop: crop larger than image");
  }
  const int off_y = static_cast<int>(rng.uniform_int(0, image.height - crop_h));
  const int off_x = static_cast<int>(rng.uniform_int(0, image.width - crop_w));
  GrayImage out(crop_h, crop_w);
  for (int y = 0; y < crop_h; ++y) {
    std::copy_n(image.pixels.data() + static_cast<std::size_t>(y + off_y) * image.width + off_x,
                crop_w, out.pixels.data() + static_cast<std::size_t>(y) * crop_w);
  }
  return out;
}

GrayImage center_crop(const GrayImage& image, int crop_h, int crop_w) {
  if (crop_h > image.height || crop_w > image.width) {
    throw DataError("center_crop: crop larger than image");
  }
  const int off_y = (image.height - crop_h) / 2;
  const int off_x = (image.width - crop_w) / 2;
  GrayImage out(crop_h, crop_w);
  for (int y = 0; y < crop_h; ++y) {
    std::copy_n(image.pixels.data() + static_cast<std::size_t>(y + off_y) * image.width + off_x,
                crop_w, out.pixels.data() + static_cast<std::size_t>(y) * crop_w);
  }
  return out;
}

}  // namespace sigspp
