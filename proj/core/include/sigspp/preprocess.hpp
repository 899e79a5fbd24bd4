#ifndef SIGSPP_PREPROCESS_HPP_
#define SIGSPP_PREPROCESS_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "sigspp/image.hpp"
#include "sigspp/rng.hpp"

namespace sigspp {

using GrayHistogram = std::array<std::uint64_t, 256>;

GrayHistogram histogram(const GrayImage& image);

// Otsu's threshold: the gray level t maximizing the between-class variance
// of the {<= t} / {> t} split; ties resolve to the lowest level. Throws
// DataError("degenerate histogram") when fewer than two levels are present.
int otsu_threshold(const GrayHistogram& hist);

// Sets background (above the Otsu threshold) to white, then inverts every
// pixel p -> 255 - p, leaving background at exactly 0 and strokes in
// grayscale.
GrayImage remove_background_and_invert(const GrayImage& image);

// Places the image at the centered offset (floor((H-h)/2), floor((W-w)/2))
// on a zero canvas. Throws DataError("exceeds canvas ...") when it does
// not fit; callers decide between resizing and rerouting.
GrayImage center_in_canvas(const GrayImage& image, int canvas_h, int canvas_w);

GrayImage resize_bilinear(const GrayImage& image, int out_h, int out_w);

struct CanvasSize {
  int height = 0;
  int width = 0;
  bool operator==(const CanvasSize&) const = default;
};

struct ImageDims {
  int height = 0;
  int width = 0;
};

// The 5-canvas partition derived from development-set size statistics:
// outlier thresholds tau = ceil(mean + 3 std), medians over the remaining
// population, canvases (H~ x W~), (H~ x tau_w), (tau_h x W~),
// (tau_h x tau_w), (max_h x max_w).
struct CanvasSet {
  double mean_h = 0, std_h = 0;
  double mean_w = 0, std_w = 0;
  int max_h = 0, max_w = 0;
  int tau_h = 0, tau_w = 0;
  int median_h = 0, median_w = 0;
  std::array<CanvasSize, 5> canvases{};
  bool collapsed = false;  // set when rounding made some canvases coincide
};

CanvasSet compute_canvas_set(const std::vector<ImageDims>& dims);

// Canvas index for a training image: outliers (taller than tau_h or wider
// than tau_w) go to the max canvas (id 4), the rest to the quadrant given
// by the medians. Throws DataError when the image exceeds the max canvas.
int assign_canvas(const ImageDims& dims, const CanvasSet& set);

struct PadAmount {
  int height = 0;
  int width = 0;
};

// Draws per-batch pad amounts uniformly in [0, max_pad] per axis.
PadAmount draw_pad(const PadAmount& max_pad, Rng& rng);

// Enlarges the image by exactly pad (background fill 0) and places the
// original at a uniformly random offset within the slack.
GrayImage pad_random_offset(const GrayImage& image, const PadAmount& pad, Rng& rng);

// Convenience: draw_pad followed by pad_random_offset.
GrayImage augment_pad(const GrayImage& image, const PadAmount& max_pad, Rng& rng);

// Random crop to (crop_h, crop_w); offsets drawn uniformly over the slack.
GrayImage random_crop(const GrayImage& image, int crop_h, int crop_w, Rng& rng);

// Center crop used at extraction time when the stored size exceeds the
// network input.
GrayImage center_crop(const GrayImage& image, int crop_h, int crop_w);

}  // namespace sigspp

#endif  // SIGSPP_PREPROCESS_HPP_
