#ifndef SIGSPP_SYNTH_HPP_
#define SIGSPP_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sigspp/image.hpp"
#include "sigspp/manifest.hpp"
#include "sigspp/rng.hpp"

namespace sigspp {

// Per-writer handwriting parameters, all derived deterministically from
// (dataset seed, writer id). Stand-in for real signature styles at desk
// scale; not a model of human signatures.
struct SyntheticStyle {
  int strokes = 0;
  std::vector<int> points_per_stroke;
  std::vector<double> phases;       // one oscillation phase per stroke
  std::vector<double> y_centers;    // vertical band per stroke
  std::vector<double> amplitudes;   // oscillation amplitude per stroke
  double frequency = 0.0;           // oscillation frequency
  double slant = 0.0;               // horizontal shear
  double stroke_width = 0.0;        // relative to the smaller image dim
  double ink = 0.0;                 // base stroke darkness (0 = black)
  double aspect = 0.0;              // preferred width/height ratio

  bool operator==(const SyntheticStyle&) const = default;
};

SyntheticStyle writer_style(std::uint64_t dataset_seed, int writer_id);

struct SizeRange {
  int min_h = 100, max_h = 300;
  int min_w = 100, max_w = 300;
};

// Dimensions for one sample: height uniform in range, width follows the
// writer's aspect with jitter, clamped into range.
void draw_sample_dims(const SyntheticStyle& style, const SizeRange& range, Rng& rng,
                      int* h, int* w);

// Renders the style's skeleton perturbed by per-sample jitter onto a white
// background (dark strokes, light scan noise). jitter_scale 1 is the
// writer's natural variation; skilled stand-ins use larger values plus a
// systematic warp from the forger's hand.
GrayImage render_signature(const SyntheticStyle& style, int height, int width,
                           Rng& sample_rng, double jitter_scale = 1.0,
                           const SyntheticStyle* forger_hand = nullptr);

// Genuine sample `index` of a writer.
GrayImage synth_genuine(std::uint64_t dataset_seed, int writer_id, int index,
                        const SizeRange& range, int* out_h = nullptr, int* out_w = nullptr);

// Skilled-forgery stand-in: the target's skeleton traced by another
// writer's hand (larger jitter, warped, the forger's pen width and ink).
GrayImage synth_skilled_forgery(std::uint64_t dataset_seed, int target_writer,
                                int forger_writer, int index, const SizeRange& range);

struct SynthDatasetConfig {
  int writers = 20;
  int dev_writers = 10;  // first ids become the development split
  int genuine_per_writer = 8;
  int forgeries_per_writer = 8;
  SizeRange sizes;
  std::uint64_t seed = 42;
  int dpi = 100;
};

// Renders the whole dataset into out_dir (w<id>_g<k>.png / w<id>_f<k>.png)
// and writes manifest.jsonl next to the images. Deterministic per seed,
// byte for byte. Forgers rotate over the other writers.
DatasetManifest generate_synthetic_dataset(const SynthDatasetConfig& config,
                                           const std::string& out_dir);

}  // namespace sigspp

#endif  // SIGSPP_SYNTH_HPP_
