#include "sigspp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace sigspp {

namespace {

constexpr std::uint64_t kStyleSalt = 0x5354594c;
constexpr std::uint64_t kSampleSalt = 0x53414d50;
constexpr std::uint64_t kForgerySalt = 0x464f5247;
constexpr double kPi = 3.14159265358979323846;

struct Point {
  double x, y;
};

// Control polygon of one stroke in the unit box, writer skeleton plus
// per-sample jitter.
std::vector<Point> stroke_points(const SyntheticStyle& style, int stroke, Rng& rng,
                                 double jitter) {
  const int count = style.points_per_stroke[stroke];
  std::vector<Point> pts(count);
  for (int k = 0; k < count; ++k) {
    const double t = count > 1 ? static_cast<double>(k) / (count - 1) : 0.5;
    const double wave = std::sin(style.phases[stroke] + t * style.frequency * 2.0 * kPi);
    double x = t + rng.uniform(-0.02, 0.02) * jitter;
    double y = style.y_centers[stroke] + style.amplitudes[stroke] * wave +
               rng.uniform(-0.03, 0.03) * jitter;
    x += style.slant * (y - 0.5);
    pts[k] = Point{std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0)};
  }
  return pts;
}

// Centripetal-free Catmull-Rom through the control points.
Point catmull_rom(const Point& p0, const Point& p1, const Point& p2, const Point& p3,
                  double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  auto interp = [&](double a, double b, double c, double d) {
    return 0.5 * ((2.0 * b) + (-a + c) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2 +
                  (-a + 3.0 * b - 3.0 * c + d) * t3);
  };
  return Point{interp(p0.x, p1.x, p2.x, p3.x), interp(p0.y, p1.y, p2.y, p3.y)};
}

void stamp_disk(GrayImage& img, double cx, double cy, double radius, int ink) {
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double dist = std::sqrt(dx * dx + dy * dy);
      if (dist > radius + 0.5) continue;
      // soft 1px edge so the strokes are not binary
      const double edge = std::clamp(radius + 0.5 - dist, 0.0, 1.0);
      const int value = static_cast<int>(ink + (255 - ink) * (1.0 - edge));
      img.at(y, x) = static_cast<std::uint8_t>(std::min<int>(img.at(y, x), value));
    }
  }
}

void draw_stroke(GrayImage& img, const std::vector<Point>& pts, double radius, int ink,
                 double margin_x, double margin_y, double span_x, double span_y) {
  if (pts.size() < 2) return;
  auto at = [&](int i) {
    const int clamped = std::clamp<int>(i, 0, static_cast<int>(pts.size()) - 1);
    return pts[static_cast<std::size_t>(clamped)];
  };
  for (std::size_t seg = 0; seg + 1 < pts.size(); ++seg) {
    const Point p0 = at(static_cast<int>(seg) - 1);
    const Point p1 = at(static_cast<int>(seg));
    const Point p2 = at(static_cast<int>(seg) + 1);
    const Point p3 = at(static_cast<int>(seg) + 2);
    // dense enough that consecutive stamps overlap
    const double seg_px = std::hypot((p2.x - p1.x) * span_x, (p2.y - p1.y) * span_y);
    const int steps = std::max(2, static_cast<int>(seg_px / 0.4) + 1);
    for (int s = 0; s <= steps; ++s) {
      const Point p = catmull_rom(p0, p1, p2, p3, static_cast<double>(s) / steps);
      stamp_disk(img, margin_x + p.x * span_x, margin_y + p.y * span_y, radius, ink);
    }
  }
}

}  // namespace

SyntheticStyle writer_style(std::uint64_t dataset_seed, int writer_id) {
  Rng rng(Rng::mix(dataset_seed, kStyleSalt + static_cast<std::uint64_t>(writer_id)));
  SyntheticStyle style;
  style.strokes = static_cast<int>(rng.uniform_int(2, 4));
  for (int s = 0; s < style.strokes; ++s) {
    style.points_per_stroke.push_back(static_cast<int>(rng.uniform_int(6, 10)));
    style.phases.push_back(rng.uniform(0.0, 2.0 * kPi));
    style.y_centers.push_back(rng.uniform(0.3, 0.7));
    style.amplitudes.push_back(rng.uniform(0.08, 0.28));
  }
  style.frequency = rng.uniform(1.2, 3.2);
  style.slant = rng.uniform(-0.25, 0.35);
  style.stroke_width = rng.uniform(0.008, 0.02);
  style.ink = rng.uniform(30.0, 90.0);
  style.aspect = rng.uniform(1.2, 2.2);
  return style;
}

void draw_sample_dims(const SyntheticStyle& style, const SizeRange& range, Rng& rng,
                      int* h, int* w) {
  if (range.min_h > range.max_h || range.min_w > range.max_w || range.min_h < 16 ||
      range.min_w < 16) {
    throw ConfigError("degenerate size range");
  }
  *h = static_cast<int>(rng.uniform_int(range.min_h, range.max_h));
  const double target_w = *h * style.aspect * rng.uniform(0.94, 1.08);
  *w = std::clamp(static_cast<int>(std::lround(target_w)), range.min_w, range.max_w);
}

GrayImage render_signature(const SyntheticStyle& style, int height, int width,
                           Rng& rng, double jitter_scale,
                           const SyntheticStyle* forger_hand) {
  GrayImage img(height, width, 255);

  // light scan noise on the background
  for (auto& p : img.pixels) {
    p = static_cast<std::uint8_t>(248 + rng.uniform_int(0, 7));
  }

  const double margin_y = 0.08 * height;
  const double margin_x = 0.08 * width;
  const double span_y = height - 2.0 * margin_y;
  const double span_x = width - 2.0 * margin_x;
  const double min_dim = std::min(height, width);
  const SyntheticStyle& hand = forger_hand ? *forger_hand : style;
  const double radius =
      std::max(0.7, hand.stroke_width * min_dim * rng.uniform(0.9, 1.1) / 2.0);

  for (int s = 0; s < style.strokes; ++s) {
    auto pts = stroke_points(style, s, rng, jitter_scale);
    if (forger_hand) {
      // systematic low-frequency warp: the forger reproduces the overall
      // shape but misses the fine trajectory and proportions
      const double warp_amp = rng.uniform(0.04, 0.10);
      const double warp_freq = rng.uniform(1.0, 2.5);
      const double warp_phase = rng.uniform(0.0, 2.0 * kPi);
      const double squeeze = rng.uniform(0.85, 1.15);  // vertical proportions off
      for (auto& p : pts) {
        p.y = 0.5 + (p.y - 0.5) * squeeze;
        p.y = std::clamp(p.y + warp_amp * std::sin(warp_phase + p.x * warp_freq * 2.0 * kPi),
                         0.0, 1.0);
      }
    }
    const int ink = static_cast<int>(
        std::clamp(hand.ink + rng.uniform(-12.0, 12.0), 10.0, 150.0));
    draw_stroke(img, pts, radius, ink, margin_x, margin_y, span_x, span_y);
  }
  return img;
}

GrayImage synth_genuine(std::uint64_t dataset_seed, int writer_id, int index,
                        const SizeRange& range, int* out_h, int* out_w) {
  const SyntheticStyle style = writer_style(dataset_seed, writer_id);
  Rng rng(Rng::mix(dataset_seed,
                   kSampleSalt + static_cast<std::uint64_t>(writer_id) * 100000 + index));
  int h = 0, w = 0;
  draw_sample_dims(style, range, rng, &h, &w);
  if (out_h) *out_h = h;
  if (out_w) *out_w = w;
  return render_signature(style, h, w, rng, 0.8);
}

GrayImage synth_skilled_forgery(std::uint64_t dataset_seed, int target_writer,
                                int forger_writer, int index, const SizeRange& range) {
  const SyntheticStyle target = writer_style(dataset_seed, target_writer);
  const SyntheticStyle forger = writer_style(dataset_seed, forger_writer);
  Rng rng(Rng::mix(dataset_seed, kForgerySalt +
                                     static_cast<std::uint64_t>(target_writer) * 100000 +
                                     index));
  int h = 0, w = 0;
  draw_sample_dims(target, range, rng, &h, &w);
  return render_signature(target, h, w, rng, 3.0, &forger);
}

DatasetManifest generate_synthetic_dataset(const SynthDatasetConfig& config,
                                           const std::string& out_dir) {
  if (config.writers < 2) throw ConfigError("generate_synthetic_dataset: need >= 2 writers");
  if (config.dev_writers < 0 || config.dev_writers > config.writers) {
    throw ConfigError("generate_synthetic_dataset: bad dev writer count");
  }
  std::filesystem::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.provenance = "synthetic seed=" + std::to_string(config.seed);
  manifest.base_dir = out_dir;

  for (int writer = 0; writer < config.writers; ++writer) {
    const std::string split = writer < config.dev_writers ? "dev" : "exploit";
    for (int k = 0; k < config.genuine_per_writer; ++k) {
      const GrayImage img = synth_genuine(config.seed, writer, k, config.sizes);
      const std::string name = "w" + std::to_string(writer) + "_g" + std::to_string(k) + ".png";
      write_png_gray((std::filesystem::path(out_dir) / name).string(), img);
      manifest.records.push_back(ManifestRecord{name, writer, false, split, config.dpi});
    }
    for (int k = 0; k < config.forgeries_per_writer; ++k) {
      // rotate forgers over the other writers within the same split
      int lo = writer < config.dev_writers ? 0 : config.dev_writers;
      int hi = writer < config.dev_writers ? config.dev_writers : config.writers;
      if (hi - lo < 2) {
        lo = 0;
        hi = config.writers;
      }
      int forger = lo + (writer - lo + 1 + k) % (hi - lo);
      if (forger == writer) forger = lo + (writer - lo + 2 + k) % (hi - lo);
      const GrayImage img =
          synth_skilled_forgery(config.seed, writer, forger, k, config.sizes);
      const std::string name = "w" + std::to_string(writer) + "_f" + std::to_string(k) + ".png";
      write_png_gray((std::filesystem::path(out_dir) / name).string(), img);
      manifest.records.push_back(ManifestRecord{name, writer, true, split, config.dpi});
    }
  }
  save_manifest((std::filesystem::path(out_dir) / "manifest.jsonl").string(), manifest);
  return manifest;
}

}  // namespace sigspp
