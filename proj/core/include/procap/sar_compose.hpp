#pragma once

// Composite-image synthesis: a projection layer is warped by a homography,
// photometrically blended onto a scene layer, and recorded together with its
// coarse projector-footprint mask and the two caption sets.

#include "procap/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace procap {

struct SceneSpec {
  std::string id;
  Image image;  // H x W x 3
  std::vector<std::string> captions;
  std::string image_path;  // relative to the manifest, when loaded from disk
};

struct ProjectionSpec {
  std::string id;
  Image image;  // h x w x 3
  std::vector<std::string> captions;
  std::string name;  // object label used as a knowledge-base value
  std::string subset = "default";
  std::string image_path;
};

using Homography = std::array<double, 9>;  // row-major, projector -> camera
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct BlendParams {
  Homography homography{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  double projector_gamma = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

struct SarSample {
  std::string sample_id;
  std::string scene_id;
  std::string source_id;
  Image composite;  // H x W x 3
  Image gt_mask;    // H x W x 1, values in {0, 1}
  BlendParams blend;
  std::string split = "train";
  std::string composite_path;
  std::string mask_path;
};

/// Throws NonInvertibleHomography when |det| <= 1e-9.
Homography invert_homography(const Homography& h);
Point2 apply_homography(const Homography& h, Point2 p);
/// Homography mapping the four `src` corners onto the four `dst` corners.
Homography homography_from_quads(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst);
/// Camera-frame corners of the projector rectangle [0,w]x[0,h], in the order
/// (0,0), (w,0), (w,h), (0,h).
std::array<Point2, 4> warped_quad(const Homography& h, int source_width, int source_height);

/// Blends `proj` onto `scene`: inside the warped projector quad
/// out = clamp(S + gain * S * W(P^gamma), 0, 1), outside out = S. Noise, when
/// sigma > 0, is added inside the quad only and re-clamped.
SarSample compose(const SceneSpec& scene, const ProjectionSpec& proj, const BlendParams& blend);

// ---------------------------------------------------------------------------
// Dataset synthesis

/// Procedural texture used when a corpus entry has no image file.
struct PatternSpec {
  std::string kind = "solid";  // solid|stripes|checker|disc|ring|triangle|cross|square|diamond
  std::array<double, 3> color{0.5, 0.5, 0.5};
  std::array<double, 3> background{0.8, 0.8, 0.8};
  double frequency = 4.0;  // stripes/checker cells per image side
  double angle_deg = 0.0;  // stripe orientation
};

Image render_pattern(const PatternSpec& pattern, int height, int width);

struct CorpusEntry {
  std::string id;
  std::vector<std::string> captions;
  std::string name;                 // sources only
  std::string subset = "default";   // sources only
  std::optional<std::string> image; // PNG path; overrides `pattern`
  PatternSpec pattern;
};

struct BlendRanges {
  double scale_min = 0.5;  // quad side as a fraction of the canvas side
  double scale_max = 0.75;
  double center_jitter = 0.1;
  double rotation_deg = 12.0;
  double perspective = 0.06;  // per-corner jitter as a fraction of the side
  double gain_min = 0.6;
  double gain_max = 1.2;
  double gamma_min = 1.0;
  double gamma_max = 2.2;
  double noise_sigma = 0.0;
};

struct SynthConfig {
  int canvas_height = 64;
  int canvas_width = 64;
  int source_height = 64;
  int source_width = 64;
  int draws_per_pair = 1;
  double eval_fraction = 0.25;
  std::vector<CorpusEntry> scenes;
  std::vector<CorpusEntry> sources;
  BlendRanges blend;
};

/// Four procedural scenes and eight procedural projection sources.
SynthConfig default_synth_config();

struct Dataset {
  int version = 1;
  int height = 0;
  int width = 0;
  std::vector<SceneSpec> scenes;
  std::vector<ProjectionSpec> sources;
  std::vector<SarSample> samples;

  const SceneSpec& scene(const std::string& id) const;
  const ProjectionSpec& source(const std::string& id) const;
  std::vector<const SarSample*> split(const std::string& name) const;
};

constexpr int kManifestVersion = 1;

/// Generates every (scene, source, draw) sample, writes images and
/// manifest.json under `out_dir`, and returns the in-memory dataset.
/// `provenance_json` (a JSON object text, may be empty) is embedded verbatim.
Dataset synth_dataset(const SynthConfig& config, std::uint64_t seed,
                      const std::filesystem::path& out_dir, const std::string& provenance_json = "");

/// Loads and validates a manifest plus every image it references.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace procap
