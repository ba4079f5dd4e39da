#include "procap/sar_compose.hpp"

#include "procap/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace procap {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

Homography invert_homography(const Homography& h) {
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  const double det = m.determinant();
  if (!std::isfinite(det) || std::abs(det) <= 1e-9) {
    throw Error(ErrorCode::kNonInvertibleHomography, "determinant " + std::to_string(det));
  }
  const Eigen::Matrix3d inv = m.inverse();
  Homography out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r * 3 + c)] = inv(r, c);
  }
  return out;
}

Point2 apply_homography(const Homography& h, Point2 p) {
  const double x = h[0] * p.x + h[1] * p.y + h[2];
  const double y = h[3] * p.x + h[4] * p.y + h[5];
  const double w = h[6] * p.x + h[7] * p.y + h[8];
  return {x / w, y / w};
}

Homography homography_from_quads(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const auto& s = src[static_cast<std::size_t>(i)];
    const auto& d = dst[static_cast<std::size_t>(i)];
    a.row(2 * i) << s.x, s.y, 1, 0, 0, 0, -s.x * d.x, -s.y * d.x;
    a.row(2 * i + 1) << 0, 0, 0, s.x, s.y, 1, -s.x * d.y, -s.y * d.y;
    b(2 * i) = d.x;
    b(2 * i + 1) = d.y;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kNonInvertibleHomography, "degenerate corner correspondence");
  }
  const Eigen::Matrix<double, 8, 1> x = lu.solve(b);
  return {x(0), x(1), x(2), x(3), x(4), x(5), x(6), x(7), 1.0};
}

std::array<Point2, 4> warped_quad(const Homography& h, int source_width, int source_height) {
  const double w = source_width;
  const double hh = source_height;
  return {apply_homography(h, {0, 0}), apply_homography(h, {w, 0}), apply_homography(h, {w, hh}),
          apply_homography(h, {0, hh})};
}

namespace {

double bilinear(const Image& img, double sx, double sy, int c) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
  const double bottom = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
  return top * (1 - fy) + bottom * fy;
}

void check_rgb(const Image& img, const std::string& what) {
  if (img.channels != 3 || img.height <= 0 || img.width <= 0 ||
      img.data.size() != static_cast<std::size_t>(img.height) * static_cast<std::size_t>(img.width) * 3U) {
    throw Error(ErrorCode::kDimensionMismatch, what + " must be a non-empty H x W x 3 image");
  }
}

}  // namespace

SarSample compose(const SceneSpec& scene, const ProjectionSpec& proj, const BlendParams& blend) {
  check_rgb(scene.image, "scene image");
  check_rgb(proj.image, "projection image");
  if (!(blend.projector_gamma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "projector gamma must be > 0");
  }
  const Homography inv = invert_homography(blend.homography);

  Image powered = proj.image;
  if (blend.projector_gamma != 1.0) {
    for (auto& v : powered.data) v = std::pow(v, blend.projector_gamma);
  }

  SarSample out;
  out.scene_id = scene.id;
  out.source_id = proj.id;
  out.blend = blend;
  out.composite = scene.image;
  out.gt_mask = Image(scene.image.height, scene.image.width, 1, 0.0);

  std::mt19937_64 noise_rng(blend.noise_seed);
  std::normal_distribution<double> noise(0.0, blend.noise_sigma > 0.0 ? blend.noise_sigma : 1.0);

  const double pw = proj.image.width;
  const double ph = proj.image.height;
  for (int y = 0; y < scene.image.height; ++y) {
    for (int x = 0; x < scene.image.width; ++x) {
      const double cx = x + 0.5;
      const double cy = y + 0.5;
      const double hx = inv[0] * cx + inv[1] * cy + inv[2];
      const double hy = inv[3] * cx + inv[4] * cy + inv[5];
      const double hw = inv[6] * cx + inv[7] * cy + inv[8];
      if (!(hw > 0.0)) continue;
      const double u = hx / hw;
      const double v = hy / hw;
      if (u < 0.0 || u > pw || v < 0.0 || v > ph) continue;
      out.gt_mask.at(y, x, 0) = 1.0;
      for (int c = 0; c < 3; ++c) {
        const double s = scene.image.at(y, x, c);
        const double light = bilinear(powered, u - 0.5, v - 0.5, c);
        double value = std::clamp(s + blend.gain[static_cast<std::size_t>(c)] * s * light, 0.0, 1.0);
        if (blend.noise_sigma > 0.0) value = std::clamp(value + noise(noise_rng), 0.0, 1.0);
        out.composite.at(y, x, c) = value;
      }
    }
  }
  return out;
}

Image render_pattern(const PatternSpec& p, int height, int width) {
  Image img(height, width, 3);
  const double a = p.angle_deg * std::numbers::pi / 180.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width;
      const double v = (y + 0.5) / height;
      const double cx = u - 0.5;
      const double cy = v - 0.5;
      const double r = std::hypot(cx, cy);
      bool fg = false;
      if (p.kind == "solid") {
        fg = true;
      } else if (p.kind == "stripes") {
        const double t = cx * std::cos(a) + cy * std::sin(a);
        fg = static_cast<long>(std::floor((t + 1.0) * p.frequency)) % 2 == 0;
      } else if (p.kind == "checker") {
        fg = (static_cast<long>(std::floor(u * p.frequency)) + static_cast<long>(std::floor(v * p.frequency))) % 2 == 0;
      } else if (p.kind == "disc") {
        fg = r < 0.3;
      } else if (p.kind == "ring") {
        fg = r > 0.17 && r < 0.32;
      } else if (p.kind == "triangle") {
        fg = cy > -0.3 && cy < 0.3 && std::abs(cx) < (cy + 0.3) * 0.55;
      } else if (p.kind == "cross") {
        fg = (std::abs(cx) < 0.09 && std::abs(cy) < 0.33) || (std::abs(cy) < 0.09 && std::abs(cx) < 0.33);
      } else if (p.kind == "square") {
        fg = std::abs(cx) < 0.26 && std::abs(cy) < 0.26;
      } else if (p.kind == "diamond") {
        fg = std::abs(cx) + std::abs(cy) < 0.34;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown pattern kind '" + p.kind + "'");
      }
      const auto& col = fg ? p.color : p.background;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[static_cast<std::size_t>(c)];
    }
  }
  quantize_8bit(img);
  return img;
}

SynthConfig default_synth_config() {
  SynthConfig cfg;
  auto scene = [](std::string id, std::string caption, PatternSpec pattern) {
    CorpusEntry e;
    e.id = std::move(id);
    e.captions = {std::move(caption)};
    e.pattern = pattern;
    return e;
  };
  cfg.scenes = {
      scene("desk", "a wooden desk in a quiet office",
            {"stripes", {0.55, 0.38, 0.22}, {0.68, 0.5, 0.32}, 6.0, 90.0}),
      scene("wall", "a brick wall beside a tall window",
            {"checker", {0.62, 0.32, 0.26}, {0.76, 0.7, 0.64}, 4.0, 0.0}),
      scene("floor", "a tiled floor in a small kitchen",
            {"checker", {0.45, 0.5, 0.6}, {0.72, 0.72, 0.72}, 8.0, 0.0}),
      scene("sofa", "a green sofa in a living room",
            {"stripes", {0.3, 0.55, 0.35}, {0.45, 0.66, 0.46}, 5.0, 45.0}),
  };
  auto source = [](std::string id, std::string caption, std::string subset, PatternSpec pattern) {
    CorpusEntry e;
    e.id = id;
    e.name = std::move(id);
    e.captions = {std::move(caption)};
    e.subset = std::move(subset);
    e.pattern = pattern;
    return e;
  };
  const std::array<double, 3> light{0.85, 0.85, 0.85};
  cfg.sources = {
      source("apple", "a red apple on a white plate", "everyday", {"disc", {0.9, 0.1, 0.1}, light}),
      source("kite", "a blue kite flying in the sky", "symbols", {"triangle", {0.1, 0.2, 0.9}, light}),
      source("ring", "a golden ring on a black cloth", "everyday", {"ring", {0.9, 0.7, 0.1}, light}),
      source("cross", "a red cross on a white flag", "symbols", {"cross", {0.85, 0.05, 0.1}, {1.0, 1.0, 1.0}}),
      source("box", "an orange box on a wooden shelf", "everyday", {"square", {1.0, 0.5, 0.0}, light}),
      source("star", "a purple star in the night sky", "symbols", {"diamond", {0.55, 0.1, 0.8}, light}),
      source("fish", "a small fish swimming in the sea", "everyday",
             {"stripes", {0.1, 0.75, 0.8}, light, 5.0, 0.0}),
      source("flag", "a green flag on a tall pole", "symbols", {"checker", {0.1, 0.6, 0.2}, light, 3.0, 0.0}),
  };
  return cfg;
}

const SceneSpec& Dataset::scene(const std::string& id) const {
  for (const auto& s : scenes) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::kSchemaViolation, "unknown scene id '" + id + "'");
}

const ProjectionSpec& Dataset::source(const std::string& id) const {
  for (const auto& s : sources) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::kSchemaViolation, "unknown source id '" + id + "'");
}

std::vector<const SarSample*> Dataset::split(const std::string& name) const {
  std::vector<const SarSample*> out;
  for (const auto& s : samples) {
    if (name == "all" || s.split == name) out.push_back(&s);
  }
  return out;
}

namespace {

Image load_corpus_image(const CorpusEntry& e, int height, int width) {
  if (!e.image) return render_pattern(e.pattern, height, width);
  Image img = read_png(*e.image);
  if (img.channels == 1) {
    Image rgb(img.height, img.width, 3);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x, 0);
      }
    }
    img = std::move(rgb);
  }
  if (img.height != height || img.width != width) {
    throw Error(ErrorCode::kDimensionMismatch, "image " + *e.image + " is not " +
                                                   std::to_string(height) + "x" + std::to_string(width));
  }
  return img;
}

void check_entry(const CorpusEntry& e, bool is_source) {
  if (e.id.empty()) throw Error(ErrorCode::kSchemaViolation, "corpus entry without id");
  if (e.captions.empty()) throw Error(ErrorCode::kSchemaViolation, "entry '" + e.id + "' has no captions");
  if (is_source && e.name.empty()) {
    throw Error(ErrorCode::kSchemaViolation, "source '" + e.id + "' has an empty name");
  }
}

BlendParams draw_blend(const SynthConfig& cfg, std::mt19937_64& rng) {
  const auto& r = cfg.blend;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double side = uniform(r.scale_min, r.scale_max) * std::min(cfg.canvas_width, cfg.canvas_height);
  const double cx = cfg.canvas_width * (0.5 + uniform(-r.center_jitter, r.center_jitter));
  const double cy = cfg.canvas_height * (0.5 + uniform(-r.center_jitter, r.center_jitter));
  const double theta = uniform(-r.rotation_deg, r.rotation_deg) * std::numbers::pi / 180.0;
  const std::array<Point2, 4> unit_square{{{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}}};
  std::array<Point2, 4> dst;
  for (std::size_t i = 0; i < 4; ++i) {
    const double px = unit_square[i].x * side + uniform(-r.perspective, r.perspective) * side;
    const double py = unit_square[i].y * side + uniform(-r.perspective, r.perspective) * side;
    dst[i] = {cx + px * std::cos(theta) - py * std::sin(theta), cy + px * std::sin(theta) + py * std::cos(theta)};
  }
  const double sw = cfg.source_width;
  const double sh = cfg.source_height;
  BlendParams b;
  b.homography = homography_from_quads({{{0, 0}, {sw, 0}, {sw, sh}, {0, sh}}}, dst);
  for (auto& g : b.gain) g = uniform(r.gain_min, r.gain_max);
  b.projector_gamma = uniform(r.gamma_min, r.gamma_max);
  b.noise_sigma = r.noise_sigma;
  b.noise_seed = rng();
  return b;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

Dataset synth_dataset(const SynthConfig& cfg, std::uint64_t seed, const fs::path& out_dir,
                      const std::string& provenance_json) {
  if (cfg.scenes.empty() || cfg.sources.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "synthesis needs at least one scene and one source");
  }
  if (cfg.draws_per_pair < 1) throw Error(ErrorCode::kInvalidArgument, "draws_per_pair must be >= 1");
  if (cfg.eval_fraction < 0.0 || cfg.eval_fraction >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "eval_fraction must be in [0, 1)");
  }
  std::set<std::string> ids;
  for (const auto& e : cfg.scenes) {
    check_entry(e, false);
    if (!ids.insert("scene:" + e.id).second) throw Error(ErrorCode::kSchemaViolation, "duplicate scene id " + e.id);
  }
  for (const auto& e : cfg.sources) {
    check_entry(e, true);
    if (!ids.insert("source:" + e.id).second) throw Error(ErrorCode::kSchemaViolation, "duplicate source id " + e.id);
  }

  ensure_dir(out_dir / "scenes");
  ensure_dir(out_dir / "sources");
  ensure_dir(out_dir / "samples");

  Dataset ds;
  ds.version = kManifestVersion;
  ds.height = cfg.canvas_height;
  ds.width = cfg.canvas_width;
  for (const auto& e : cfg.scenes) {
    SceneSpec s{e.id, load_corpus_image(e, cfg.canvas_height, cfg.canvas_width), e.captions,
                "scenes/" + e.id + ".png"};
    quantize_8bit(s.image);
    write_png(out_dir / s.image_path, s.image);
    ds.scenes.push_back(std::move(s));
  }
  for (const auto& e : cfg.sources) {
    ProjectionSpec p{e.id, load_corpus_image(e, cfg.source_height, cfg.source_width), e.captions,
                     e.name, e.subset, "sources/" + e.id + ".png"};
    quantize_8bit(p.image);
    write_png(out_dir / p.image_path, p.image);
    ds.sources.push_back(std::move(p));
  }

  std::mt19937_64 rng(seed);
  for (const auto& scene : ds.scenes) {
    for (const auto& proj : ds.sources) {
      for (int d = 0; d < cfg.draws_per_pair; ++d) {
        SarSample sample = compose(scene, proj, draw_blend(cfg, rng));
        quantize_8bit(sample.composite);
        sample.sample_id = scene.id + "__" + proj.id + "__" + std::to_string(d);
        sample.composite_path = "samples/" + sample.sample_id + "_composite.png";
        sample.mask_path = "samples/" + sample.sample_id + "_mask.png";
        write_png(out_dir / sample.composite_path, sample.composite);
        write_png(out_dir / sample.mask_path, sample.gt_mask);
        ds.samples.push_back(std::move(sample));
      }
    }
  }

  std::vector<std::size_t> order(ds.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 split_rng(seed ^ 0x5eedf00dULL);
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_eval = static_cast<std::size_t>(std::llround(cfg.eval_fraction * static_cast<double>(order.size())));
  for (std::size_t i = 0; i < order.size(); ++i) ds.samples[order[i]].split = i < n_eval ? "eval" : "train";

  json manifest;
  manifest["version"] = ds.version;
  manifest["canvas"] = {ds.height, ds.width};
  manifest["scenes"] = json::array();
  for (const auto& s : ds.scenes) {
    manifest["scenes"].push_back({{"id", s.id}, {"image", s.image_path}, {"captions", s.captions}});
  }
  manifest["sources"] = json::array();
  for (const auto& s : ds.sources) {
    manifest["sources"].push_back(
        {{"id", s.id}, {"image", s.image_path}, {"captions", s.captions}, {"name", s.name}, {"subset", s.subset}});
  }
  manifest["samples"] = json::array();
  for (const auto& s : ds.samples) {
    manifest["samples"].push_back({{"id", s.sample_id},
                                   {"scene_id", s.scene_id},
                                   {"source_id", s.source_id},
                                   {"composite", s.composite_path},
                                   {"mask", s.mask_path},
                                   {"homography", s.blend.homography},
                                   {"gain", s.blend.gain},
                                   {"gamma", s.blend.projector_gamma},
                                   {"noise_sigma", s.blend.noise_sigma},
                                   {"split", s.split}});
  }
  if (!provenance_json.empty()) manifest["provenance"] = json::parse(provenance_json);

  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write manifest in " + out_dir.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing manifest");
  return ds;
}

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::kSchemaViolation, where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) throw Error(ErrorCode::kSchemaViolation, where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

double number_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) throw Error(ErrorCode::kSchemaViolation, where + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::vector<std::string> captions_field(const json& obj, const std::string& where) {
  const json& v = field(obj, "captions", where);
  if (!v.is_array() || v.empty()) throw Error(ErrorCode::kSchemaViolation, where + ": empty caption list");
  std::vector<std::string> out;
  for (const auto& c : v) {
    if (!c.is_string()) throw Error(ErrorCode::kSchemaViolation, where + ": captions must be strings");
    out.push_back(c.get<std::string>());
  }
  return out;
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array() || v.size() != N) {
    throw Error(ErrorCode::kSchemaViolation, where + ": '" + key + "' must have " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!v[i].is_number()) throw Error(ErrorCode::kSchemaViolation, where + ": '" + key + "' must be numeric");
    out[i] = v[i].get<double>();
  }
  return out;
}

Image load_image(const fs::path& base, const std::string& rel) {
  const fs::path p = base / rel;
  if (!fs::exists(p)) throw Error(ErrorCode::kMissingFile, p.string());
  return read_png(p);
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  const std::string top = "manifest";

  Dataset ds;
  const json& version = field(m, "version", top);
  if (!version.is_number_integer()) throw Error(ErrorCode::kSchemaViolation, "manifest: version must be an integer");
  ds.version = version.get<int>();
  const auto canvas = fixed_array<2>(m, "canvas", top);
  ds.height = static_cast<int>(canvas[0]);
  ds.width = static_cast<int>(canvas[1]);
  if (ds.height <= 0 || ds.width <= 0) throw Error(ErrorCode::kSchemaViolation, "manifest: bad canvas");

  std::set<std::string> scene_ids;
  for (const auto& s : field(m, "scenes", top)) {
    SceneSpec spec;
    spec.id = string_field(s, "id", "scene");
    const std::string where = "scene '" + spec.id + "'";
    if (!scene_ids.insert(spec.id).second) throw Error(ErrorCode::kSchemaViolation, where + ": duplicate id");
    spec.image_path = string_field(s, "image", where);
    spec.captions = captions_field(s, where);
    spec.image = load_image(base, spec.image_path);
    if (spec.image.height != ds.height || spec.image.width != ds.width || spec.image.channels != 3) {
      throw Error(ErrorCode::kSchemaViolation, where + ": image does not match the canvas");
    }
    ds.scenes.push_back(std::move(spec));
  }
  std::set<std::string> source_ids;
  for (const auto& s : field(m, "sources", top)) {
    ProjectionSpec spec;
    spec.id = string_field(s, "id", "source");
    const std::string where = "source '" + spec.id + "'";
    if (!source_ids.insert(spec.id).second) throw Error(ErrorCode::kSchemaViolation, where + ": duplicate id");
    spec.image_path = string_field(s, "image", where);
    spec.captions = captions_field(s, where);
    spec.name = string_field(s, "name", where);
    if (spec.name.empty()) throw Error(ErrorCode::kSchemaViolation, where + ": empty name");
    if (s.contains("subset")) spec.subset = string_field(s, "subset", where);
    spec.image = load_image(base, spec.image_path);
    if (spec.image.channels != 3) throw Error(ErrorCode::kSchemaViolation, where + ": image must be RGB");
    ds.sources.push_back(std::move(spec));
  }

  std::set<std::string> sample_ids;
  for (const auto& s : field(m, "samples", top)) {
    SarSample sample;
    sample.sample_id = string_field(s, "id", "sample");
    const std::string where = "sample '" + sample.sample_id + "'";
    if (!sample_ids.insert(sample.sample_id).second) throw Error(ErrorCode::kSchemaViolation, where + ": duplicate id");
    sample.scene_id = string_field(s, "scene_id", where);
    sample.source_id = string_field(s, "source_id", where);
    if (!scene_ids.contains(sample.scene_id) || !source_ids.contains(sample.source_id)) {
      throw Error(ErrorCode::kSchemaViolation, where + ": unknown scene or source reference");
    }
    sample.composite_path = string_field(s, "composite", where);
    sample.mask_path = string_field(s, "mask", where);
    sample.blend.homography = fixed_array<9>(s, "homography", where);
    sample.blend.gain = fixed_array<3>(s, "gain", where);
    sample.blend.projector_gamma = number_field(s, "gamma", where);
    sample.blend.noise_sigma = number_field(s, "noise_sigma", where);
    sample.split = string_field(s, "split", where);
    if (sample.split != "train" && sample.split != "eval") {
      throw Error(ErrorCode::kSchemaViolation, where + ": split must be 'train' or 'eval'");
    }
    for (double g : sample.blend.gain) {
      if (!std::isfinite(g) || g < 0.0) throw Error(ErrorCode::kSchemaViolation, where + ": gain must be finite and >= 0");
    }
    if (!(sample.blend.projector_gamma > 0.0) || !(sample.blend.noise_sigma >= 0.0)) {
      throw Error(ErrorCode::kSchemaViolation, where + ": bad gamma or noise_sigma");
    }
    invert_homography(sample.blend.homography);

    sample.composite = load_image(base, sample.composite_path);
    sample.gt_mask = load_image(base, sample.mask_path);
    if (sample.composite.height != ds.height || sample.composite.width != ds.width || sample.composite.channels != 3) {
      throw Error(ErrorCode::kSchemaViolation, where + ": composite does not match the canvas");
    }
    if (sample.gt_mask.height != ds.height || sample.gt_mask.width != ds.width || sample.gt_mask.channels != 1) {
      throw Error(ErrorCode::kSchemaViolation, where + ": mask must be a single-channel canvas-sized image");
    }
    for (double v : sample.gt_mask.data) {
      if (v != 0.0 && v != 1.0) throw Error(ErrorCode::kMaskNotBinary, where + ": mask value " + std::to_string(v));
    }
    const SceneSpec& scene = ds.scene(sample.scene_id);
    for (int y = 0; y < ds.height; ++y) {
      for (int x = 0; x < ds.width; ++x) {
        if (sample.gt_mask.at(y, x, 0) != 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          if (sample.composite.at(y, x, c) != scene.image.at(y, x, c)) {
            throw Error(ErrorCode::kSchemaViolation, where + ": composite differs from the scene outside the mask");
          }
        }
      }
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace procap
