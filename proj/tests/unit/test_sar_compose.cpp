#include "fixtures.hpp"

#include "procap/error.hpp"
#include "procap/sar_compose.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace procap;
using fx::constant_image;
using fx::random_image;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;  // sentinel; callers never expect it
}

SynthConfig small_config() {
  SynthConfig cfg = default_synth_config();
  cfg.scenes.resize(2);
  cfg.sources.resize(2);
  return cfg;
}

}  // namespace

TEST(Homography, InverseRoundTrip) {
  std::mt19937_64 rng(3);
  const Homography h = fx::random_homography(rng, 64, 64);
  const Homography inv = invert_homography(h);
  const Point2 p{12.5, 40.25};
  const Point2 q = apply_homography(inv, apply_homography(h, p));
  EXPECT_NEAR(q.x, p.x, 1e-9);
  EXPECT_NEAR(q.y, p.y, 1e-9);
}

TEST(Homography, SingularThrows) {
  const Homography h{1, 2, 3, 2, 4, 6, 0, 0, 1};
  EXPECT_EQ(code_of([&] { invert_homography(h); }), ErrorCode::kNonInvertibleHomography);
}

TEST(Homography, QuadFitMapsCorners) {
  const std::array<Point2, 4> src{{{0, 0}, {10, 0}, {10, 10}, {0, 10}}};
  const std::array<Point2, 4> dst{{{3, 4}, {20, 6}, {22, 30}, {1, 25}}};
  const Homography h = homography_from_quads(src, dst);
  for (int i = 0; i < 4; ++i) {
    const Point2 p = apply_homography(h, src[i]);
    EXPECT_NEAR(p.x, dst[i].x, 1e-9);
    EXPECT_NEAR(p.y, dst[i].y, 1e-9);
  }
}

TEST(Compose, BlackProjectionLeavesSceneUntouched) {
  std::mt19937_64 rng(1);
  SceneSpec scene{"s", random_image(32, 32, 3, 2), {"a scene"}};
  ProjectionSpec proj{"p", constant_image(32, 32, 3, 0.0), {"a thing"}, "thing"};
  BlendParams b;
  b.homography = fx::random_homography(rng, 32, 32);
  b.gain = {1.2, 0.7, 0.9};
  const SarSample s = compose(scene, proj, b);
  EXPECT_EQ(s.composite.data, scene.image.data);
}

TEST(Compose, FullFrameWhiteDoublesScene) {
  SceneSpec scene{"s", random_image(16, 16, 3, 5), {"a scene"}};
  ProjectionSpec proj{"p", constant_image(16, 16, 3, 1.0), {"light"}, "light"};
  const SarSample s = compose(scene, proj, BlendParams{});
  for (std::size_t i = 0; i < s.composite.data.size(); ++i) {
    EXPECT_DOUBLE_EQ(s.composite.data[i], std::min(1.0, 2.0 * scene.image.data[i]));
  }
  for (double m : s.gt_mask.data) EXPECT_EQ(m, 1.0);
}

TEST(Compose, OutsideMaskIdentityAndPolygonOracle) {
  std::mt19937_64 rng(11);
  SceneSpec scene{"s", random_image(48, 48, 3, 6), {"a scene"}};
  ProjectionSpec proj{"p", random_image(40, 40, 3, 7), {"a thing"}, "thing"};
  for (int trial = 0; trial < 10; ++trial) {
    BlendParams b;
    b.homography = fx::random_homography(rng, 48, 40);
    b.noise_sigma = 0.05;
    b.noise_seed = static_cast<std::uint64_t>(trial);
    const SarSample s = compose(scene, proj, b);
    const auto quad = warped_quad(b.homography, 40, 40);
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        const bool m = s.gt_mask.at(y, x, 0) == 1.0;
        if (!m) {
          for (int c = 0; c < 3; ++c) ASSERT_EQ(s.composite.at(y, x, c), scene.image.at(y, x, c));
        }
        if (m != fx::point_in_polygon(quad, x + 0.5, y + 0.5)) {
          EXPECT_LE(fx::distance_to_polygon_edge(quad, x + 0.5, y + 0.5), 1.0);
        }
      }
    }
  }
}

TEST(Compose, GainIsMonotone) {
  std::mt19937_64 rng(2);
  SceneSpec scene{"s", random_image(24, 24, 3, 8), {"a scene"}};
  ProjectionSpec proj{"p", random_image(24, 24, 3, 9), {"a thing"}, "thing"};
  BlendParams lo;
  lo.homography = fx::random_homography(rng, 24, 24);
  lo.gain = {0.4, 0.4, 0.4};
  BlendParams hi = lo;
  hi.gain = {0.9, 0.4, 1.5};
  const SarSample a = compose(scene, proj, lo), b = compose(scene, proj, hi);
  for (std::size_t i = 0; i < a.composite.data.size(); ++i) EXPECT_GE(b.composite.data[i], a.composite.data[i]);
}

TEST(Compose, WrongChannelCountThrows) {
  SceneSpec scene{"s", constant_image(8, 8, 1, 0.5), {"x"}};
  ProjectionSpec proj{"p", constant_image(8, 8, 3, 0.5), {"y"}, "y"};
  EXPECT_EQ(code_of([&] { compose(scene, proj, BlendParams{}); }), ErrorCode::kDimensionMismatch);
}

TEST(Synth, DefaultCorpusHas32SamplesAndBothCaptionSets) {
  const auto dir = fx::temp_dir("synth32");
  const Dataset d = synth_dataset(default_synth_config(), 1, dir);
  EXPECT_EQ(d.samples.size(), 32u);
  for (const auto& s : d.samples) {
    EXPECT_FALSE(d.scene(s.scene_id).captions.empty());
    EXPECT_FALSE(d.source(s.source_id).captions.empty());
  }
  EXPECT_FALSE(d.split("train").empty());
  EXPECT_FALSE(d.split("eval").empty());
  EXPECT_EQ(d.split("train").size() + d.split("eval").size(), 32u);
}

TEST(Synth, SameSeedIsByteIdentical) {
  const auto a = fx::temp_dir("synth_a"), b = fx::temp_dir("synth_b");
  const Dataset da = synth_dataset(small_config(), 9, a);
  synth_dataset(small_config(), 9, b);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  for (const auto& s : da.samples) {
    EXPECT_EQ(slurp(a / s.composite_path), slurp(b / s.composite_path));
    EXPECT_EQ(slurp(a / s.mask_path), slurp(b / s.mask_path));
  }
}

TEST(Synth, DifferentSeedChangesBlend) {
  const auto a = fx::temp_dir("synth_s1"), b = fx::temp_dir("synth_s2");
  const Dataset da = synth_dataset(small_config(), 1, a);
  const Dataset db = synth_dataset(small_config(), 2, b);
  bool differs = false;
  for (std::size_t i = 0; i < da.samples.size(); ++i) {
    differs |= da.samples[i].blend.homography != db.samples[i].blend.homography ||
               da.samples[i].blend.gain != db.samples[i].blend.gain;
  }
  EXPECT_TRUE(differs);
}

TEST(Synth, EmptyCorpusThrows) {
  SynthConfig cfg = small_config();
  cfg.sources.clear();
  EXPECT_EQ(code_of([&] { synth_dataset(cfg, 1, fx::temp_dir("synth_empty")); }), ErrorCode::kEmptyCorpus);
}

TEST(Manifest, RoundTripLoads) {
  const auto dir = fx::temp_dir("load_ok");
  const Dataset d = synth_dataset(small_config(), 4, dir);
  const Dataset l = load_dataset(dir / "manifest.json");
  ASSERT_EQ(l.samples.size(), d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    EXPECT_EQ(l.samples[i].sample_id, d.samples[i].sample_id);
    EXPECT_EQ(l.samples[i].gt_mask.data, d.samples[i].gt_mask.data);
    EXPECT_EQ(l.samples[i].split, d.samples[i].split);
  }
}

TEST(Manifest, EmptyCaptionListIsSchemaViolation) {
  const auto dir = fx::temp_dir("load_caps");
  synth_dataset(small_config(), 4, dir);
  std::string m = slurp(dir / "manifest.json");
  const auto pos = m.find("\"captions\"");
  ASSERT_NE(pos, std::string::npos);
  const auto open = m.find('[', pos), close = m.find(']', pos);
  m.replace(open, close - open + 1, "[]");
  std::ofstream(dir / "manifest.json") << m;
  try {
    load_dataset(dir / "manifest.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
    EXPECT_NE(std::string(e.what()).find("desk"), std::string::npos) << e.what();
  }
}

TEST(Manifest, NonBinaryMaskRejected) {
  const auto dir = fx::temp_dir("load_mask");
  const Dataset d = synth_dataset(small_config(), 4, dir);
  Image mask = d.samples[0].gt_mask;
  mask.data[0] = 0.37;
  write_png(dir / d.samples[0].mask_path, mask);
  EXPECT_EQ(code_of([&] { load_dataset(dir / "manifest.json"); }), ErrorCode::kMaskNotBinary);
}

TEST(Manifest, MissingImageRejected) {
  const auto dir = fx::temp_dir("load_missing");
  const Dataset d = synth_dataset(small_config(), 4, dir);
  std::filesystem::remove(dir / d.samples[1].composite_path);
  EXPECT_EQ(code_of([&] { load_dataset(dir / "manifest.json"); }), ErrorCode::kMissingFile);
}
