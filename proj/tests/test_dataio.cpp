#include <doctest.h>

#include <fstream>
#include <set>

#include "elastofuse/errors.hpp"
#include "elastofuse/manifest.hpp"
#include "elastofuse/samples.hpp"
#include "elastofuse/split.hpp"
#include "support.hpp"

using namespace elastofuse;
using namespace elastofuse::dataio;
using testsupport::TempDir;

namespace {

Image constant_image(int c, int h, int w, float v) {
  Image img(c, h, w);
  std::fill(img.data.begin(), img.data.end(), v);
  return img;
}

// Writes a gray/color PNG pair and returns the two paths.
std::pair<std::string, std::string> write_pair(const TempDir& dir, const std::string& stem,
                                               int h = 32, int w = 32, float g = 0.5f,
                                               float r = 0.2f, float gr = 0.4f, float b = 0.6f) {
  Image gray = constant_image(1, h, w, g);
  Image color(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      color.at(0, y, x) = r;
      color.at(1, y, x) = gr;
      color.at(2, y, x) = b;
    }
  const std::string gp = dir.file(stem + "_b.png");
  const std::string cp = dir.file(stem + "_se.png");
  save_png(gp, gray);
  save_png(cp, color);
  return {gp, cp};
}

void write_manifest_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << "patient_id\tlabel\timage_id\tbmode_path\telasto_path\troi\thistological_type\t"
         "strain_ratio\n"
      << body;
}

}  // namespace

TEST_CASE("manifest: happy path with patient metadata and roi") {
  TempDir dir("manifest");
  auto [gp, cp] = write_pair(dir, "img1");
  write_manifest_text(dir.file("m.tsv"), "p1\tB\timg1\t" + gp + "\t" + cp +
                                             "\t2,3,10,12\tfibroadenoma\t1.75\n");
  DatasetManifest m = parse_manifest(dir.file("m.tsv"));
  CHECK(m.patient_count() == 1);
  CHECK(m.image_count() == 1);
  CHECK(m.patient("p1").label == Label::Benign);
  CHECK(*m.patient("p1").histological_type == "fibroadenoma");
  CHECK(*m.patient("p1").strain_ratio == doctest::Approx(1.75));
  REQUIRE(m.images()[0].roi.has_value());
  CHECK(m.images()[0].roi->x == 2);
  CHECK(m.images()[0].roi->h == 12);
}

TEST_CASE("manifest: relative paths resolve against the manifest directory") {
  TempDir dir("manifest_rel");
  write_pair(dir, "img1");
  write_manifest_text(dir.file("m.tsv"), "p1\tM\timg1\timg1_b.png\timg1_se.png\t\t\t\n");
  DatasetManifest m = parse_manifest(dir.file("m.tsv"));
  CHECK(m.image_count() == 1);
  CHECK(m.patient("p1").label == Label::Malignant);
}

TEST_CASE("manifest: named failure modes") {
  TempDir dir("manifest_err");
  auto [gp, cp] = write_pair(dir, "img1");

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(parse_manifest(dir.file("absent.tsv")),
                         doctest::Contains("missing manifest"), DataError);
  }
  SUBCASE("empty manifest") {
    write_manifest_text(dir.file("m.tsv"), "");
    CHECK_THROWS_WITH_AS(parse_manifest(dir.file("m.tsv")), doctest::Contains("empty manifest"),
                         DataError);
  }
  SUBCASE("duplicate image_id") {
    write_manifest_text(dir.file("m.tsv"),
                        "p1\tB\timg1\t" + gp + "\t" + cp + "\t\t\t\n" +
                        "p2\tM\timg1\t" + gp + "\t" + cp + "\t\t\t\n");
    CHECK_THROWS_WITH_AS(parse_manifest(dir.file("m.tsv")),
                         doctest::Contains("duplicate image_id"), DataError);
  }
  SUBCASE("missing label") {
    write_manifest_text(dir.file("m.tsv"), "p1\t\timg1\t" + gp + "\t" + cp + "\t\t\t\n");
    CHECK_THROWS_WITH_AS(parse_manifest(dir.file("m.tsv")), doctest::Contains("missing label"),
                         DataError);
  }
  SUBCASE("unresolvable image path") {
    write_manifest_text(dir.file("m.tsv"), "p1\tB\timg1\tnope.png\t" + cp + "\t\t\t\n");
    CHECK_THROWS_WITH_AS(parse_manifest(dir.file("m.tsv")), doctest::Contains("unresolvable"),
                         DataError);
  }
  SUBCASE("conflicting patient labels") {
    write_manifest_text(dir.file("m.tsv"),
                        "p1\tB\timg1\t" + gp + "\t" + cp + "\t\t\t\n" +
                        "p1\tM\timg2\t" + gp + "\t" + cp + "\t\t\t\n");
    CHECK_THROWS_WITH_AS(parse_manifest(dir.file("m.tsv")),
                         doctest::Contains("conflicting labels"), DataError);
  }
}

TEST_CASE("manifest: write/parse round trip preserves records") {
  TempDir dir("manifest_rt");
  auto [gp, cp] = write_pair(dir, "img1");
  write_manifest_text(dir.file("m.tsv"),
                      "p1\tB\timg1\t" + gp + "\t" + cp + "\t1,2,8,9\ttype x\t2.5\n");
  DatasetManifest m = parse_manifest(dir.file("m.tsv"));
  write_manifest(dir.file("m2.tsv"), m);
  DatasetManifest m2 = parse_manifest(dir.file("m2.tsv"));
  CHECK(m2.image_count() == 1);
  CHECK(m2.images()[0].roi->w == 8);
  CHECK(*m2.patient("p1").histological_type == "type x");
}

TEST_CASE("load_pair: happy path, luminance collapse, channel errors") {
  TempDir dir("load_pair");
  auto [gp, cp] = write_pair(dir, "img1", 20, 24, 0.0f);

  ImageRecord rec;
  rec.image_id = "img1";
  rec.patient_id = "p1";
  rec.bmode_path = gp;
  rec.elasto_path = cp;

  ImagePair pair = load_pair(rec, Label::Benign);
  CHECK(pair.gray.channels == 1);
  CHECK(pair.color.channels == 3);
  CHECK(pair.image_id == "img1");
  // all-black 8-bit file decodes to zeros
  for (float v : pair.gray.data) CHECK(v == 0.0f);

  SUBCASE("color bmode collapses to luminance") {
    ImageRecord rec2 = rec;
    rec2.bmode_path = cp;  // color file on the gray slot
    ImagePair p2 = load_pair(rec2, Label::Benign);
    CHECK(p2.gray.channels == 1);
    const float expect = 0.299f * (51.0f / 255) + 0.587f * (102.0f / 255) +
                         0.114f * (153.0f / 255);
    CHECK(p2.gray.at(0, 0, 0) == doctest::Approx(expect).epsilon(0.02));
  }
  SUBCASE("1-channel elasto file is rejected") {
    ImageRecord rec3 = rec;
    rec3.elasto_path = gp;
    CHECK_THROWS_WITH_AS(load_pair(rec3, Label::Benign), doctest::Contains("3 channels"),
                         DataError);
  }
  SUBCASE("jpeg decode works") {
    Image gray = constant_image(1, 16, 16, 0.5f);
    // imwrite picks the format from the extension
    const std::string jp = dir.file("img1.jpg");
    save_png(jp, gray);
    ImageRecord rec4 = rec;
    rec4.bmode_path = jp;
    ImagePair p4 = load_pair(rec4, Label::Benign);
    CHECK(p4.gray.at(0, 8, 8) == doctest::Approx(0.5f).epsilon(0.05));
  }
}

TEST_CASE("crop_lesion: geometry and error cases") {
  ImagePair pair;
  pair.gray = constant_image(1, 400, 600, 0.5f);
  pair.color = constant_image(3, 400, 600, 0.25f);
  pair.image_id = "img";

  SUBCASE("interior rectangle") {
    ImagePair out = crop_lesion(pair, Rect{100, 100, 200, 200});
    CHECK(out.gray.height == 200);
    CHECK(out.gray.width == 200);
    CHECK(out.color.height == 200);
  }
  SUBCASE("full-extent rectangle is an identity crop") {
    ImagePair out = crop_lesion(pair, Rect{0, 0, 600, 400});
    CHECK(out.gray.height == 400);
    CHECK(out.gray.width == 600);
    CHECK(out.gray.data == pair.gray.data);
  }
  SUBCASE("roi exceeding width") {
    CHECK_THROWS_AS(crop_lesion(pair, Rect{500, 0, 200, 100}), DataError);
  }
  SUBCASE("zero-area roi") {
    CHECK_THROWS_AS(crop_lesion(pair, Rect{0, 0, 0, 10}), DataError);
  }
}

TEST_CASE("resize_pair: constants, identity, reference resampler") {
  SUBCASE("constant input stays constant") {
    ImagePair pair;
    pair.gray = constant_image(1, 448, 448, 0.37f);
    pair.color = constant_image(3, 448, 448, 0.61f);
    ImagePair out = resize_pair(pair);
    CHECK(out.gray.height == 224);
    for (float v : out.gray.data) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
    for (float v : out.color.data) CHECK(v == doctest::Approx(0.61f).epsilon(1e-6));
  }
  SUBCASE("same-size input is copied bit-exactly") {
    Image img(1, 224, 224);
    Rng rng(42);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    Image out = resize_bilinear(img, 224, 224);
    CHECK(out.data == img.data);
  }
  SUBCASE("37x61 upsampling matches the reference resampler") {
    Image img(1, 37, 61);
    Rng rng(7);
    std::vector<double> src(37 * 61);
    for (std::size_t i = 0; i < src.size(); ++i) {
      src[i] = rng.uniform();
      img.data[i] = static_cast<float>(src[i]);
    }
    Image out = resize_bilinear(img, 224, 224);
    auto ref = testsupport::reference_bilinear(src, 37, 61, 224, 224);
    for (int i = 0; i < 224 * 224; ++i)
      CHECK(out.data[static_cast<std::size_t>(i)] ==
            doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-5));
  }
  SUBCASE("side below 1 is rejected") {
    Image img(1, 8, 8);
    CHECK_THROWS_AS(resize_bilinear(img, 0, 10), DataError);
  }
}

TEST_CASE("stack_modalities: channel semantics") {
  ImagePair pair;
  pair.gray = constant_image(1, 224, 224, 0.2f);
  pair.color = constant_image(3, 224, 224, 0.0f);
  for (int y = 0; y < 224; ++y)
    for (int x = 0; x < 224; ++x) {
      pair.color.at(0, y, x) = 0.5f;
      pair.color.at(1, y, x) = 0.6f;
      pair.color.at(2, y, x) = 0.7f;
    }
  pair.image_id = "img";

  SUBCASE("bse stacks [gray, r, g, b]") {
    StackedSample s = stack_modalities(pair, Modality::BSE);
    CHECK(s.tensor.shape() == std::vector<int>{4, 224, 224});
    CHECK(s.tensor.at(0, 10, 10) == doctest::Approx(0.2f));
    CHECK(s.tensor.at(1, 10, 10) == doctest::Approx(0.5f));
    CHECK(s.tensor.at(2, 10, 10) == doctest::Approx(0.6f));
    CHECK(s.tensor.at(3, 10, 10) == doctest::Approx(0.7f));
  }
  SUBCASE("b replicates gray three times") {
    StackedSample s = stack_modalities(pair, Modality::B);
    CHECK(s.tensor.shape() == std::vector<int>{3, 224, 224});
    for (int c = 0; c < 3; ++c) CHECK(s.tensor.at(c, 3, 4) == doctest::Approx(0.2f));
  }
  SUBCASE("marker in the gray plane lands only in channel 0") {
    ImagePair marked = pair;
    marked.gray.at(0, 17, 31) = 1.0f;
    StackedSample s = stack_modalities(marked, Modality::BSE);
    CHECK(s.tensor.at(0, 17, 31) == doctest::Approx(1.0f));
    CHECK(s.tensor.at(1, 17, 31) == doctest::Approx(0.5f));
    CHECK(s.tensor.at(2, 17, 31) == doctest::Approx(0.6f));
    CHECK(s.tensor.at(3, 17, 31) == doctest::Approx(0.7f));
  }
  SUBCASE("size mismatch is rejected") {
    ImagePair bad = pair;
    bad.color = constant_image(3, 100, 224, 0.5f);
    CHECK_THROWS_AS(stack_modalities(bad, Modality::BSE), DataError);
  }
}

TEST_CASE("augment: determinism, involution, co-located geometry") {
  StackedSample s = testsupport::make_sample(4, 224, 0.3f);
  // distinctive marker at the same spot in every channel
  for (int c = 0; c < 4; ++c) s.tensor.at(c, 100, 60) = 1.0f;

  SUBCASE("fixed seed gives identical output") {
    Rng r1(123), r2(123);
    StackedSample a = augment(s, r1);
    StackedSample b = augment(s, r2);
    REQUIRE(a.tensor.numel() == b.tensor.numel());
    for (std::int64_t i = 0; i < a.tensor.numel(); ++i) CHECK(a.tensor[i] == b.tensor[i]);
  }
  SUBCASE("all channels receive the identical transform") {
    Rng rng(99);
    StackedSample out = augment(s, rng);
    // find the marker peak in channel 0 and require co-location in channels 1..3
    int best_y = 0, best_x = 0;
    float best = -1.0f;
    for (int y = 0; y < 224; ++y)
      for (int x = 0; x < 224; ++x)
        if (out.tensor.at(0, y, x) > best) {
          best = out.tensor.at(0, y, x);
          best_y = y;
          best_x = x;
        }
    for (int c = 1; c < 4; ++c) {
      float cbest = -1.0f;
      int cy = 0, cx = 0;
      for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x)
          if (out.tensor.at(c, y, x) > cbest) {
            cbest = out.tensor.at(c, y, x);
            cy = y;
            cx = x;
          }
      CHECK(cy == best_y);
      CHECK(cx == best_x);
    }
  }
  SUBCASE("offsets vary across epochs") {
    std::set<std::pair<int, int>> peaks;
    for (int epoch = 0; epoch < 3; ++epoch) {
      Rng rng = named_rng(5, "augment", static_cast<std::uint64_t>(epoch));
      StackedSample out = augment(s, rng);
      int by = 0, bx = 0;
      float best = -1.0f;
      for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x)
          if (out.tensor.at(0, y, x) > best) {
            best = out.tensor.at(0, y, x);
            by = y;
            bx = x;
          }
      peaks.insert({by, bx});
    }
    CHECK(peaks.size() > 1);
  }
  SUBCASE("double horizontal flip restores the image") {
    Image img(2, 8, 8);
    Rng rng(4);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    Image twice = hflip(hflip(img));
    CHECK(twice.data == img.data);
  }
}

namespace {

DatasetManifest synthetic_patients(int n_benign, int n_malignant, const TempDir& dir) {
  auto [gp, cp] = write_pair(dir, "shared");
  DatasetManifest m;
  for (int i = 0; i < n_benign + n_malignant; ++i) {
    PatientRecord p;
    p.patient_id = "p" + std::to_string(i);
    p.label = i < n_benign ? Label::Benign : Label::Malignant;
    ImageRecord rec;
    rec.image_id = "img" + std::to_string(i);
    rec.patient_id = p.patient_id;
    rec.bmode_path = gp;
    rec.elasto_path = cp;
    m.add(p, rec);
  }
  return m;
}

}  // namespace

TEST_CASE("split_patients: sizes, determinism, exclusivity") {
  TempDir dir("split");
  DatasetManifest m = synthetic_patients(42, 43, dir);

  SUBCASE("85 patients with 20 held out gives folds of 13") {
    SplitPlan plan = split_patients(m, 20.0 / 85.0, 7);
    CHECK(plan.test_patients.size() == 20);
    for (const auto& fold : plan.folds) CHECK(fold.size() == 13);
    validate_split(plan, m);
  }
  SUBCASE("same seed twice gives the identical plan") {
    SplitPlan a = split_patients(m, 0.25, 99);
    SplitPlan b = split_patients(m, 0.25, 99);
    CHECK(a.test_patients == b.test_patients);
    for (std::size_t k = 0; k < 5; ++k) CHECK(a.folds[k] == b.folds[k]);
  }
  SUBCASE("no patient is shared between test and any fold") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SplitPlan plan = split_patients(m, 0.3, seed);
      for (const auto& fold : plan.folds)
        for (const auto& id : fold) CHECK(plan.test_patients.count(id) == 0);
      validate_split(plan, m);
    }
  }
  SUBCASE("stratification keeps both classes in test") {
    SplitPlan plan = split_patients(m, 0.25, 3);
    bool has_b = false, has_m = false;
    for (const auto& id : plan.test_patients)
      (m.patient(id).label == Label::Benign ? has_b : has_m) = true;
    CHECK(has_b);
    CHECK(has_m);
  }
  SUBCASE("too few patients is rejected") {
    TempDir dir2("split_small");
    DatasetManifest small = synthetic_patients(3, 3, dir2);
    CHECK_THROWS_AS(split_patients(small, 0.3, 1), DataError);
  }
  SUBCASE("corrupted plan is rejected") {
    SplitPlan plan = split_patients(m, 0.25, 11);
    plan.folds[0].insert(*plan.test_patients.begin());
    CHECK_THROWS_AS(validate_split(plan, m), DataError);
  }
  SUBCASE("plan round-trips through json") {
    TempDir dir3("split_json");
    SplitPlan plan = split_patients(m, 0.25, 17);
    save_split(dir3.file("plan.json"), plan);
    SplitPlan loaded = load_split(dir3.file("plan.json"));
    CHECK(loaded.test_patients == plan.test_patients);
    for (std::size_t k = 0; k < 5; ++k) CHECK(loaded.folds[k] == plan.folds[k]);
    CHECK(loaded.seed == plan.seed);
  }
}

TEST_CASE("make_batch: normalization uses pretraining statistics") {
  StackedSample s = testsupport::make_sample(4, 224, 0.5f);
  s.modality = Modality::BSE;
  nn::Tensor batch = make_batch({&s}, false, nullptr);
  CHECK(batch.shape() == std::vector<int>{1, 4, 224, 224});
  const auto means = channel_means(Modality::BSE);
  const auto stds = channel_stds(Modality::BSE);
  for (int c = 0; c < 4; ++c)
    CHECK(batch.at(0, c, 0, 0) == doctest::Approx((0.5f - means[c]) / stds[c]).epsilon(1e-5));
}
