#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "elastofuse/errors.hpp"
#include "elastofuse/metrics.hpp"
#include "elastofuse/rng.hpp"
#include "support.hpp"

using namespace elastofuse;
using namespace elastofuse::metrics;
using testsupport::TempDir;

TEST_CASE("confusion: counting under the malignant-positive convention") {
  SUBCASE("all correct, all malignant") {
    ConfusionMatrix cm = confusion({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1});
    CHECK(cm.tp == 5);
    CHECK(cm.fp == 0);
    CHECK(cm.tn == 0);
    CHECK(cm.fn == 0);
  }
  SUBCASE("all wrong on a balanced four") {
    ConfusionMatrix cm = confusion({1, 1, 0, 0}, {0, 0, 1, 1});
    CHECK(cm.tp == 0);
    CHECK(cm.tn == 0);
    CHECK(cm.fp == 2);
    CHECK(cm.fn == 2);
  }
  SUBCASE("empty input gives the zero matrix") {
    ConfusionMatrix cm = confusion({}, {});
    CHECK(cm.total() == 0);
  }
  SUBCASE("length mismatch") { CHECK_THROWS_AS(confusion({1}, {1, 0}), DataError); }
}

TEST_CASE("compute_metrics: formula arithmetic and undefined ratios") {
  SUBCASE("worked example") {
    Metrics m = compute_metrics({9, 2, 8, 1});  // tp fp tn fn
    CHECK(*m.sensitivity == doctest::Approx(0.900).epsilon(1e-4));
    CHECK(*m.specificity == doctest::Approx(0.800).epsilon(1e-4));
    CHECK(*m.precision == doctest::Approx(0.8182).epsilon(1e-3));
    CHECK(*m.accuracy == doctest::Approx(0.850).epsilon(1e-4));
    CHECK(*m.f1 == doctest::Approx(0.8571).epsilon(1e-3));
  }
  SUBCASE("perfect predictions") {
    Metrics m = compute_metrics({5, 0, 5, 0});
    CHECK(*m.accuracy == 1.0);
    CHECK(*m.precision == 1.0);
    CHECK(*m.specificity == 1.0);
    CHECK(*m.sensitivity == 1.0);
    CHECK(*m.f1 == 1.0);
  }
  SUBCASE("precision is absent when no positive predictions exist") {
    Metrics m = compute_metrics({0, 0, 4, 2});
    CHECK(!m.precision.has_value());
    CHECK(m.accuracy.has_value());
    CHECK(!m.f1.has_value());
  }
  SUBCASE("empty matrix is rejected") {
    CHECK_THROWS_AS(compute_metrics({0, 0, 0, 0}), DataError);
  }
  SUBCASE("random matrices against direct arithmetic") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      ConfusionMatrix cm;
      cm.tp = static_cast<long>(rng.uniform_int(20));
      cm.fp = static_cast<long>(rng.uniform_int(20));
      cm.tn = static_cast<long>(rng.uniform_int(20));
      cm.fn = static_cast<long>(rng.uniform_int(20));
      if (cm.total() == 0) cm.tp = 1;
      Metrics m = compute_metrics(cm);
      const double total = static_cast<double>(cm.total());
      CHECK(*m.accuracy == doctest::Approx((cm.tp + cm.tn) / total).epsilon(1e-12));
      if (cm.tp + cm.fp > 0)
        CHECK(*m.precision ==
              doctest::Approx(cm.tp / static_cast<double>(cm.tp + cm.fp)).epsilon(1e-12));
      else
        CHECK(!m.precision.has_value());
      // identity: accuracy * total == tp + tn
      CHECK(*m.accuracy * total == doctest::Approx(cm.tp + cm.tn).epsilon(1e-9));
      if (m.f1) {
        const double h = 2.0 * *m.precision * *m.sensitivity / (*m.precision + *m.sensitivity);
        CHECK(*m.f1 == doctest::Approx(h).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("patient_vote: strict benign majority, ties to malignant") {
  CHECK(patient_vote({0, 0, 0, 1}) == 0);  // B_p=3 > 1
  CHECK(patient_vote({0, 0, 1, 1}) == 1);  // tie
  CHECK(patient_vote({1}) == 1);
  CHECK(patient_vote({0}) == 0);
  CHECK_THROWS_AS(patient_vote({}), DataError);

  SUBCASE("exhaustive agreement with brute-force enumeration up to 7 images") {
    for (int n = 1; n <= 7; ++n) {
      for (int mask = 0; mask < (1 << n); ++mask) {
        std::vector<int> preds;
        int benign = 0;
        for (int i = 0; i < n; ++i) {
          const int p = (mask >> i) & 1;
          preds.push_back(p);
          if (p == 0) ++benign;
        }
        const int expected = benign > n - benign ? 0 : 1;
        CHECK(patient_vote(preds) == expected);
      }
    }
  }
  SUBCASE("one misclassified image of four still yields the correct patient") {
    // truth malignant; 3 of 4 images called malignant
    std::vector<int> preds = {1, 1, 1, 0};
    CHECK(patient_vote(preds) == 1);
    // image-wise accuracy 75%, patient-wise 100%
    ConfusionMatrix cm = confusion(preds, {1, 1, 1, 1});
    CHECK(*compute_metrics(cm).accuracy == doctest::Approx(0.75));
  }
}

TEST_CASE("patient_recognition_rate: formula and properties") {
  CHECK(patient_recognition_rate({{3, 4}}) == doctest::Approx(0.75));
  CHECK(patient_recognition_rate({{2, 2}, {1, 4}}) == doctest::Approx(0.625));
  CHECK(patient_recognition_rate({{2, 2}, {3, 3}, {5, 5}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(patient_recognition_rate({}), DataError);
  CHECK_THROWS_AS(patient_recognition_rate({{1, 0}}), DataError);

  SUBCASE("1000 random tables against direct summation") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_int(12));
      std::vector<std::pair<long, long>> table;
      double direct = 0.0;
      for (int i = 0; i < n; ++i) {
        const long total = 1 + static_cast<long>(rng.uniform_int(9));
        const long correct = static_cast<long>(rng.uniform_int(total + 1));
        table.emplace_back(correct, total);
        direct += static_cast<double>(correct) / static_cast<double>(total);
      }
      direct /= n;
      CHECK(patient_recognition_rate(table) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("ppv_extract: true-class probability") {
  nn::Tensor probs({2, 2});
  probs.at(0, 0) = 0.9f;
  probs.at(0, 1) = 0.1f;
  probs.at(1, 0) = 0.9f;
  probs.at(1, 1) = 0.1f;
  auto samples = ppv_extract(probs, {0, 1}, {"a", "b"});
  CHECK(samples[0].ppv == doctest::Approx(0.9));
  CHECK(samples[1].ppv == doctest::Approx(0.1));
  // complement structure: ppv + other-class probability == 1
  CHECK(samples[0].ppv + probs.at(0, 1) == doctest::Approx(1.0).epsilon(1e-6));

  nn::Tensor bad({1, 2});
  bad.at(0, 0) = 0.9f;
  bad.at(0, 1) = 0.4f;
  CHECK_THROWS_AS(ppv_extract(bad, {0}, {"x"}), DataError);
}

namespace {
struct WelchCase {
  std::vector<double> a, b;
  double t, p;
};
const WelchCase kWelchCases[] = {
#include "data/welch_oracle.inc"
};
}  // namespace

TEST_CASE("welch_ttest: against the frozen reference oracle") {
  for (const auto& c : kWelchCases) {
    TTestResult r = welch_ttest(c.a, c.b);
    CHECK(r.t == doctest::Approx(c.t).epsilon(1e-9).scale(1.0));
    CHECK(r.p == doctest::Approx(c.p).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("welch_ttest: symmetry, identical samples, degenerate input") {
  std::vector<double> a = {1.2, 3.4, 2.2, 0.1};
  std::vector<double> b = {4.0, 3.9, 5.1};
  TTestResult ab = welch_ttest(a, b);
  TTestResult ba = welch_ttest(b, a);
  CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
  CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));

  TTestResult same = welch_ttest(a, a);
  CHECK(same.t == doctest::Approx(0.0));
  CHECK(same.p == doctest::Approx(1.0));

  CHECK_THROWS_AS(welch_ttest({1.0}, a), DataError);
  CHECK_THROWS_AS(welch_ttest({2.0, 2.0}, {3.0, 3.0}), DataError);
}

TEST_CASE("aggregate_cv: sample standard deviation") {
  MeanSd agg = aggregate_cv({1, 2, 3, 4, 5});
  CHECK(agg.mean == doctest::Approx(3.0));
  CHECK(agg.sd == doctest::Approx(1.5811).epsilon(1e-4));
  MeanSd flat = aggregate_cv({2, 2, 2});
  CHECK(flat.sd == doctest::Approx(0.0));
  CHECK_THROWS_AS(aggregate_cv({1.0}), DataError);

  auto opt = aggregate_optional({std::nullopt, 1.0, std::nullopt, 3.0});
  REQUIRE(opt.has_value());
  CHECK(opt->mean == doctest::Approx(2.0));
  CHECK(!aggregate_optional({std::nullopt, 1.0}).has_value());
}

TEST_CASE("prediction files: round trip and fold evaluation") {
  TempDir dir("pred");
  std::vector<PredictionRecord> recs = {
      {"i1", "p1", 1, 0.2, 0.8}, {"i2", "p1", 1, 0.6, 0.4}, {"i3", "p1", 1, 0.3, 0.7},
      {"i4", "p2", 0, 0.9, 0.1}, {"i5", "p2", 0, 0.8, 0.2},
  };
  write_predictions(dir.file("p.csv"), recs);
  auto loaded = read_predictions(dir.file("p.csv"));
  REQUIRE(loaded.size() == 5);
  CHECK(loaded[0].image_id == "i1");
  CHECK(loaded[0].p_malignant == doctest::Approx(0.8));
  CHECK(loaded[3].true_label == 0);

  FoldEvaluation ev = evaluate_fold(loaded);
  // image-wise: 4 of 5 correct
  CHECK(*ev.image_metrics.accuracy == doctest::Approx(0.8));
  // patient-wise: p1 votes malignant (2 of 3), p2 benign -> both correct
  CHECK(*ev.patient_metrics.accuracy == doctest::Approx(1.0));
  CHECK(ev.recognition_rate == doctest::Approx(0.5 * (2.0 / 3.0 + 1.0)));
  REQUIRE(ev.patients.size() == 2);
  CHECK(ev.patients[0].voted == 1);
  CHECK(ev.patients[0].mean_ppv == doctest::Approx((0.8 + 0.4 + 0.7) / 3.0));
}

TEST_CASE("evaluate_fold: all-correct gives accuracy 1 at both granularities") {
  std::vector<PredictionRecord> recs;
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 3; ++i) {
      PredictionRecord r;
      r.image_id = "p" + std::to_string(p) + "i" + std::to_string(i);
      r.patient_id = "p" + std::to_string(p);
      r.true_label = p % 2;
      r.p_benign = r.true_label == 0 ? 0.95 : 0.05;
      r.p_malignant = 1.0 - r.p_benign;
      recs.push_back(r);
    }
  FoldEvaluation ev = evaluate_fold(recs);
  CHECK(*ev.image_metrics.accuracy == doctest::Approx(1.0));
  CHECK(*ev.patient_metrics.accuracy == doctest::Approx(1.0));
  CHECK(ev.recognition_rate == doctest::Approx(1.0));
}

TEST_CASE("render_report: cell formats and determinism") {
  TempDir dir("report");
  RunEvaluation run;
  run.key = {"ensemble", "bse", true};
  Rng rng(3);
  for (int fold = 0; fold < 5; ++fold) {
    std::vector<PredictionRecord> recs;
    for (int p = 0; p < 6; ++p)
      for (int i = 0; i < 3; ++i) {
        PredictionRecord r;
        r.image_id = "f" + std::to_string(fold) + "p" + std::to_string(p) + "i" +
                     std::to_string(i);
        r.patient_id = "p" + std::to_string(p);
        r.true_label = p % 2;
        const bool correct = rng.uniform() < 0.9;
        const double conf = 0.6 + 0.35 * rng.uniform();
        r.p_malignant = (r.true_label == 1) == correct ? conf : 1.0 - conf;
        r.p_benign = 1.0 - r.p_malignant;
        recs.push_back(r);
      }
    run.folds.push_back(evaluate_fold(recs));
  }

  render_report({run}, dir.path());
  std::ifstream in(dir.file("metrics.csv"));
  REQUIRE(in.good());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header.find("accuracy") != std::string::npos);
  CHECK(row.find("patient,ensemble,bse,crop") == 0);
  // "90.00 ± 2.15"-style cell: percent with two decimals and the ± separator
  CHECK(row.find("±") != std::string::npos);
  CHECK(std::filesystem::exists(dir.file("recognition_rate.csv")));
  CHECK(std::filesystem::exists(dir.file("metrics.json")));
  CHECK(std::filesystem::exists(dir.file("per_patient.csv")));

  // byte-identical re-render
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  const std::string before = slurp(dir.file("metrics.csv"));
  render_report({run}, dir.path());
  CHECK(slurp(dir.file("metrics.csv")) == before);

  CHECK_THROWS_AS(render_report({}, dir.path()), DataError);
}

TEST_CASE("format_cell renders percent with two decimals") {
  CHECK(format_cell(MeanSd{0.9, 0.0215}) == "90.00 ± 2.15");
  CHECK(format_cell(std::nullopt) == "");
}
