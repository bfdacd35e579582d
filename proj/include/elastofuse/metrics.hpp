#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "elastofuse/tensor.hpp"

namespace elastofuse::metrics {

/// Positive class is malignant (index 1) throughout.
struct ConfusionMatrix {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

/// Ratios with zero denominators are absent, never silently zero.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> specificity;
  std::optional<double> sensitivity;
  std::optional<double> f1;
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truths);
Metrics compute_metrics(const ConfusionMatrix& cm);

/// Majority vote over one patient's image-level predictions: benign only on a
/// strict benign majority, ties and malignant majorities give malignant.
int patient_vote(const std::vector<int>& image_predictions);

/// Mean over patients of the correctly classified fraction of their images.
/// Input: per patient (correct images, total images).
double patient_recognition_rate(const std::vector<std::pair<long, long>>& per_patient);

/// Probability the model assigned to each sample's true class.
struct PPVSample {
  std::string image_id;
  int true_label = 0;
  double ppv = 0.0;
};
std::vector<PPVSample> ppv_extract(const nn::Tensor& probs, const std::vector<int>& truths,
                                   const std::vector<std::string>& image_ids);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

/// Unequal-variance two-sample t statistic with Welch-Satterthwaite degrees
/// of freedom and a two-sided p. Each sample needs >= 2 elements; throws when
/// both variances vanish.
TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n-1)
};

/// Mean and sample SD; requires >= 2 values.
MeanSd aggregate_cv(const std::vector<double>& fold_values);

/// Same, skipping absent fold entries; absent result when fewer than 2
/// defined values remain.
std::optional<MeanSd> aggregate_optional(const std::vector<std::optional<double>>& values);

// ---------------------------------------------------------------------------
// Prediction records and fold evaluation

struct PredictionRecord {
  std::string image_id;
  std::string patient_id;
  int true_label = 0;
  double p_benign = 0.5;
  double p_malignant = 0.5;

  int predicted() const { return p_benign > p_malignant ? 0 : 1; }
};

void write_predictions(const std::string& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::string& path);

struct PatientSummary {
  std::string patient_id;
  int true_label = 0;
  int voted = 0;
  long images = 0;
  long correct_images = 0;
  double mean_ppv = 0.0;
  double vote_margin = 0.0;  // |benign votes - malignant votes| / images
};

/// Everything Table-1/Table-3 style reporting needs from one fold.
struct FoldEvaluation {
  ConfusionMatrix image_cm;
  ConfusionMatrix patient_cm;
  Metrics image_metrics;
  Metrics patient_metrics;
  double recognition_rate = 0.0;
  std::vector<PPVSample> ppv;
  std::vector<PatientSummary> patients;
};

FoldEvaluation evaluate_fold(const std::vector<PredictionRecord>& predictions);

// ---------------------------------------------------------------------------
// Report rendering

struct RunKey {
  std::string model;
  std::string modality;
  bool crop = false;

  std::string display() const;
};

struct RunEvaluation {
  RunKey key;
  std::vector<FoldEvaluation> folds;
};

/// Writes metrics.csv / metrics.json (mean +/- SD per metric, image- and
/// patient-wise), recognition_rate.csv, per_patient.csv, and pvalues.csv
/// (pairwise Welch tests on PPV distributions, pooled and per fold) under
/// out_dir. Output is deterministic byte-for-byte for identical inputs.
void render_report(const std::vector<RunEvaluation>& runs, const std::string& out_dir);

/// "90.00 +/- 2.15"-style cell (value scale 0..1 rendered as percent).
std::string format_cell(const std::optional<MeanSd>& agg);

}  // namespace elastofuse::metrics
