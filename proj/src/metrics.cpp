#include "elastofuse/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "elastofuse/errors.hpp"

namespace fs = std::filesystem;

namespace elastofuse::metrics {

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truths) {
  if (predictions.size() != truths.size())
    throw DataError("confusion: prediction/truth length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_pos = predictions[i] == 1;
    const bool true_pos = truths[i] == 1;
    if (pred_pos && true_pos) ++cm.tp;
    else if (pred_pos && !true_pos) ++cm.fp;
    else if (!pred_pos && true_pos) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("metrics of an empty confusion matrix");
  Metrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0)
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  if (cm.tn + cm.fp > 0)
    m.specificity = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  if (cm.tp + cm.fn > 0)
    m.sensitivity = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  if (m.precision && m.sensitivity && (*m.precision + *m.sensitivity) > 0.0)
    m.f1 = 2.0 * *m.precision * *m.sensitivity / (*m.precision + *m.sensitivity);
  return m;
}

int patient_vote(const std::vector<int>& image_predictions) {
  if (image_predictions.empty()) throw DataError("patient vote over zero images");
  long benign = 0;
  for (int p : image_predictions)
    if (p == 0) ++benign;
  const long total = static_cast<long>(image_predictions.size());
  return benign > total - benign ? 0 : 1;
}

double patient_recognition_rate(const std::vector<std::pair<long, long>>& per_patient) {
  if (per_patient.empty()) throw DataError("recognition rate over zero patients");
  double acc = 0.0;
  for (const auto& [correct, total] : per_patient) {
    if (total < 1) throw DataError("patient with zero images");
    if (correct < 0 || correct > total) throw DataError("correct count out of range");
    acc += static_cast<double>(correct) / static_cast<double>(total);
  }
  return acc / static_cast<double>(per_patient.size());
}

std::vector<PPVSample> ppv_extract(const nn::Tensor& probs, const std::vector<int>& truths,
                                   const std::vector<std::string>& image_ids) {
  if (probs.dim() != 2 || probs.size(1) != 2) throw DataError("ppv_extract expects [N,2]");
  const int n = probs.size(0);
  if (static_cast<int>(truths.size()) != n || static_cast<int>(image_ids.size()) != n)
    throw DataError("ppv_extract size mismatch");
  std::vector<PPVSample> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float sum = probs.at(i, 0) + probs.at(i, 1);
    if (std::fabs(sum - 1.0f) > 1e-4f || probs.at(i, 0) < 0.0f || probs.at(i, 1) < 0.0f)
      throw DataError("ppv_extract: row is not a probability distribution");
    out[static_cast<std::size_t>(i)] = {image_ids[static_cast<std::size_t>(i)],
                                        truths[static_cast<std::size_t>(i)],
                                        probs.at(i, truths[static_cast<std::size_t>(i)])};
  }
  return out;
}

namespace {

std::pair<double, double> mean_var(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= (n - 1.0);
  return {mean, var};
}

}  // namespace

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("welch_ttest needs >= 2 samples per side");
  for (double v : a)
    if (!std::isfinite(v)) throw DataError("welch_ttest: non-finite sample");
  for (double v : b)
    if (!std::isfinite(v)) throw DataError("welch_ttest: non-finite sample");
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  if (sa + sb <= 0.0) {
    if (ma == mb) return {0.0, 1.0, na + nb - 2.0};
    throw DataError("welch_ttest: zero variance in both samples");
  }
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  return r;
}

MeanSd aggregate_cv(const std::vector<double>& fold_values) {
  if (fold_values.size() < 2) throw DataError("aggregate needs >= 2 folds");
  const auto [mean, var] = mean_var(fold_values);
  return {mean, std::sqrt(var)};
}

std::optional<MeanSd> aggregate_optional(const std::vector<std::optional<double>>& values) {
  std::vector<double> defined;
  for (const auto& v : values)
    if (v) defined.push_back(*v);
  if (defined.size() < 2) return std::nullopt;
  return aggregate_cv(defined);
}

// ---------------------------------------------------------------------------
// Prediction files

void write_predictions(const std::string& path, const std::vector<PredictionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions: " + path);
  out << "image_id,patient_id,true_label,p_benign,p_malignant\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.9f,%.9f", r.p_benign, r.p_malignant);
    out << r.image_id << ',' << r.patient_id << ','
        << (r.true_label == 0 ? 'B' : 'M') << ',' << buf << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing prediction file: " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    PredictionRecord r;
    std::string label, pb, pm;
    if (!std::getline(ss, r.image_id, ',') || !std::getline(ss, r.patient_id, ',') ||
        !std::getline(ss, label, ',') || !std::getline(ss, pb, ',') || !std::getline(ss, pm))
      throw DataError("malformed prediction row: " + line);
    if (label == "B") r.true_label = 0;
    else if (label == "M") r.true_label = 1;
    else throw DataError("prediction row with unknown label: " + line);
    r.p_benign = std::stod(pb);
    r.p_malignant = std::stod(pm);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError("empty prediction file: " + path);
  return out;
}

FoldEvaluation evaluate_fold(const std::vector<PredictionRecord>& predictions) {
  if (predictions.empty()) throw DataError("evaluation of zero predictions");
  FoldEvaluation ev;

  std::vector<int> preds, truths;
  std::vector<std::string> ids;
  nn::Tensor probs({static_cast<int>(predictions.size()), 2});
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& r = predictions[i];
    preds.push_back(r.predicted());
    truths.push_back(r.true_label);
    ids.push_back(r.image_id);
    probs.at(static_cast<int>(i), 0) = static_cast<float>(r.p_benign);
    probs.at(static_cast<int>(i), 1) = static_cast<float>(r.p_malignant);
  }
  ev.image_cm = confusion(preds, truths);
  ev.image_metrics = compute_metrics(ev.image_cm);
  ev.ppv = ppv_extract(probs, truths, ids);

  std::map<std::string, std::vector<std::size_t>> by_patient;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    by_patient[predictions[i].patient_id].push_back(i);

  std::vector<int> patient_preds, patient_truths;
  std::vector<std::pair<long, long>> recognition;
  for (const auto& [pid, rows] : by_patient) {
    PatientSummary s;
    s.patient_id = pid;
    s.true_label = predictions[rows.front()].true_label;
    s.images = static_cast<long>(rows.size());
    std::vector<int> votes;
    double ppv_sum = 0.0;
    long benign_votes = 0;
    for (std::size_t i : rows) {
      if (predictions[i].true_label != s.true_label)
        throw DataError("inconsistent true labels for patient " + pid);
      votes.push_back(preds[i]);
      if (preds[i] == truths[i]) ++s.correct_images;
      if (preds[i] == 0) ++benign_votes;
      ppv_sum += ev.ppv[i].ppv;
    }
    s.voted = patient_vote(votes);
    s.mean_ppv = ppv_sum / static_cast<double>(rows.size());
    s.vote_margin = std::fabs(static_cast<double>(2 * benign_votes - s.images)) /
                    static_cast<double>(s.images);
    patient_preds.push_back(s.voted);
    patient_truths.push_back(s.true_label);
    recognition.emplace_back(s.correct_images, s.images);
    ev.patients.push_back(std::move(s));
  }
  ev.patient_cm = confusion(patient_preds, patient_truths);
  ev.patient_metrics = compute_metrics(ev.patient_cm);
  ev.recognition_rate = patient_recognition_rate(recognition);
  return ev;
}

// ---------------------------------------------------------------------------
// Report rendering

std::string RunKey::display() const {
  return model + "/" + modality + (crop ? "/crop" : "/full");
}

std::string format_cell(const std::optional<MeanSd>& agg) {
  if (!agg) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", agg->mean * 100.0, agg->sd * 100.0);
  return buf;
}

namespace {

using MetricGetter = std::optional<double> (*)(const Metrics&);

std::optional<MeanSd> metric_agg(const RunEvaluation& run, bool patient_wise, MetricGetter get) {
  std::vector<std::optional<double>> vals;
  for (const auto& fold : run.folds)
    vals.push_back(get(patient_wise ? fold.patient_metrics : fold.image_metrics));
  return aggregate_optional(vals);
}

std::vector<double> pooled_ppv(const RunEvaluation& run) {
  std::vector<double> out;
  for (const auto& fold : run.folds)
    for (const auto& s : fold.ppv) out.push_back(s.ppv);
  return out;
}

const std::vector<std::pair<std::string, MetricGetter>>& metric_columns() {
  static const std::vector<std::pair<std::string, MetricGetter>> cols = {
      {"accuracy", [](const Metrics& m) { return m.accuracy; }},
      {"precision", [](const Metrics& m) { return m.precision; }},
      {"specificity", [](const Metrics& m) { return m.specificity; }},
      {"sensitivity", [](const Metrics& m) { return m.sensitivity; }},
      {"f1", [](const Metrics& m) { return m.f1; }},
  };
  return cols;
}

}  // namespace

void render_report(const std::vector<RunEvaluation>& runs, const std::string& out_dir) {
  if (runs.empty()) throw DataError("report over zero runs");
  for (const auto& run : runs)
    if (run.folds.empty()) throw DataError("report run without folds: " + run.key.display());
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw DataError("unwritable report destination: " + out_dir);

  // Table-1-shaped metric grid
  {
    std::ofstream out(fs::path(out_dir) / "metrics.csv");
    if (!out) throw DataError("cannot write metrics.csv");
    out << "granularity,model,modality,crop";
    for (const auto& [name, _] : metric_columns()) out << ',' << name;
    out << '\n';
    for (bool patient_wise : {true, false}) {
      for (const auto& run : runs) {
        out << (patient_wise ? "patient" : "image") << ',' << run.key.model << ','
            << run.key.modality << ',' << (run.key.crop ? "crop" : "full");
        for (const auto& [_, getter] : metric_columns())
          out << ',' << format_cell(metric_agg(run, patient_wise, getter));
        out << '\n';
      }
    }
  }

  // Machine-readable mirror with per-fold values
  {
    std::ofstream out(fs::path(out_dir) / "metrics.json");
    if (!out) throw DataError("cannot write metrics.json");
    out << "{\n  \"sd_convention\": \"sample (n-1)\",\n  \"runs\": [\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto& run = runs[r];
      out << "    {\n      \"model\": \"" << run.key.model << "\",\n      \"modality\": \""
          << run.key.modality << "\",\n      \"crop\": " << (run.key.crop ? "true" : "false")
          << ",\n      \"folds\": " << run.folds.size() << ",\n";
      auto emit_section = [&](const char* name, bool patient_wise) {
        out << "      \"" << name << "\": {";
        bool first = true;
        for (const auto& [mname, getter] : metric_columns()) {
          auto agg = metric_agg(run, patient_wise, getter);
          if (!first) out << ", ";
          first = false;
          out << "\"" << mname << "\": ";
          if (agg) {
            char buf[80];
            std::snprintf(buf, sizeof(buf), "{\"mean\": %.6f, \"sd\": %.6f}", agg->mean,
                          agg->sd);
            out << buf;
          } else {
            out << "null";
          }
        }
        out << "}";
      };
      emit_section("patient_wise", true);
      out << ",\n";
      emit_section("image_wise", false);
      out << ",\n      \"recognition_rate\": ";
      {
        std::vector<double> rr;
        for (const auto& f : run.folds) rr.push_back(f.recognition_rate);
        char buf[80];
        if (rr.size() >= 2) {
          MeanSd agg = aggregate_cv(rr);
          std::snprintf(buf, sizeof(buf), "{\"mean\": %.6f, \"sd\": %.6f}", agg.mean, agg.sd);
        } else {
          std::snprintf(buf, sizeof(buf), "{\"mean\": %.6f, \"sd\": 0.0}", rr.front());
        }
        out << buf;
      }
      out << "\n    }" << (r + 1 < runs.size() ? "," : "") << "\n";
    }
    out << "  ]\n}\n";
  }

  // Table-3-shaped recognition-rate table
  {
    std::ofstream out(fs::path(out_dir) / "recognition_rate.csv");
    if (!out) throw DataError("cannot write recognition_rate.csv");
    out << "model,modality,crop,recognition_rate\n";
    for (const auto& run : runs) {
      std::vector<double> rr;
      for (const auto& f : run.folds) rr.push_back(f.recognition_rate);
      double mean = 0.0;
      for (double v : rr) mean += v;
      mean /= static_cast<double>(rr.size());
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", mean * 100.0);
      out << run.key.model << ',' << run.key.modality << ','
          << (run.key.crop ? "crop" : "full") << ',' << buf << '\n';
    }
  }

  // Per-patient audit (vote, margin, mean PPV) per run and fold
  {
    std::ofstream out(fs::path(out_dir) / "per_patient.csv");
    if (!out) throw DataError("cannot write per_patient.csv");
    out << "model,modality,crop,fold,patient_id,true_label,voted,images,correct_images,"
           "mean_ppv,vote_margin\n";
    for (const auto& run : runs) {
      for (std::size_t k = 0; k < run.folds.size(); ++k) {
        for (const auto& p : run.folds[k].patients) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.4f,%.4f", p.mean_ppv, p.vote_margin);
          out << run.key.model << ',' << run.key.modality << ','
              << (run.key.crop ? "crop" : "full") << ',' << k << ',' << p.patient_id << ','
              << (p.true_label == 0 ? 'B' : 'M') << ',' << (p.voted == 0 ? 'B' : 'M') << ','
              << p.images << ',' << p.correct_images << ',' << buf << '\n';
        }
      }
    }
  }

  // Fig-5-shaped pairwise Welch tests on PPV distributions
  if (runs.size() >= 2) {
    std::ofstream out(fs::path(out_dir) / "pvalues.csv");
    if (!out) throw DataError("cannot write pvalues.csv");
    out << "run_a,run_b,pooled_t,pooled_p";
    const std::size_t folds = runs.front().folds.size();
    for (std::size_t k = 0; k < folds; ++k) out << ",fold" << k << "_p";
    out << '\n';
    for (std::size_t i = 0; i < runs.size(); ++i) {
      for (std::size_t j = i + 1; j < runs.size(); ++j) {
        out << runs[i].key.display() << ',' << runs[j].key.display();
        char buf[64];
        try {
          TTestResult r = welch_ttest(pooled_ppv(runs[i]), pooled_ppv(runs[j]));
          std::snprintf(buf, sizeof(buf), ",%.4f,%.6g", r.t, r.p);
          out << buf;
        } catch (const DataError&) {
          out << ",,";
        }
        for (std::size_t k = 0; k < folds; ++k) {
          std::vector<double> pa, pb;
          if (k < runs[i].folds.size())
            for (const auto& s : runs[i].folds[k].ppv) pa.push_back(s.ppv);
          if (k < runs[j].folds.size())
            for (const auto& s : runs[j].folds[k].ppv) pb.push_back(s.ppv);
          try {
            TTestResult r = welch_ttest(pa, pb);
            std::snprintf(buf, sizeof(buf), ",%.6g", r.p);
            out << buf;
          } catch (const DataError&) {
            out << ',';
          }
        }
        out << '\n';
      }
    }
  }
}

}  // namespace elastofuse::metrics
