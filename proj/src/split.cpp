#include "elastofuse/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "elastofuse/errors.hpp"
#include "elastofuse/rng.hpp"

using nlohmann::json;

namespace elastofuse::dataio {

std::vector<std::string> SplitPlan::train_patients(std::size_t val_fold) const {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    if (k == val_fold) continue;
    out.insert(out.end(), folds[k].begin(), folds[k].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<std::string> shuffled_ids(const DatasetManifest& manifest, Label label, Rng& rng) {
  std::vector<std::string> ids;
  for (const auto& p : manifest.patients())
    if (p.label == label) ids.push_back(p.patient_id);
  std::sort(ids.begin(), ids.end());
  // Fisher-Yates
  for (std::size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.uniform_int(i)]);
  return ids;
}

}  // namespace

SplitPlan split_patients(const DatasetManifest& manifest, double test_fraction,
                         std::uint64_t seed) {
  if (manifest.patient_count() == 0) throw DataError("split of empty manifest");
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw DataError("test_fraction must lie in (0, 1)");

  Rng rng = named_rng(seed, "split");
  auto benign = shuffled_ids(manifest, Label::Benign, rng);
  auto malignant = shuffled_ids(manifest, Label::Malignant, rng);

  SplitPlan plan;
  plan.seed = seed;
  plan.folds.assign(kFoldCount, {});

  auto take_test = [&](std::vector<std::string>& ids) {
    auto n = static_cast<std::size_t>(
        std::llround(static_cast<double>(ids.size()) * test_fraction));
    n = std::min(n, ids.size());
    for (std::size_t i = 0; i < n; ++i) plan.test_patients.insert(ids[i]);
    ids.erase(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
  };
  take_test(benign);
  take_test(malignant);

  if (benign.size() < kFoldCount || malignant.size() < kFoldCount)
    throw DataError("too few patients to populate every fold with both classes");
  bool test_has_benign = false, test_has_malignant = false;
  for (const auto& id : plan.test_patients)
    (manifest.patient(id).label == Label::Benign ? test_has_benign : test_has_malignant) = true;
  if (!test_has_benign || !test_has_malignant)
    throw DataError("test split lacks one class; adjust test_fraction");

  // Deal each label round-robin; continue the rotation across labels so fold
  // sizes stay near-equal.
  std::size_t turn = 0;
  for (const auto& id : benign) plan.folds[turn++ % kFoldCount].insert(id);
  for (const auto& id : malignant) plan.folds[turn++ % kFoldCount].insert(id);

  validate_split(plan, manifest);
  return plan;
}

void validate_split(const SplitPlan& plan, const DatasetManifest& manifest) {
  if (plan.folds.size() != kFoldCount)
    throw DataError("split plan must carry exactly 5 folds");
  std::set<std::string> seen = plan.test_patients;
  std::size_t total = plan.test_patients.size();
  for (const auto& fold : plan.folds) {
    for (const auto& id : fold) {
      if (!seen.insert(id).second)
        throw DataError("patient appears in more than one partition: " + id);
    }
    total += fold.size();
  }
  if (total != manifest.patient_count() || seen.size() != manifest.patient_count())
    throw DataError("split plan does not cover every patient exactly once");
  for (const auto& id : seen)
    if (!manifest.has_patient(id)) throw DataError("split names unknown patient: " + id);
}

void save_split(const std::string& path, const SplitPlan& plan) {
  json j;
  j["seed"] = plan.seed;
  j["test_patients"] = std::vector<std::string>(plan.test_patients.begin(),
                                                plan.test_patients.end());
  j["folds"] = json::array();
  for (const auto& fold : plan.folds)
    j["folds"].push_back(std::vector<std::string>(fold.begin(), fold.end()));
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split plan: " + path);
  out << j.dump(2) << "\n";
}

SplitPlan load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing split plan: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed split plan " + path + ": " + e.what());
  }
  SplitPlan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& id : j.at("test_patients")) plan.test_patients.insert(id.get<std::string>());
  for (const auto& fold : j.at("folds")) {
    std::set<std::string> ids;
    for (const auto& id : fold) ids.insert(id.get<std::string>());
    plan.folds.push_back(std::move(ids));
  }
  if (plan.folds.size() != kFoldCount)
    throw DataError("split plan must carry exactly 5 folds: " + path);
  return plan;
}

}  // namespace elastofuse::dataio
