#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "elastofuse/manifest.hpp"

namespace elastofuse::dataio {

/// Patient-exclusive train/test assignment plus 5-fold partition of the
/// non-test patients. Image rows never appear here; every image inherits its
/// patient's partition.
struct SplitPlan {
  std::set<std::string> test_patients;
  std::vector<std::set<std::string>> folds;
  std::uint64_t seed = 0;

  std::vector<std::string> train_patients(std::size_t val_fold) const;
  const std::set<std::string>& val_patients(std::size_t fold) const { return folds.at(fold); }
};

constexpr std::size_t kFoldCount = 5;

/// Stratified patient-level split: round(n_label * test_fraction) patients of
/// each label go to test; the remainder is dealt label-by-label across 5
/// near-equal folds. Throws DataError when a fold or the test set would miss
/// a class.
SplitPlan split_patients(const DatasetManifest& manifest, double test_fraction,
                         std::uint64_t seed);

/// Checks disjointness and exact coverage of the manifest's patients.
/// Throws DataError naming the violated invariant.
void validate_split(const SplitPlan& plan, const DatasetManifest& manifest);

void save_split(const std::string& path, const SplitPlan& plan);
SplitPlan load_split(const std::string& path);

}  // namespace elastofuse::dataio
