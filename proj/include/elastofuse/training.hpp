#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "elastofuse/classifier.hpp"
#include "elastofuse/ensemble.hpp"
#include "elastofuse/manifest.hpp"
#include "elastofuse/metrics.hpp"
#include "elastofuse/samples.hpp"
#include "elastofuse/split.hpp"

namespace elastofuse::training {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 16;
  int max_epochs = 0;  // required; no paper-backed default exists
  int patience = 200;
  double min_delta = 0.0;
  std::uint64_t seed = 0;
  dataio::Modality modality = dataio::Modality::BSE;
  bool crop = false;

  void validate() const;
  /// Copy with patience clamped into [1, max_epochs].
  TrainConfig normalized() const;
};

enum class StopDecision { Continue, Stop };

struct EarlyStopState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epochs_since_improvement = 0;
};

/// Pure early-stopping decision: an improvement beyond min_delta resets the
/// counter and records the epoch; the counter reaching patience stops.
StopDecision early_stop_update(EarlyStopState& state, double val_loss, int epoch, int patience,
                               double min_delta);

/// Early stopping bound to a model: snapshots the full state on improvement
/// and can restore the best epoch exactly.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  StopDecision update(double val_loss, int epoch, models::Classifier& model);
  /// Copies the best-epoch snapshot back into the model.
  void restore(models::Classifier& model) const;
  const EarlyStopState& state() const { return state_; }
  bool has_snapshot() const { return !snapshot_.empty(); }

 private:
  int patience_;
  double min_delta_;
  EarlyStopState state_;
  std::vector<std::pair<std::string, nn::Tensor>> snapshot_;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

/// Mini-batch cross-entropy training with adaptive-moment updates, online
/// augmentation on training batches only, per-epoch validation, early
/// stopping, and best-epoch weight restoration. rng_scope isolates this
/// loop's random streams (batch order, augmentation) from other stages.
/// Throws on empty sets, a model without trainable parameters, overlapping
/// train/val patients, or a non-finite loss.
TrainResult train_loop(models::Classifier& model,
                       const std::vector<const dataio::StackedSample*>& train_set,
                       const std::vector<const dataio::StackedSample*>& val_set,
                       const TrainConfig& config, const std::string& rng_scope);

/// Evaluation-mode predictions for a sample set.
std::vector<metrics::PredictionRecord> predict(
    models::Classifier& model, const std::vector<const dataio::StackedSample*>& samples,
    int batch_size);

enum class ModelKind { AlexNet, ResNet18, Ensemble };

ModelKind model_kind_from_string(const std::string& s);
const char* model_kind_name(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::Ensemble;
  backbones::InflatePolicy inflate = backbones::InflatePolicy::ZeroInit;
  backbones::FreezePolicy freeze_alexnet = backbones::FreezePolicy::alexnet_last3();
  backbones::FreezePolicy freeze_resnet = backbones::FreezePolicy::resnet_freeze_first4();

  const backbones::FreezePolicy& policy_for(const std::string& arch) const {
    return arch == "alexnet" ? freeze_alexnet : freeze_resnet;
  }
};

struct FoldResult {
  int fold = 0;
  std::string checkpoint_path;  // empty when no run_dir given
  std::map<std::string, TrainResult> stages;
  std::vector<metrics::PredictionRecord> test_predictions;
};

struct CVRunResult {
  std::vector<FoldResult> folds;
  std::vector<metrics::FoldEvaluation> evaluations;
};

/// Builds the per-fold model from pretrained weights (inflating to 4 channels
/// for BSE input), runs the fine-tuning recipe (for the ensemble: fine-tune
/// both backbones, strip, fuse, fine-tune the head), evaluates each fold's
/// model on the fixed test set, and writes fold artifacts under run_dir when
/// given (checkpoint.efc, predictions.csv, loss_history.csv).
CVRunResult cross_validate(const dataio::DatasetManifest& manifest,
                           const dataio::SplitPlan& plan, const ModelSpec& spec,
                           const TrainConfig& config, const backbones::WeightSource& weights,
                           const std::string& run_dir = "");

/// The stage-1 + optional fusion recipe for one train/val split; returns the
/// trained model and per-stage histories. Exposed for the CV driver and
/// direct use in tests.
struct StagedModel {
  std::unique_ptr<models::Classifier> model;
  std::map<std::string, TrainResult> stages;
};
StagedModel train_staged(const ModelSpec& spec,
                         const std::vector<const dataio::StackedSample*>& train_set,
                         const std::vector<const dataio::StackedSample*>& val_set,
                         const TrainConfig& config, const backbones::WeightSource& weights,
                         const std::string& rng_scope);

}  // namespace elastofuse::training
