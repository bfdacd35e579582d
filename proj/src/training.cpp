#include "elastofuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "elastofuse/errors.hpp"
#include "elastofuse/nn/adam.hpp"
#include "elastofuse/rng.hpp"

namespace fs = std::filesystem;

namespace elastofuse::training {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs)
    throw ConfigError("patience must lie in [1, max_epochs]");
  if (min_delta < 0.0) throw ConfigError("min_delta must be >= 0");
}

TrainConfig TrainConfig::normalized() const {
  TrainConfig c = *this;
  c.patience = std::clamp(c.patience, 1, std::max(1, c.max_epochs));
  return c;
}

StopDecision early_stop_update(EarlyStopState& state, double val_loss, int epoch, int patience,
                               double min_delta) {
  if (val_loss < state.best_val_loss - min_delta) {
    state.best_val_loss = val_loss;
    state.best_epoch = epoch;
    state.epochs_since_improvement = 0;
    return StopDecision::Continue;
  }
  ++state.epochs_since_improvement;
  return state.epochs_since_improvement >= patience ? StopDecision::Stop
                                                    : StopDecision::Continue;
}

StopDecision EarlyStopper::update(double val_loss, int epoch, models::Classifier& model) {
  const double previous_best = state_.best_val_loss;
  const StopDecision decision = early_stop_update(state_, val_loss, epoch, patience_, min_delta_);
  if (state_.best_val_loss < previous_best) {
    snapshot_.clear();
    for (auto& [name, tensor] : model.state()) snapshot_.emplace_back(name, *tensor);
  }
  return decision;
}

void EarlyStopper::restore(models::Classifier& model) const {
  if (snapshot_.empty()) return;
  auto state = model.state();
  if (state.size() != snapshot_.size())
    throw ModelError("early-stop snapshot does not match this model");
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i].first != snapshot_[i].first)
      throw ModelError("early-stop snapshot does not match this model");
    *state[i].second = snapshot_[i].second;
  }
}

namespace {

std::set<std::string> patient_ids(const std::vector<const dataio::StackedSample*>& samples) {
  std::set<std::string> out;
  for (const auto* s : samples) out.insert(s->patient_id);
  return out;
}

double evaluate_loss(models::Classifier& model,
                     const std::vector<const dataio::StackedSample*>& samples, int batch_size) {
  double total = 0.0;
  std::size_t done = 0;
  while (done < samples.size()) {
    const std::size_t take = std::min<std::size_t>(batch_size, samples.size() - done);
    std::vector<const dataio::StackedSample*> batch(samples.begin() + done,
                                                    samples.begin() + done + take);
    nn::Tensor x = dataio::make_batch(batch, false, nullptr);
    nn::Tensor logits = model.forward_logits(x, false);
    std::vector<int> labels;
    for (const auto* s : batch) labels.push_back(dataio::label_index(s->label));
    total += static_cast<double>(nn::cross_entropy(logits, labels, nullptr)) * take;
    done += take;
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train_loop(models::Classifier& model,
                       const std::vector<const dataio::StackedSample*>& train_set,
                       const std::vector<const dataio::StackedSample*>& val_set,
                       const TrainConfig& config, const std::string& rng_scope) {
  config.validate();
  if (train_set.empty() || val_set.empty())
    throw DataError("training needs non-empty train and validation sets");
  auto trainable = model.trainable_parameters();
  if (trainable.empty()) throw ModelError("no trainable parameters");

  const std::set<std::string> train_patients = patient_ids(train_set);
  for (const auto& pid : patient_ids(val_set))
    if (train_patients.count(pid))
      throw DataError("patient appears in both train and validation: " + pid);

  nn::Adam optimizer(trainable, config.learning_rate);
  EarlyStopper stopper(config.patience, config.min_delta);
  TrainResult result;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng order_rng = named_rng(config.seed, rng_scope + ".order", static_cast<std::uint64_t>(epoch));
    Rng aug_rng = named_rng(config.seed, rng_scope + ".augment", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.uniform_int(i)]);

    double train_loss_sum = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min<std::size_t>(config.batch_size, order.size() - done);
      std::vector<const dataio::StackedSample*> batch;
      batch.reserve(take);
      std::vector<int> labels;
      for (std::size_t i = 0; i < take; ++i) {
        const dataio::StackedSample* s = train_set[order[done + i]];
        if (!train_patients.count(s->patient_id))
          throw DataError("batch sample outside the train partition: " + s->patient_id);
        batch.push_back(s);
        labels.push_back(dataio::label_index(s->label));
      }
      nn::Tensor x = dataio::make_batch(batch, true, &aug_rng);
      nn::Tensor logits = model.forward_logits(x, true);
      nn::Tensor dlogits;
      const float loss = nn::cross_entropy(logits, labels, &dlogits);
      optimizer.zero_grad();
      model.backward(dlogits);
      optimizer.step();
      train_loss_sum += static_cast<double>(loss) * take;
      done += take;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_loss_sum / static_cast<double>(order.size());
    stats.val_loss = evaluate_loss(model, val_set, config.batch_size);
    result.history.push_back(stats);
    if (stopper.update(stats.val_loss, epoch, model) == StopDecision::Stop) break;
  }

  stopper.restore(model);
  result.best_epoch = stopper.state().best_epoch;
  result.best_val_loss = stopper.state().best_val_loss;
  return result;
}

std::vector<metrics::PredictionRecord> predict(
    models::Classifier& model, const std::vector<const dataio::StackedSample*>& samples,
    int batch_size) {
  std::vector<metrics::PredictionRecord> out;
  std::size_t done = 0;
  while (done < samples.size()) {
    const std::size_t take = std::min<std::size_t>(batch_size, samples.size() - done);
    std::vector<const dataio::StackedSample*> batch(samples.begin() + done,
                                                    samples.begin() + done + take);
    nn::Tensor probs = model.forward_probs(dataio::make_batch(batch, false, nullptr));
    for (std::size_t i = 0; i < take; ++i) {
      metrics::PredictionRecord r;
      r.image_id = batch[i]->image_id;
      r.patient_id = batch[i]->patient_id;
      r.true_label = dataio::label_index(batch[i]->label);
      r.p_benign = probs.at(static_cast<int>(i), 0);
      r.p_malignant = probs.at(static_cast<int>(i), 1);
      out.push_back(std::move(r));
    }
    done += take;
  }
  return out;
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "alexnet") return ModelKind::AlexNet;
  if (s == "resnet18") return ModelKind::ResNet18;
  if (s == "ensemble") return ModelKind::Ensemble;
  throw ConfigError("unknown model: " + s + " (expected alexnet|resnet18|ensemble)");
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::AlexNet: return "alexnet";
    case ModelKind::ResNet18: return "resnet18";
    case ModelKind::Ensemble: return "ensemble";
  }
  return "?";
}

namespace {

std::unique_ptr<backbones::Backbone> prepare_backbone(const std::string& arch,
                                                      const ModelSpec& spec,
                                                      const TrainConfig& config,
                                                      const backbones::WeightSource& weights,
                                                      const std::string& rng_scope) {
  auto backbone = backbones::load_backbone(arch, weights);
  if (dataio::modality_channels(config.modality) == 4)
    backbone->inflate_input(4, spec.inflate);
  backbone->apply_freeze(spec.policy_for(arch));
  Rng head_rng = named_rng(config.seed, rng_scope + ".head." + arch);
  backbone->reinit_head(head_rng);
  return backbone;
}

}  // namespace

StagedModel train_staged(const ModelSpec& spec,
                         const std::vector<const dataio::StackedSample*>& train_set,
                         const std::vector<const dataio::StackedSample*>& val_set,
                         const TrainConfig& config, const backbones::WeightSource& weights,
                         const std::string& rng_scope) {
  StagedModel out;
  if (spec.kind == ModelKind::AlexNet || spec.kind == ModelKind::ResNet18) {
    const std::string arch = spec.kind == ModelKind::AlexNet ? "alexnet" : "resnet18";
    auto model = std::make_unique<models::SingleBackboneModel>(
        prepare_backbone(arch, spec, config, weights, rng_scope));
    out.stages[arch] = train_loop(*model, train_set, val_set, config, rng_scope + "." + arch);
    out.model = std::move(model);
    return out;
  }

  // Ensemble recipe: fine-tune both backbones, strip, fuse, fine-tune head.
  auto alex = std::make_unique<models::SingleBackboneModel>(
      prepare_backbone("alexnet", spec, config, weights, rng_scope));
  out.stages["alexnet"] =
      train_loop(*alex, train_set, val_set, config, rng_scope + ".alexnet");
  auto res = std::make_unique<models::SingleBackboneModel>(
      prepare_backbone("resnet18", spec, config, weights, rng_scope));
  out.stages["resnet18"] =
      train_loop(*res, train_set, val_set, config, rng_scope + ".resnet18");

  auto ext_a = alex->release_backbone();
  auto ext_b = res->release_backbone();
  models::strip_classifier(*ext_a);
  models::strip_classifier(*ext_b);
  Rng head_rng = named_rng(config.seed, rng_scope + ".head.ensemble");
  auto fused = models::build_ensemble(std::move(ext_a), std::move(ext_b), head_rng);
  out.stages["ensemble_head"] =
      train_loop(*fused, train_set, val_set, config, rng_scope + ".ensemble");
  out.model = std::move(fused);
  return out;
}

namespace {

void write_history(const std::string& path,
                   const std::map<std::string, TrainResult>& stages) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write loss history: " + path);
  out << "stage,epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& [stage, result] : stages) {
    for (const auto& e : result.history) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g", stage.c_str(), e.epoch, e.train_loss,
                    e.val_loss);
      out << buf << '\n';
    }
  }
}

}  // namespace

CVRunResult cross_validate(const dataio::DatasetManifest& manifest,
                           const dataio::SplitPlan& plan, const ModelSpec& spec,
                           const TrainConfig& config, const backbones::WeightSource& weights,
                           const std::string& run_dir) {
  config.validate();
  validate_split(plan, manifest);
  if (plan.folds.size() != dataio::kFoldCount)
    throw DataError("cross-validation expects a 5-fold plan");

  // Stratification: every fold must carry both classes.
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    bool has_b = false, has_m = false;
    for (const auto& pid : plan.folds[k])
      (manifest.patient(pid).label == dataio::Label::Benign ? has_b : has_m) = true;
    if (!has_b || !has_m)
      throw DataError("fold " + std::to_string(k) + " carries a single class");
  }

  const std::vector<dataio::StackedSample> samples =
      dataio::build_samples(manifest, config.modality, config.crop);
  auto collect = [&](const std::set<std::string>& pats) {
    std::vector<const dataio::StackedSample*> out;
    for (const auto& s : samples)
      if (pats.count(s.patient_id)) out.push_back(&s);
    return out;
  };
  const auto test_set = collect(plan.test_patients);

  CVRunResult result;
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    std::set<std::string> train_pats;
    for (std::size_t j = 0; j < plan.folds.size(); ++j)
      if (j != k) train_pats.insert(plan.folds[j].begin(), plan.folds[j].end());
    const auto train_set = collect(train_pats);
    const auto val_set = collect(plan.folds[k]);

    const std::string scope = "fold" + std::to_string(k);
    StagedModel staged = train_staged(spec, train_set, val_set, config, weights, scope);

    FoldResult fold;
    fold.fold = static_cast<int>(k);
    fold.stages = std::move(staged.stages);
    fold.test_predictions = predict(*staged.model, test_set, config.batch_size);

    if (!run_dir.empty()) {
      const fs::path dir = fs::path(run_dir) / ("fold_" + std::to_string(k));
      fs::create_directories(dir);
      fold.checkpoint_path = (dir / "checkpoint.efc").string();
      models::save_model(*staged.model, fold.checkpoint_path);
      metrics::write_predictions((dir / "predictions.csv").string(), fold.test_predictions);
      write_history((dir / "loss_history.csv").string(), fold.stages);
    }

    result.evaluations.push_back(metrics::evaluate_fold(fold.test_predictions));
    result.folds.push_back(std::move(fold));
  }
  return result;
}

}  // namespace elastofuse::training
