#include "elastofuse/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "elastofuse/checkpoint.hpp"
#include "elastofuse/errors.hpp"
#include "elastofuse/gradcam.hpp"
#include "elastofuse/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace elastofuse::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + key + "' in " + where);
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["data"] = {{"manifest", manifest_path},
               {"split", split_path},
               {"test_fraction", test_fraction}};
  j["model"] = {{"kind", training::model_kind_name(model.kind)},
                {"inflate", backbones::inflate_policy_name(model.inflate)},
                {"freeze_alexnet", model.freeze_alexnet.to_string()},
                {"freeze_resnet18", model.freeze_resnet.to_string()}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"batch_size", train.batch_size},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"min_delta", train.min_delta},
                {"seed", train.seed},
                {"modality", dataio::modality_code(train.modality)},
                {"crop", train.crop}};
  j["eval"] = {{"formats", report_formats}};
  j["io"] = {{"run_dir", run_dir}, {"weights_dir", weights_dir}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  reject_unknown_keys(j, {"data", "model", "train", "eval", "io"}, "config root");
  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown_keys(d, {"manifest", "split", "test_fraction"}, "data");
    c.manifest_path = d.value("manifest", "");
    c.split_path = d.value("split", "");
    c.test_fraction = d.value("test_fraction", 0.25);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown_keys(m, {"kind", "inflate", "freeze_alexnet", "freeze_resnet18"}, "model");
    c.model.kind = training::model_kind_from_string(m.value("kind", "ensemble"));
    c.model.inflate = backbones::inflate_policy_from_string(m.value("inflate", "zero"));
    c.model.freeze_alexnet =
        backbones::FreezePolicy::parse(m.value("freeze_alexnet", "alexnet_last3"));
    c.model.freeze_resnet =
        backbones::FreezePolicy::parse(m.value("freeze_resnet18", "resnet_freeze_first4"));
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown_keys(t,
                        {"learning_rate", "batch_size", "max_epochs", "patience", "min_delta",
                         "seed", "modality", "crop"},
                        "train");
    c.train.learning_rate = t.value("learning_rate", 1e-4);
    c.train.batch_size = t.value("batch_size", 16);
    c.train.max_epochs = t.value("max_epochs", 0);
    c.train.patience = t.value("patience", 200);
    c.train.min_delta = t.value("min_delta", 0.0);
    c.train.seed = t.value("seed", 0ULL);
    c.train.modality = dataio::modality_from_code(t.value("modality", "bse"));
    c.train.crop = t.value("crop", false);
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    reject_unknown_keys(e, {"formats"}, "eval");
    if (e.contains("formats")) c.report_formats = e["formats"].get<std::vector<std::string>>();
  }
  if (j.contains("io")) {
    const json& io = j["io"];
    reject_unknown_keys(io, {"run_dir", "weights_dir"}, "io");
    c.run_dir = io.value("run_dir", "");
    c.weights_dir = io.value("weights_dir", "");
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

backbones::WeightSource weight_source(const RunConfig& cfg) {
  // precedence: flags/config file value, then environment, then default
  if (!cfg.weights_dir.empty()) return backbones::WeightSource{cfg.weights_dir};
  return backbones::WeightSource::default_cache();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

struct RunEntry {
  metrics::RunKey key;
  std::string dir;  // relative to run root
};

json run_manifest_json(const RunConfig& cfg, const std::vector<RunEntry>& runs) {
  json j;
  j["version"] = kVersion;
  j["sd_convention"] = "sample (n-1)";
  j["ttest"] = "welch";
  j["seed"] = cfg.train.seed;
  j["config"] = cfg.to_json();
  j["runs"] = json::array();
  for (const auto& r : runs)
    j["runs"].push_back({{"model", r.key.model},
                         {"modality", r.key.modality},
                         {"crop", r.key.crop},
                         {"dir", r.dir}});
  return j;
}

json read_run_manifest(const std::string& run_dir) {
  std::ifstream in(fs::path(run_dir) / "run_manifest.json");
  if (!in) throw DataError("not a run directory (missing run_manifest.json): " + run_dir);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run_manifest.json: ") + e.what());
  }
  return j;
}

metrics::RunEvaluation read_run_evaluation(const std::string& fold_root,
                                           const metrics::RunKey& key) {
  metrics::RunEvaluation run;
  run.key = key;
  for (std::size_t k = 0;; ++k) {
    const fs::path p = fs::path(fold_root) / ("fold_" + std::to_string(k)) / "predictions.csv";
    if (!fs::exists(p)) break;
    run.folds.push_back(metrics::evaluate_fold(metrics::read_predictions(p.string())));
  }
  if (run.folds.empty())
    throw DataError("no fold predictions under " + fold_root);
  return run;
}

std::vector<metrics::RunEvaluation> read_all_runs(const std::string& run_dir, const json& man) {
  std::vector<metrics::RunEvaluation> out;
  for (const auto& r : man.at("runs")) {
    metrics::RunKey key{r.at("model").get<std::string>(), r.at("modality").get<std::string>(),
                        r.at("crop").get<bool>()};
    const std::string rel = r.at("dir").get<std::string>();
    const fs::path root = rel == "." ? fs::path(run_dir) : fs::path(run_dir) / rel;
    out.push_back(read_run_evaluation(root.string(), key));
  }
  return out;
}

dataio::SplitPlan obtain_split(const RunConfig& cfg, const dataio::DatasetManifest& manifest) {
  if (!cfg.split_path.empty()) {
    dataio::SplitPlan plan = dataio::load_split(cfg.split_path);
    dataio::validate_split(plan, manifest);
    return plan;
  }
  return dataio::split_patients(manifest, cfg.test_fraction, cfg.train.seed);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_synth(const dataio::SynthConfig& synth_cfg, const std::string& out_dir) {
  dataio::DatasetManifest manifest = dataio::generate_synthetic(synth_cfg, out_dir);
  std::cout << "wrote " << manifest.image_count() << " image pairs for "
            << manifest.patient_count() << " patients under " << out_dir << "\n";
  return kExitOk;
}

int cmd_split(const std::string& manifest_path, double test_fraction, std::size_t folds,
              std::uint64_t seed, const std::string& out_path) {
  if (folds != dataio::kFoldCount)
    throw ConfigError("this pipeline uses exactly 5 folds");
  dataio::DatasetManifest manifest = dataio::parse_manifest(manifest_path);
  dataio::SplitPlan plan = dataio::split_patients(manifest, test_fraction, seed);
  dataio::save_split(out_path, plan);
  std::cout << "split " << manifest.patient_count() << " patients: "
            << plan.test_patients.size() << " test, 5 folds over the rest -> " << out_path
            << "\n";
  return kExitOk;
}

int run_one_cell(const RunConfig& cfg, const dataio::DatasetManifest& manifest,
                 const dataio::SplitPlan& plan, const training::ModelSpec& spec,
                 const std::string& cell_dir, metrics::RunEvaluation* out_eval) {
  fs::create_directories(cell_dir);
  training::CVRunResult result = training::cross_validate(manifest, plan, spec, cfg.train,
                                                          weight_source(cfg), cell_dir);
  if (out_eval) {
    out_eval->key = metrics::RunKey{training::model_kind_name(spec.kind),
                                    dataio::modality_code(cfg.train.modality), cfg.train.crop};
    out_eval->folds = result.evaluations;
  }
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.run_dir.empty()) throw ConfigError("train needs io.run_dir (or --run-dir)");
  if (cfg.manifest_path.empty()) throw ConfigError("train needs data.manifest (or --manifest)");
  cfg.train.validate();

  dataio::DatasetManifest manifest = dataio::parse_manifest(cfg.manifest_path);
  dataio::SplitPlan plan = obtain_split(cfg, manifest);

  fs::create_directories(cfg.run_dir);
  dataio::save_split((fs::path(cfg.run_dir) / "split_plan.json").string(), plan);
  write_text((fs::path(cfg.run_dir) / "config.json").string(), cfg.to_json().dump(2) + "\n");
  const metrics::RunKey key{training::model_kind_name(cfg.model.kind),
                            dataio::modality_code(cfg.train.modality), cfg.train.crop};
  write_text((fs::path(cfg.run_dir) / "run_manifest.json").string(),
             run_manifest_json(cfg, {{key, "."}}).dump(2) + "\n");

  metrics::RunEvaluation eval;
  run_one_cell(cfg, manifest, plan, cfg.model, cfg.run_dir, &eval);
  metrics::render_report({eval}, (fs::path(cfg.run_dir) / "report").string());

  std::cout << "run complete: " << cfg.run_dir << "\n";
  for (bool patient_wise : {false, true}) {
    std::vector<std::optional<double>> acc;
    for (const auto& f : eval.folds)
      acc.push_back(patient_wise ? f.patient_metrics.accuracy : f.image_metrics.accuracy);
    std::cout << "  " << (patient_wise ? "patient" : "image") << "-wise accuracy: "
              << metrics::format_cell(metrics::aggregate_optional(acc)) << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& run_dir, bool patient_only) {
  const json man = read_run_manifest(run_dir);
  const auto runs = read_all_runs(run_dir, man);
  for (const auto& run : runs) {
    std::cout << run.key.display() << " (" << run.folds.size() << " folds)\n";
    auto print_row = [&](const char* name, bool patient_wise) {
      std::vector<std::optional<double>> acc, sens, spec;
      std::vector<double> rr;
      for (const auto& f : run.folds) {
        const metrics::Metrics& m = patient_wise ? f.patient_metrics : f.image_metrics;
        acc.push_back(m.accuracy);
        sens.push_back(m.sensitivity);
        spec.push_back(m.specificity);
        rr.push_back(f.recognition_rate);
      }
      std::cout << "  " << name
                << " accuracy " << metrics::format_cell(metrics::aggregate_optional(acc))
                << ", sensitivity " << metrics::format_cell(metrics::aggregate_optional(sens))
                << ", specificity " << metrics::format_cell(metrics::aggregate_optional(spec));
      if (patient_wise && rr.size() >= 2) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", metrics::aggregate_cv(rr).mean * 100.0);
        std::cout << ", recognition rate " << buf;
      }
      std::cout << "\n";
    };
    if (!patient_only) print_row("image-wise  ", false);
    print_row("patient-wise", true);
  }
  return kExitOk;
}

int cmd_report(const std::string& run_dir, const std::vector<std::string>& formats) {
  const json man = read_run_manifest(run_dir);
  const auto runs = read_all_runs(run_dir, man);
  const std::string report_dir = (fs::path(run_dir) / "report").string();
  metrics::render_report(runs, report_dir);
  // formats filter: drop what was not requested
  const bool want_csv =
      std::find(formats.begin(), formats.end(), "csv") != formats.end();
  const bool want_json =
      std::find(formats.begin(), formats.end(), "json") != formats.end();
  if (!want_csv && !want_json) throw ConfigError("report formats must include csv and/or json");
  if (!want_csv)
    for (const auto& f : {"metrics.csv", "recognition_rate.csv", "per_patient.csv", "pvalues.csv"})
      fs::remove(fs::path(report_dir) / f);
  if (!want_json) fs::remove(fs::path(report_dir) / "metrics.json");
  std::cout << "report written to " << report_dir << "\n";
  return kExitOk;
}

int cmd_gradcam(const std::string& run_dir, const std::string& image_id, int fold,
                const std::string& target, const std::string& colormap, double blend,
                std::string out_dir, bool raw) {
  const json man = read_run_manifest(run_dir);
  const RunConfig cfg = RunConfig::from_json(man.at("config"));
  if (man.at("runs").size() != 1)
    throw ConfigError("gradcam expects a single-model run directory");
  dataio::DatasetManifest manifest = dataio::parse_manifest(cfg.manifest_path);

  const dataio::ImageRecord* record = nullptr;
  for (const auto& rec : manifest.images())
    if (rec.image_id == image_id) record = &rec;
  if (!record) throw DataError("image_id not found in manifest: " + image_id);

  dataio::ImagePair pair =
      dataio::load_pair(*record, manifest.patient(record->patient_id).label);
  if (cfg.train.crop && record->roi) pair = dataio::crop_lesion(pair, *record->roi);
  pair = dataio::resize_pair(pair);
  dataio::StackedSample sample = dataio::stack_modalities(pair, cfg.train.modality);

  const fs::path ckpt = fs::path(run_dir) / ("fold_" + std::to_string(fold)) / "checkpoint.efc";
  auto model = models::load_model(ckpt.string());

  int target_class;
  if (target == "benign") {
    target_class = 0;
  } else if (target == "malignant") {
    target_class = 1;
  } else if (target == "predicted") {
    nn::Tensor probs = model->forward_probs(dataio::make_batch({&sample}, false, nullptr));
    target_class = probs.at(0, 0) > probs.at(0, 1) ? 0 : 1;
  } else {
    throw ConfigError("--target must be predicted|benign|malignant");
  }

  gradcam::Heatmap hm;
  if (auto* ens = dynamic_cast<models::EnsembleModel*>(model.get())) {
    hm = gradcam::gradcam_ensemble(*ens, sample, target_class);
  } else {
    auto* single = dynamic_cast<models::SingleBackboneModel*>(model.get());
    hm = gradcam::gradcam_single(single->backbone(), sample, target_class);
  }

  if (out_dir.empty()) out_dir = (fs::path(run_dir) / "gradcam").string();
  fs::create_directories(out_dir);
  const std::string stem = image_id + "_" + dataio::modality_code(cfg.train.modality) + "_" +
                           (target_class == 0 ? "benign" : "malignant");

  // background: the sample's own display channels (gray for b, color otherwise)
  dataio::Image bg;
  if (cfg.train.modality == dataio::Modality::B) {
    bg = dataio::Image(1, dataio::kInputSide, dataio::kInputSide);
    std::copy_n(sample.tensor.data(), bg.data.size(), bg.data.data());
  } else {
    const int off = cfg.train.modality == dataio::Modality::BSE ? 1 : 0;
    bg = dataio::Image(3, dataio::kInputSide, dataio::kInputSide);
    const std::size_t plane = static_cast<std::size_t>(dataio::kInputSide) * dataio::kInputSide;
    for (int c = 0; c < 3; ++c)
      std::copy_n(sample.tensor.data() + (c + off) * plane, plane, bg.plane(c));
  }
  const std::string png_path = (fs::path(out_dir) / (stem + ".png")).string();
  gradcam::overlay(hm, bg, colormap, png_path, blend);
  if (raw) {
    std::ofstream out(fs::path(out_dir) / (stem + ".grid"));
    out << hm.grid.size(0) << ' ' << hm.grid.size(1) << '\n';
    char buf[32];
    for (int y = 0; y < hm.grid.size(0); ++y) {
      for (int x = 0; x < hm.grid.size(1); ++x) {
        std::snprintf(buf, sizeof(buf), "%.7g", hm.grid.at(y, x));
        out << buf << (x + 1 < hm.grid.size(1) ? ' ' : '\n');
      }
    }
  }
  std::cout << "wrote " << png_path << "\n";
  return kExitOk;
}

metrics::RunEvaluation voting_evaluation(const std::string& alex_dir,
                                         const std::string& res_dir,
                                         const metrics::RunKey& key) {
  metrics::RunEvaluation run;
  run.key = key;
  for (std::size_t k = 0;; ++k) {
    const fs::path pa = fs::path(alex_dir) / ("fold_" + std::to_string(k)) / "predictions.csv";
    const fs::path pb = fs::path(res_dir) / ("fold_" + std::to_string(k)) / "predictions.csv";
    if (!fs::exists(pa) || !fs::exists(pb)) break;
    auto recs_a = metrics::read_predictions(pa.string());
    auto recs_b = metrics::read_predictions(pb.string());
    std::map<std::string, metrics::PredictionRecord> by_id;
    for (const auto& r : recs_b) by_id[r.image_id] = r;
    nn::Tensor probs_a({static_cast<int>(recs_a.size()), 2});
    nn::Tensor probs_b({static_cast<int>(recs_a.size()), 2});
    for (std::size_t i = 0; i < recs_a.size(); ++i) {
      auto it = by_id.find(recs_a[i].image_id);
      if (it == by_id.end())
        throw DataError("voting inputs disagree on image " + recs_a[i].image_id);
      probs_a.at(static_cast<int>(i), 0) = static_cast<float>(recs_a[i].p_benign);
      probs_a.at(static_cast<int>(i), 1) = static_cast<float>(recs_a[i].p_malignant);
      probs_b.at(static_cast<int>(i), 0) = static_cast<float>(it->second.p_benign);
      probs_b.at(static_cast<int>(i), 1) = static_cast<float>(it->second.p_malignant);
    }
    auto [mean, pred] = models::soft_vote(probs_a, probs_b);
    std::vector<metrics::PredictionRecord> voted = recs_a;
    for (std::size_t i = 0; i < voted.size(); ++i) {
      voted[i].p_benign = mean.at(static_cast<int>(i), 0);
      voted[i].p_malignant = mean.at(static_cast<int>(i), 1);
    }
    run.folds.push_back(metrics::evaluate_fold(voted));
  }
  if (run.folds.empty()) throw DataError("no fold predictions for the voting baseline");
  return run;
}

int cmd_compare(RunConfig cfg, const std::vector<std::string>& model_names,
                const std::vector<std::string>& modality_names, bool include_voting) {
  if (cfg.run_dir.empty()) throw ConfigError("compare needs io.run_dir (or --run-dir)");
  if (cfg.manifest_path.empty()) throw ConfigError("compare needs data.manifest");
  if (model_names.empty()) throw ConfigError("compare needs at least one model");
  if (modality_names.empty()) throw ConfigError("compare needs at least one modality");
  cfg.train.validate();
  if (include_voting) {
    const bool have_both =
        std::find(model_names.begin(), model_names.end(), "alexnet") != model_names.end() &&
        std::find(model_names.begin(), model_names.end(), "resnet18") != model_names.end();
    if (!have_both)
      throw ConfigError("--voting needs both alexnet and resnet18 in --models");
  }

  dataio::DatasetManifest manifest = dataio::parse_manifest(cfg.manifest_path);
  dataio::SplitPlan plan = obtain_split(cfg, manifest);
  fs::create_directories(cfg.run_dir);
  dataio::save_split((fs::path(cfg.run_dir) / "split_plan.json").string(), plan);
  write_text((fs::path(cfg.run_dir) / "config.json").string(), cfg.to_json().dump(2) + "\n");

  std::vector<RunEntry> entries;
  std::vector<metrics::RunEvaluation> evals;
  for (const auto& modality : modality_names) {
    RunConfig cell_cfg = cfg;
    cell_cfg.train.modality = dataio::modality_from_code(modality);
    for (const auto& model_name : model_names) {
      training::ModelSpec spec = cfg.model;
      spec.kind = training::model_kind_from_string(model_name);
      const std::string cell = model_name + "_" + modality + (cfg.train.crop ? "_crop" : "_full");
      const std::string cell_dir = (fs::path(cfg.run_dir) / cell).string();
      metrics::RunEvaluation eval;
      run_one_cell(cell_cfg, manifest, plan, spec, cell_dir, &eval);
      entries.push_back({eval.key, cell});
      evals.push_back(std::move(eval));
    }
    if (include_voting) {
      const std::string alex_dir =
          (fs::path(cfg.run_dir) / ("alexnet_" + modality + (cfg.train.crop ? "_crop" : "_full")))
              .string();
      const std::string res_dir =
          (fs::path(cfg.run_dir) / ("resnet18_" + modality + (cfg.train.crop ? "_crop" : "_full")))
              .string();
      evals.push_back(voting_evaluation(
          alex_dir, res_dir, metrics::RunKey{"ensemble_voting", modality, cfg.train.crop}));
    }
  }
  write_text((fs::path(cfg.run_dir) / "run_manifest.json").string(),
             run_manifest_json(cfg, entries).dump(2) + "\n");
  metrics::render_report(evals, (fs::path(cfg.run_dir) / "report").string());
  std::cout << "comparison written to " << cfg.run_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"dual-modality ensemble transfer-learning pipeline for breast ultrasound"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic phantom dataset");
  dataio::SynthConfig synth_cfg;
  std::string synth_out = "synth_data";
  std::string synth_signal = "both";
  synth->add_option("--patients", synth_cfg.n_patients, "number of patients");
  synth->add_option("--images-min", synth_cfg.images_min, "min images per patient");
  synth->add_option("--images-max", synth_cfg.images_max, "max images per patient");
  synth->add_option("--balance", synth_cfg.class_balance, "benign fraction");
  synth->add_option("--size", synth_cfg.image_size, "phantom side length in pixels");
  synth->add_option("--seed", synth_cfg.seed, "generation seed");
  synth->add_option("--signal", synth_signal, "signal-bearing modality: gray|color|both");
  synth->add_option("--out", synth_out, "output directory");

  // split
  auto* split = app.add_subcommand("split", "patient-exclusive train/test + 5-fold split");
  std::string split_manifest, split_out = "split_plan.json";
  double split_fraction = 0.25;
  std::size_t split_folds = 5;
  std::uint64_t split_seed = 0;
  split->add_option("--manifest", split_manifest, "dataset manifest")->required();
  split->add_option("--test-fraction", split_fraction, "held-out patient fraction");
  split->add_option("--folds", split_folds, "fold count (fixed at 5)");
  split->add_option("--seed", split_seed, "shuffle seed");
  split->add_option("--out", split_out, "output plan path");

  // shared train/compare flags
  auto add_common = [](CLI::App* cmd, std::string& config_path, RunConfig& flags,
                       std::vector<bool>& present) {
    present.assign(10, false);
    cmd->add_option("--config", config_path, "declarative run config (json)");
    cmd->add_option("--manifest", flags.manifest_path, "dataset manifest")
        ->each([&present](const std::string&) { present[0] = true; });
    cmd->add_option("--split", flags.split_path, "precomputed split plan")
        ->each([&present](const std::string&) { present[1] = true; });
    cmd->add_option("--run-dir", flags.run_dir, "output run directory")
        ->each([&present](const std::string&) { present[2] = true; });
    cmd->add_option("--seed", flags.train.seed, "master seed")
        ->each([&present](const std::string&) { present[3] = true; });
    cmd->add_option("--epochs", flags.train.max_epochs, "max training epochs")
        ->each([&present](const std::string&) { present[4] = true; });
    cmd->add_option("--lr", flags.train.learning_rate, "learning rate")
        ->each([&present](const std::string&) { present[5] = true; });
    cmd->add_option("--batch-size", flags.train.batch_size, "mini-batch size")
        ->each([&present](const std::string&) { present[6] = true; });
    cmd->add_option("--test-fraction", flags.test_fraction, "held-out patient fraction")
        ->each([&present](const std::string&) { present[7] = true; });
    cmd->add_option("--weights-dir", flags.weights_dir, "pretrained weight cache")
        ->each([&present](const std::string&) { present[8] = true; });
    cmd->add_option("--patience", flags.train.patience, "early-stop patience")
        ->each([&present](const std::string&) { present[9] = true; });
  };
  auto merge_common = [](const RunConfig& flags, const std::vector<bool>& present,
                         RunConfig& cfg) {
    if (present[0]) cfg.manifest_path = flags.manifest_path;
    if (present[1]) cfg.split_path = flags.split_path;
    if (present[2]) cfg.run_dir = flags.run_dir;
    if (present[3]) cfg.train.seed = flags.train.seed;
    if (present[4]) cfg.train.max_epochs = flags.train.max_epochs;
    if (present[5]) cfg.train.learning_rate = flags.train.learning_rate;
    if (present[6]) cfg.train.batch_size = flags.train.batch_size;
    if (present[7]) cfg.test_fraction = flags.test_fraction;
    if (present[8]) cfg.weights_dir = flags.weights_dir;
    if (present[9]) cfg.train.patience = flags.train.patience;
    cfg.train = cfg.train.normalized();
  };

  // train
  auto* train = app.add_subcommand("train", "5-fold cross-validated fine-tuning");
  std::string train_config_path;
  RunConfig train_flags;
  std::vector<bool> train_present;
  std::string train_model, train_modality;
  bool train_crop = false, train_no_crop = false;
  add_common(train, train_config_path, train_flags, train_present);
  train->add_option("--model", train_model, "alexnet|resnet18|ensemble");
  train->add_option("--modality", train_modality, "b|se|bse");
  train->add_flag("--crop", train_crop, "train on lesion crops");
  train->add_flag("--no-crop", train_no_crop, "train on full images");

  // eval
  auto* eval = app.add_subcommand("eval", "metrics from stored predictions");
  std::string eval_run;
  bool eval_patient = false;
  eval->add_option("--run", eval_run, "run directory")->required();
  eval->add_flag("--patient-wise", eval_patient, "patient-wise only");

  // gradcam
  auto* cam = app.add_subcommand("gradcam", "write a class-activation overlay");
  std::string cam_run, cam_image, cam_target = "predicted", cam_colormap = "jet", cam_out;
  int cam_fold = 0;
  double cam_blend = 0.4;
  bool cam_raw = false;
  cam->add_option("--run", cam_run, "run directory")->required();
  cam->add_option("--image", cam_image, "image_id from the manifest")->required();
  cam->add_option("--fold", cam_fold, "fold checkpoint to use");
  cam->add_option("--target", cam_target, "predicted|benign|malignant");
  cam->add_option("--colormap", cam_colormap, "jet|hot");
  cam->add_option("--blend", cam_blend, "overlay blend factor");
  cam->add_option("--out", cam_out, "output directory");
  cam->add_flag("--raw", cam_raw, "also write the raw heatmap grid");

  // report
  auto* report = app.add_subcommand("report", "render report tables from a run");
  std::string report_run, report_format = "csv,json";
  report->add_option("--run", report_run, "run directory")->required();
  report->add_option("--format", report_format, "comma list of csv,json");

  // compare
  auto* compare = app.add_subcommand("compare", "grid of models x modalities");
  std::string cmp_config_path, cmp_models = "alexnet,resnet18,ensemble", cmp_modalities = "bse";
  RunConfig cmp_flags;
  std::vector<bool> cmp_present;
  bool cmp_crop = false, cmp_voting = false;
  add_common(compare, cmp_config_path, cmp_flags, cmp_present);
  compare->add_option("--models", cmp_models, "comma list of models");
  compare->add_option("--modalities", cmp_modalities, "comma list of modalities");
  compare->add_flag("--crop", cmp_crop, "use lesion crops");
  compare->add_flag("--voting", cmp_voting, "add the soft-voting baseline row");

  std::vector<const char*> argv;
  argv.push_back("elastofuse");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto split_list = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
    return out;
  };

  try {
    if (synth->parsed()) {
      synth_cfg.signal = dataio::signal_from_code(synth_signal);
      return cmd_synth(synth_cfg, synth_out);
    }
    if (split->parsed())
      return cmd_split(split_manifest, split_fraction, split_folds, split_seed, split_out);
    if (train->parsed()) {
      RunConfig cfg = train_config_path.empty() ? RunConfig() : RunConfig::load(train_config_path);
      merge_common(train_flags, train_present, cfg);
      if (!train_model.empty()) cfg.model.kind = training::model_kind_from_string(train_model);
      if (!train_modality.empty())
        cfg.train.modality = dataio::modality_from_code(train_modality);
      if (train_crop) cfg.train.crop = true;
      if (train_no_crop) cfg.train.crop = false;
      return cmd_train(cfg);
    }
    if (eval->parsed()) return cmd_eval(eval_run, eval_patient);
    if (cam->parsed())
      return cmd_gradcam(cam_run, cam_image, cam_fold, cam_target, cam_colormap, cam_blend,
                         cam_out, cam_raw);
    if (report->parsed()) return cmd_report(report_run, split_list(report_format));
    if (compare->parsed()) {
      RunConfig cfg = cmp_config_path.empty() ? RunConfig() : RunConfig::load(cmp_config_path);
      merge_common(cmp_flags, cmp_present, cfg);
      if (cmp_crop) cfg.train.crop = true;
      return cmd_compare(cfg, split_list(cmp_models), split_list(cmp_modalities), cmp_voting);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace elastofuse::cli
