#include <nlohmann/json.hpp>

#include "elastofuse/checkpoint.hpp"
#include "elastofuse/ensemble.hpp"
#include "elastofuse/errors.hpp"

using nlohmann::json;

namespace elastofuse::models {

void save_model(Classifier& model, const std::string& path) {
  json meta;
  meta["class_convention"] = "0=benign,1=malignant";
  meta["input_channels"] = model.input_channels();
  if (auto* single = dynamic_cast<SingleBackboneModel*>(&model)) {
    meta["kind"] = "single";
    meta["architecture"] = single->backbone().arch();
    meta["freeze_policy"] = single->backbone().freeze_policy().to_string();
  } else if (auto* ens = dynamic_cast<EnsembleModel*>(&model)) {
    meta["kind"] = "ensemble";
    meta["architecture_a"] = ens->extractor_a().arch();
    meta["architecture_b"] = ens->extractor_b().arch();
    meta["concat_order"] = "a,b";
    meta["concat_width"] = ens->concat_width();
  } else {
    throw ModelError("cannot serialize this classifier kind");
  }
  save_checkpoint(path, meta, model.state());
}

std::unique_ptr<Classifier> load_model(const std::string& path) {
  const json meta = read_checkpoint_meta(path);
  const std::string kind = meta.value("kind", "");
  const int channels = meta.value("input_channels", 3);

  if (kind == "single") {
    auto backbone = backbones::make_backbone(meta.at("architecture").get<std::string>());
    backbone->inflate_input(channels, backbones::InflatePolicy::ZeroInit);
    backbone->apply_freeze(
        backbones::FreezePolicy::parse(meta.value("freeze_policy", "all_frozen")));
    auto model = std::make_unique<SingleBackboneModel>(std::move(backbone));
    load_checkpoint(path, model->state());
    return model;
  }
  if (kind == "ensemble") {
    auto a = backbones::make_backbone(meta.at("architecture_a").get<std::string>());
    auto b = backbones::make_backbone(meta.at("architecture_b").get<std::string>());
    a->inflate_input(channels, backbones::InflatePolicy::ZeroInit);
    b->inflate_input(channels, backbones::InflatePolicy::ZeroInit);
    a->strip_head();
    b->strip_head();
    Rng rng(0);
    auto model = build_ensemble(std::move(a), std::move(b), rng);
    load_checkpoint(path, model->state());
    return model;
  }
  throw CheckpointError("archive does not describe a known model kind: " + path);
}

}  // namespace elastofuse::models
