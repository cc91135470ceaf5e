#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitppg/data_synth.hpp"
#include "vitppg/imagify.hpp"
#include "vitppg/model.hpp"
#include "vitppg/report.hpp"
#include "vitppg/tensorize.hpp"

namespace vitppg {

struct OptimizerConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  LossKind loss = LossKind::l1;
  OptimizerConfig optimizer;
  int batch_size = 16;
  int epochs = 30;
  std::uint64_t seed = 0;
  TrainableSet trainable = TrainableSet::lora_pool_head;
  ImagifyConfig imagify;
  TensorizeConfig tensorize;
  BackboneProfile profile = make_profile("dinov3_like", "tiny");
  LoraConfig lora;
  std::string target = "hr";
  std::array<double, 3> split{0.8, 0.1, 0.1};
  int workers = 1;  // preprocessing only; results do not depend on it

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const ImagifyConfig& cfg);
nlohmann::json to_json(const TensorizeConfig& cfg);
ImagifyConfig imagify_config_from_json(const nlohmann::json& j);
TensorizeConfig tensorize_config_from_json(const nlohmann::json& j);

// A trained model with the preprocessing it expects.
struct Checkpoint {
  Model model;
  ImagifyConfig imagify;
  TensorizeConfig tensorize;
  nlohmann::json config = nlohmann::json::object();  // train config, seed, split

  std::string fingerprint() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Decoupled weight decay Adam over the arrays selected by `trainable`.
class AdamW {
 public:
  AdamW(const Model& shape, const OptimizerConfig& cfg);
  void step(Model& params, const Model& grads, const std::function<bool(std::string_view)>& trainable);
  long steps() const { return step_; }

 private:
  OptimizerConfig cfg_;
  Model m_;
  Model v_;
  long step_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double wall_ms = 0.0;
};

std::string epoch_log_line(const EpochLog& e);

struct FitResult {
  Checkpoint checkpoint;  // best validation MAE (the initialization when epochs == 0)
  std::vector<EpochLog> log;
  SplitIndices split;
  int best_epoch = 0;
};

// Image -> patches for every record, fanned out over `workers` threads with
// results stored by index.
std::vector<PatchSet> prepare_dataset(const std::vector<PpgRecord>& records, const ImagifyConfig& imagify,
                                      const BackboneProfile& profile, const TensorizeConfig& tensorize,
                                      int workers = 1);

// `on_epoch`, when set, sees each log entry as soon as the epoch finishes.
FitResult fit(const std::vector<PpgRecord>& dataset, const TrainConfig& cfg,
              const std::function<void(const EpochLog&)>& on_epoch = {});

struct Evaluation {
  EvalReport report;
  std::vector<std::string> ids;
  std::vector<double> predictions;
  std::vector<double> labels;
};

Evaluation evaluate(const std::vector<PpgRecord>& dataset, const Checkpoint& ckpt, const std::string& target,
                    int workers = 1);

}  // namespace vitppg
