#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <tuple>

#include "vitppg/archive.hpp"
#include "vitppg/pool_head.hpp"
#include "vitppg/tensorize.hpp"
#include "vitppg/vit.hpp"

namespace vitppg {

enum class TrainableSet { lora_pool_head, head_only, full };
enum class LossKind { l1, mse };

std::string_view to_string(TrainableSet set);
std::string_view to_string(LossKind kind);
TrainableSet parse_trainable_set(std::string_view name);
LossKind parse_loss_kind(std::string_view name);

// Fixed affine map from head output to target units: y = offset + scale * head(p).
struct LabelScaling {
  double offset = 0.0;
  double scale = 1.0;
};

// Backbone + adapters + pooling + one regression head for one target.
struct Model {
  BackboneProfile profile;
  LoraConfig lora;
  std::string target = "hr";
  EncoderParams encoder;
  AdapterSet adapters;
  PoolParams pool;
  HeadParams head;
  LabelScaling label;
};

Model init_model(const BackboneProfile& profile, const LoraConfig& lora, bool with_adapters, const std::string& target,
                 std::uint64_t seed);

// Calls fn(name, arrays...) for every parameter array, zipping identically
// shaped models. Names are stable and double as checkpoint keys.
template <class Fn, class... M>
void for_each_parameter(Fn&& fn, M&... models) {
  const auto& ref = std::get<0>(std::tie(models...));
  fn("encoder/patch_embed/weight", models.encoder.patch_weight...);
  fn("encoder/patch_embed/bias", models.encoder.patch_bias...);
  fn("encoder/cls", models.encoder.cls...);
  fn("encoder/registers", models.encoder.registers...);
  fn("encoder/pos/special", models.encoder.pos_special...);
  fn("encoder/pos/row", models.encoder.pos_row...);
  fn("encoder/pos/col", models.encoder.pos_col...);
  for (std::size_t l = 0; l < ref.encoder.layers.size(); ++l) {
    const std::string p = "encoder/blocks/" + std::to_string(l) + "/";
    fn(p + "ln1/gamma", models.encoder.layers[l].ln1_gamma...);
    fn(p + "ln1/beta", models.encoder.layers[l].ln1_beta...);
    fn(p + "attn/q/weight", models.encoder.layers[l].q_weight...);
    fn(p + "attn/q/bias", models.encoder.layers[l].q_bias...);
    fn(p + "attn/k/weight", models.encoder.layers[l].k_weight...);
    fn(p + "attn/k/bias", models.encoder.layers[l].k_bias...);
    fn(p + "attn/v/weight", models.encoder.layers[l].v_weight...);
    fn(p + "attn/v/bias", models.encoder.layers[l].v_bias...);
    fn(p + "attn/o/weight", models.encoder.layers[l].o_weight...);
    fn(p + "attn/o/bias", models.encoder.layers[l].o_bias...);
    fn(p + "ln2/gamma", models.encoder.layers[l].ln2_gamma...);
    fn(p + "ln2/beta", models.encoder.layers[l].ln2_beta...);
    fn(p + "mlp/fc1/weight", models.encoder.layers[l].fc1_weight...);
    fn(p + "mlp/fc1/bias", models.encoder.layers[l].fc1_bias...);
    fn(p + "mlp/fc2/weight", models.encoder.layers[l].fc2_weight...);
    fn(p + "mlp/fc2/bias", models.encoder.layers[l].fc2_bias...);
  }
  fn("encoder/norm/gamma", models.encoder.norm_gamma...);
  fn("encoder/norm/beta", models.encoder.norm_beta...);
  static constexpr const char* kSlots[3] = {"q", "k", "v"};
  for (std::size_t l = 0; l < ref.adapters.layers.size(); ++l) {
    for (std::size_t s = 0; s < 3; ++s) {
      if (!ref.adapters.layers[l][s]) continue;
      const std::string p = "lora/" + std::to_string(l) + "/" + kSlots[s] + "/";
      fn(p + "down", models.adapters.layers[l][s]->down...);
      fn(p + "up", models.adapters.layers[l][s]->up...);
    }
  }
  fn("pool/score", models.pool.score...);
  const std::string h = "head/" + ref.target + "/";
  fn(h + "ln/gamma", models.head.ln_gamma...);
  fn(h + "ln/beta", models.head.ln_beta...);
  fn(h + "fc1/weight", models.head.fc1_weight...);
  fn(h + "fc1/bias", models.head.fc1_bias...);
  fn(h + "out/weight", models.head.out_weight...);
  fn(h + "out/bias", models.head.out_bias...);
}

// Same structure, every array zero.
Model zeros_like(const Model& model);

bool is_trainable(std::string_view name, TrainableSet set);

// Prediction in target units.
double predict(const Model& model, const PatchSet& ps, const ForwardOptions& opts = {});

struct LossResult {
  double loss = 0.0;
  double prediction = 0.0;
};

double loss_value(LossKind kind, double prediction, double label);

// Forward + backward for one sample; gradients accumulate into `grads`.
LossResult loss_and_gradient(const Model& model, const PatchSet& ps, double label, LossKind kind,
                             const ForwardOptions& opts, Model& grads);

struct ParameterCounts {
  std::int64_t total = 0;
  std::int64_t trainable = 0;
  std::int64_t lora_per_layer = 0;
};

// Counts from the allocated model.
ParameterCounts count_parameters(const Model& model, TrainableSet set);
// Same counts from shapes alone (no allocation), for large presets.
ParameterCounts parameter_counts(const BackboneProfile& profile, const LoraConfig& lora, bool with_adapters,
                                 TrainableSet set);

// FNV-1a over the raw bytes of the selected arrays, in visiting order.
std::uint64_t parameter_checksum(const Model& model, const std::function<bool(std::string_view)>& select);
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

nlohmann::json profile_to_json(const BackboneProfile& profile);
BackboneProfile profile_from_json(const nlohmann::json& j);

// Checkpoint = archive of every parameter plus a manifest holding the profile,
// LoRA settings, target, label scaling and caller-supplied extras.
ArrayArchive to_archive(const Model& model, const nlohmann::json& extras = nlohmann::json::object());
Model from_archive(const ArrayArchive& archive);

}  // namespace vitppg
